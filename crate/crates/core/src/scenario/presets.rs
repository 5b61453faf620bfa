use num_complex::Complex64;

use super::{InitialPolygon, Outputs, ScenarioConfig, SlitConfig, StageConfig, Tolerances};
use crate::loewner::ControlLaw;
use crate::sc_core::GridSpec;

/// Two vertical slits from `-3` and `-1` in the upper half-plane, growing at
/// speed ratio 1 : 2 until the first has length 1.
pub fn example1() -> ScenarioConfig {
    let up = Some(Complex64::new(0.0, 1.0));
    ScenarioConfig {
        name: "example1".into(),
        initial: InitialPolygon::HalfPlane,
        stages: vec![StageConfig {
            target_l1: 1.0,
            slits: vec![
                SlitConfig {
                    base_point: Complex64::new(-3.0, 0.0),
                    direction: up,
                    exponents: None,
                    ratio: 0.5,
                    prevertex: None,
                },
                SlitConfig {
                    base_point: Complex64::new(-1.0, 0.0),
                    direction: up,
                    exponents: None,
                    ratio: 1.0,
                    prevertex: None,
                },
            ],
            control: ControlLaw::ConstantRatios,
        }],
        tolerances: Tolerances::default(),
        outputs: Outputs {
            table: true,
            trace: true,
            grid: true,
            verify: true,
        },
        grid: Some(GridSpec::new(-14.0, 2.0, 0.05, 6.0, 0.25, 240)),
    }
}

/// The 2 x 1 rectangle; a slit from the middle of the top side downwards and
/// one from the middle of the left side to the right, equal speeds, until the
/// tips meet at `-0.5 + 0.5i`. The limit is an L-shaped hexagon.
pub fn example2() -> ScenarioConfig {
    ScenarioConfig {
        name: "example2".into(),
        initial: InitialPolygon::Rectangle { width: 2.0, height: 1.0 },
        stages: vec![StageConfig {
            target_l1: 0.5,
            slits: vec![
                SlitConfig {
                    base_point: Complex64::new(-0.5, 1.0),
                    direction: Some(Complex64::new(0.0, -1.0)),
                    exponents: None,
                    ratio: 1.0,
                    prevertex: None,
                },
                SlitConfig {
                    base_point: Complex64::new(-1.0, 0.5),
                    direction: Some(Complex64::new(1.0, 0.0)),
                    exponents: None,
                    ratio: 1.0,
                    prevertex: None,
                },
            ],
            control: ControlLaw::ConstantRatios,
        }],
        tolerances: Tolerances::default(),
        outputs: Outputs {
            table: true,
            trace: true,
            grid: true,
            verify: true,
        },
        grid: Some(GridSpec::new(-20.0, 12.0, 0.05, 16.0, 0.5, 300)),
    }
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        _ => None,
    }
}
