use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slitmap::scenario::{self, ScenarioConfig, ScenarioError};

#[derive(Parser)]
#[command(name = "slitmap", about = "Accessory parameters of Schwarz-Christoffel maps with growing slits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a built-in preset).
    Solve {
        /// Scenario JSON; omit when using --preset.
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["example1", "example2"])]
        preset: Option<String>,
        /// Print the parameter table and write table.txt.
        #[arg(long)]
        table: bool,
        /// Write trace.csv.
        #[arg(long)]
        trace: bool,
        /// Write grid.csv and grid.svg.
        #[arg(long)]
        grid: bool,
        /// Run the geometric checks and write verify.json.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print a preset scenario as JSON.
    Preset {
        #[arg(value_parser = ["example1", "example2"])]
        name: String,
    },
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> Result<ScenarioConfig, ScenarioError> {
    match (config, preset) {
        (Some(_), Some(_)) => Err(ScenarioError::Config("give either a config file or --preset".into())),
        (None, None) => Err(ScenarioError::Config("no scenario given".into())),
        (None, Some(name)) => Ok(scenario::preset(&name).expect("validated by clap")),
        (Some(path), None) => {
            let text =
                std::fs::read_to_string(&path).map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Preset { name } => {
            let cfg = scenario::preset(&name).expect("validated by clap");
            println!("{}", serde_json::to_string_pretty(&cfg).expect("serializable"));
            ExitCode::SUCCESS
        }
        Command::Solve {
            config,
            preset,
            table,
            trace,
            grid,
            verify,
            out,
        } => {
            let mut cfg = match load(config, preset) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            cfg.outputs.table |= table;
            cfg.outputs.trace |= trace;
            cfg.outputs.grid |= grid;
            cfg.outputs.verify |= verify;
            let result = scenario::run(&cfg).and_then(|run| {
                let files = scenario::write_artifacts(&run, &cfg, &out)?;
                Ok((run, files))
            });
            match result {
                Ok((run, files)) => {
                    if cfg.outputs.table {
                        print!("{}", scenario::format_table(&run));
                    }
                    for f in files {
                        eprintln!("wrote {}", f.display());
                    }
                    let failed = run.stages.iter().any(|s| s.verify.as_ref().is_some_and(|v| !v.passed));
                    if failed {
                        eprintln!("verification failed; see verify.json");
                        return ExitCode::from(3);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    if let Ok(Some(p)) = scenario::write_failure(&e, &out) {
                        eprintln!("last good state written to {}", p.display());
                    }
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
