#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod loewner;
pub mod ode;
pub mod oracle;
pub mod quadrature;
pub mod sc_core;
pub mod scenario;
