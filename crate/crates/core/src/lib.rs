//! One-to-many worker-firm sorting with wedges: static equilibrium, firm
//! cross sections, business-cycle dynamics, calibration and numerical
//! verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod firms;
pub mod params;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod statics;
pub mod verify;

pub use error::{ModelError, Result};
pub use params::{AggregateShockState, MarkovChain2, ModelParams, ValidatedParams};
pub use statics::{solve_lambda, solve_static, Coefficients, StaticEquilibrium, StaticState};
