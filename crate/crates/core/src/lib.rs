//! Climate-dependent dynamic financial analysis for a general-insurance
//! market: scenario-conditioned climate forecasts drive catastrophe losses,
//! macro-economic variables, asset returns, premiums, reinsurance and
//! insurer surplus.

pub mod assets;
pub mod calibration;
pub mod climate;
pub mod engine;
pub mod error;
pub mod hazard;
pub mod liability;
pub mod macro_econ;
pub mod rng;
pub mod stats;
pub mod surplus;

pub use error::{DfaError, Result};
