//! Configuration, data ingestion, scenario interpolation, orchestration and
//! report output.

pub mod calibrate;
pub mod config;
pub mod data;
pub mod output;
pub mod scenario;
pub mod sim;
pub mod spline;

pub use config::RunConfig;
pub use sim::{run_simulation, RunOptions, RunOutput};
