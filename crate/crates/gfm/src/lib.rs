//! Dataset IO, the experiment harness and the `gfm` command line on top of
//! [`gfm_core`].

pub mod commands;
pub mod config;
pub mod io;
pub mod pool;
pub mod run;

pub use config::ExperimentConfig;
pub use pool::{resolve_workers, Pool};
pub use run::{run_experiment, write_outputs, RunManifest, RunOutputs};
