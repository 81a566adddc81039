//! Localised global forecasting models.
//!
//! A global forecasting model (GFM) shares one set of parameters across a whole
//! collection of series. This crate localises such models by clustering the
//! collection and training one model per cluster, by iterating an ensemble of
//! specialists, by seed ensembles, and by averaging global forecasts with local
//! exponential-smoothing forecasts. It also carries the evaluation metrics and
//! the nonparametric tests used to compare the resulting models.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and the thread pool live in the companion `gfm` crate; anything parallel
//! here goes through the [`exec::Executor`] trait.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clustering;
pub mod ensembles;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod features;
pub mod learners;
pub mod preprocess;
pub mod rng;
pub mod series;
pub mod synth;
pub mod tuning;

pub use error::{Error, Result};
pub use series::{Dataset, SplitSeries, TimeSeries};
