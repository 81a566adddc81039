//! Base forecasting models: the pooled autoregression and the feed-forward
//! network (both global, windowed, forecast recursively) and the local
//! exponential-smoothing family used in global/local combinations.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::InputLayout;

mod ffnn;
mod local;
mod pooled;

pub use ffnn::{fit_ffnn, FfnnModel, FfnnParams};
pub use local::{fit_local, forecast_local, LocalKind, LocalModel, SMOOTHING_GRID_STEPS};
pub use pooled::{fit_pr, PooledRegressionModel};

/// A model that maps one input row to the next value.
pub trait WindowModel {
    fn layout(&self) -> &InputLayout;
    fn predict(&self, row: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlobalModel {
    Pooled(PooledRegressionModel),
    Ffnn(FfnnModel),
}

impl WindowModel for GlobalModel {
    fn layout(&self) -> &InputLayout {
        match self {
            GlobalModel::Pooled(m) => m.layout(),
            GlobalModel::Ffnn(m) => m.layout(),
        }
    }

    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            GlobalModel::Pooled(m) => m.predict(row),
            GlobalModel::Ffnn(m) => m.predict(row),
        }
    }
}

/// Iterated single-step forecasting: each step feeds the last `lags` values of
/// `history ++ forecasts so far` back into the model. Time indices continue
/// from the end of `history`.
pub fn forecast_recursive<M: WindowModel + ?Sized>(
    model: &M,
    history: &[f64],
    horizon: usize,
) -> Result<Vec<f64>> {
    let layout = *model.layout();
    let n = layout.lags;
    if history.len() < n {
        return Err(Error::TooShort {
            what: "forecast history",
            len: history.len(),
            required: n,
        });
    }
    let mut tail: Vec<f64> = history[history.len() - n..].to_vec();
    let mut row = Vec::with_capacity(layout.width());
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        row.clear();
        layout.push_row(&mut row, &tail[tail.len() - n..], history.len() + h)?;
        let y = model.predict(&row);
        out.push(y);
        tail.push(y);
    }
    Ok(out)
}
