use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which submodel produced a stored row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOrigin {
    /// Cluster label, or specialist index for the specialists ensemble.
    pub cluster: usize,
    /// The row came from the full-data model because its cluster was too
    /// small to train on.
    pub fallback: bool,
}

/// Per-iteration forecast rows for every series, in original scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMatrix {
    pub model_tag: String,
    pub horizon: usize,
    pub series_ids: Vec<String>,
    /// `rows[series][iteration]`, each of length `horizon`.
    pub rows: Vec<Vec<Vec<f64>>>,
    pub origins: Vec<Vec<RowOrigin>>,
}

impl ForecastMatrix {
    pub fn new(model_tag: impl Into<String>, horizon: usize, series_ids: Vec<String>) -> Self {
        let n = series_ids.len();
        Self {
            model_tag: model_tag.into(),
            horizon,
            series_ids,
            rows: alloc::vec![Vec::new(); n],
            origins: alloc::vec![Vec::new(); n],
        }
    }

    /// One row per series.
    pub fn single(
        model_tag: impl Into<String>,
        horizon: usize,
        series_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Self {
        let mut m = Self::new(model_tag, horizon, series_ids);
        for (i, r) in rows.into_iter().enumerate() {
            m.push(i, r, RowOrigin { cluster: 0, fallback: false });
        }
        m
    }

    pub fn push(&mut self, series: usize, row: Vec<f64>, origin: RowOrigin) {
        self.rows[series].push(row);
        self.origins[series].push(origin);
    }

    pub fn len(&self) -> usize {
        self.series_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series_ids.is_empty()
    }

    pub fn iterations(&self, series: usize) -> usize {
        self.rows[series].len()
    }

    /// Row-wise arithmetic mean over each series' iterations.
    pub fn averaged(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|its| {
                let k = its.len() as f64;
                (0..self.horizon)
                    .map(|h| its.iter().map(|r| r[h]).sum::<f64>() / k)
                    .collect()
            })
            .collect()
    }

    /// Coverage and shape: every series has at least one finite row of
    /// length `horizon`.
    pub fn validate(&self) -> Result<()> {
        for (id, its) in self.series_ids.iter().zip(&self.rows) {
            if its.is_empty() {
                return Err(Error::ForecastMismatch(format!("series `{id}` has no rows")));
            }
            for r in its {
                if r.len() != self.horizon {
                    return Err(Error::ForecastMismatch(format!(
                        "series `{id}` has a row of length {} instead of {}",
                        r.len(),
                        self.horizon
                    )));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(id.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Equal-weight mean of the averaged forecasts of several matrices.
pub fn combine_forecasts(
    model_tag: impl Into<String>,
    matrices: &[&ForecastMatrix],
) -> Result<ForecastMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::ForecastMismatch("nothing to combine".into()))?;
    for m in &matrices[1..] {
        if m.series_ids != first.series_ids {
            return Err(Error::ForecastMismatch(format!(
                "`{}` and `{}` cover different series",
                first.model_tag, m.model_tag
            )));
        }
        if m.horizon != first.horizon {
            return Err(Error::ForecastMismatch(format!(
                "horizon {} vs {}",
                first.horizon, m.horizon
            )));
        }
    }
    let averaged: Vec<Vec<Vec<f64>>> = matrices.iter().map(|m| m.averaged()).collect();
    let k = matrices.len() as f64;
    let rows = (0..first.len())
        .map(|i| {
            (0..first.horizon)
                .map(|h| averaged.iter().map(|a| a[i][h]).sum::<f64>() / k)
                .collect()
        })
        .collect();
    Ok(ForecastMatrix::single(
        model_tag,
        first.horizon,
        first.series_ids.clone(),
        rows,
    ))
}
