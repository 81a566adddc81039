use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ε of the zero-safe sMAPE denominator.
pub const DEFAULT_SMAPE_EPSILON: f64 = 0.1;

/// Symmetric MAPE in percent. The standard form scores a `0/0` term as zero;
/// the zero-safe form replaces each denominator with
/// `max(|Y| + |F| + ε, 0.5 + ε)`.
pub fn smape(forecast: &[f64], actual: &[f64], zero_safe: bool, epsilon: f64) -> Result<f64> {
    if forecast.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: forecast.len(),
            right: actual.len(),
        });
    }
    if forecast.is_empty() {
        return Err(Error::param("sMAPE needs at least one point"));
    }
    let total: f64 = forecast
        .iter()
        .zip(actual)
        .map(|(f, y)| {
            let num = (f - y).abs();
            if zero_safe {
                num / (y.abs() + f.abs() + epsilon).max(0.5 + epsilon)
            } else {
                let den = (y.abs() + f.abs()) / 2.0;
                if den == 0.0 {
                    0.0
                } else {
                    num / den
                }
            }
        })
        .sum();
    Ok(100.0 * total / forecast.len() as f64)
}

/// Mean absolute error scaled by the in-sample seasonal naive error.
pub fn mase(forecast: &[f64], actual: &[f64], train: &[f64], period: usize) -> Result<f64> {
    if forecast.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: forecast.len(),
            right: actual.len(),
        });
    }
    if forecast.is_empty() {
        return Err(Error::param("MASE needs at least one point"));
    }
    if period == 0 || train.len() <= period {
        return Err(Error::TooShort {
            what: "MASE in-sample series",
            len: train.len(),
            required: period + 1,
        });
    }
    let n = forecast.len() as f64;
    let m = train.len();
    let num: f64 = forecast.iter().zip(actual).map(|(f, y)| (f - y).abs()).sum();
    let naive: f64 = (period..m).map(|k| (train[k] - train[k - period]).abs()).sum();
    let den = n / (m - period) as f64 * naive;
    if !(den > 0.0) {
        return Err(Error::UndefinedMase);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean: f64,
    pub median: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregates> {
    if values.is_empty() {
        return Err(Error::param("cannot aggregate an empty set"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    };
    Ok(Aggregates { mean, median })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub series_id: String,
    pub smape: f64,
    /// `None` where the in-sample scale is zero.
    pub mase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub per_series: Vec<SeriesMetrics>,
    pub mean_smape: f64,
    pub median_smape: f64,
    pub mean_mase: Option<f64>,
    pub median_mase: Option<f64>,
    /// Series left out of the MASE aggregates.
    pub mase_excluded: usize,
}

/// Scores each series and aggregates. Series whose MASE is undefined are
/// dropped from the MASE aggregates and counted in `mase_excluded`.
pub fn evaluate_forecasts(
    ids: &[&str],
    forecasts: &[Vec<f64>],
    actuals: &[&[f64]],
    trains: &[&[f64]],
    periods: &[usize],
    zero_safe: bool,
    epsilon: f64,
) -> Result<MetricResult> {
    let n = ids.len();
    if forecasts.len() != n || actuals.len() != n || trains.len() != n || periods.len() != n {
        return Err(Error::param("evaluation inputs are not aligned"));
    }
    let mut per_series = Vec::with_capacity(n);
    let mut excluded = 0;
    for i in 0..n {
        let s = smape(&forecasts[i], actuals[i], zero_safe, epsilon)?;
        let m = match mase(&forecasts[i], actuals[i], trains[i], periods[i]) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMase) => {
                excluded += 1;
                None
            }
            Err(e) => return Err(e),
        };
        per_series.push(SeriesMetrics {
            series_id: ids[i].into(),
            smape: s,
            mase: m,
        });
    }
    let sm: Vec<f64> = per_series.iter().map(|p| p.smape).collect();
    let ma: Vec<f64> = per_series.iter().filter_map(|p| p.mase).collect();
    let sagg = aggregate(&sm)?;
    let magg = aggregate(&ma).ok();
    Ok(MetricResult {
        per_series,
        mean_smape: sagg.mean,
        median_smape: sagg.median,
        mean_mase: magg.map(|a| a.mean),
        median_mase: magg.map(|a| a.median),
        mase_excluded: excluded,
    })
}
