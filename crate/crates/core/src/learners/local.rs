use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid resolution for smoothing parameters: `{0, 0.05, ..., 1}`.
pub const SMOOTHING_GRID_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalKind {
    Ses,
    Holt,
    HoltWintersAdditive,
    SeasonalNaive,
}

impl LocalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LocalKind::Ses => "ses",
            LocalKind::Holt => "holt",
            LocalKind::HoltWintersAdditive => "holt_winters_additive",
            LocalKind::SeasonalNaive => "seasonal_naive",
        }
    }
}

impl fmt::Display for LocalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ses" => LocalKind::Ses,
            "holt" => LocalKind::Holt,
            "holt_winters_additive" => LocalKind::HoltWintersAdditive,
            "seasonal_naive" => LocalKind::SeasonalNaive,
            other => return Err(Error::param(alloc::format!("unknown local model `{other}`"))),
        })
    }
}

/// A fitted per-series model with its final states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub kind: LocalKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub period: usize,
    pub level: f64,
    pub trend: f64,
    /// Seasonal state by phase `t % period`.
    pub seasonal: Vec<f64>,
    /// Time index of the first value to forecast.
    pub next_t: usize,
    pub sse: f64,
}

fn grid() -> impl Iterator<Item = f64> + Clone {
    (0..=SMOOTHING_GRID_STEPS).map(|i| i as f64 / SMOOTHING_GRID_STEPS as f64)
}

struct Run {
    sse: f64,
    level: f64,
    trend: f64,
    seasonal: Vec<f64>,
}

fn run_ses(x: &[f64], alpha: f64) -> Run {
    let mut level = x[0];
    let mut sse = 0.0;
    for &v in &x[1..] {
        let e = v - level;
        sse += e * e;
        level += alpha * e;
    }
    Run {
        sse,
        level,
        trend: 0.0,
        seasonal: Vec::new(),
    }
}

fn run_holt(x: &[f64], alpha: f64, beta: f64) -> Run {
    let mut level = x[0];
    let mut trend = x[1] - x[0];
    let mut sse = 0.0;
    for &v in &x[1..] {
        let f = level + trend;
        let e = v - f;
        sse += e * e;
        let new_level = alpha * v + (1.0 - alpha) * f;
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        level = new_level;
    }
    Run {
        sse,
        level,
        trend,
        seasonal: Vec::new(),
    }
}

/// Initial states sit at time `m - 1`: the level and seasonal terms are read off
/// the first cycle after removing the trend implied by the first two cycles.
fn run_holt_winters(x: &[f64], m: usize, alpha: f64, beta: f64, gamma: f64) -> Run {
    let mf = m as f64;
    let mean1 = x[..m].iter().sum::<f64>() / mf;
    let mean2 = x[m..2 * m].iter().sum::<f64>() / mf;
    let mut trend = (mean2 - mean1) / mf;
    let centre = (mf - 1.0) / 2.0;
    let mut level = mean1 + trend * centre;
    let mut seasonal: Vec<f64> = (0..m)
        .map(|i| x[i] - (mean1 + trend * (i as f64 - centre)))
        .collect();
    let mut sse = 0.0;
    for (t, &v) in x.iter().enumerate().skip(m) {
        let s = seasonal[t % m];
        let f = level + trend + s;
        let e = v - f;
        sse += e * e;
        let new_level = alpha * (v - s) + (1.0 - alpha) * (level + trend);
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        seasonal[t % m] = gamma * (v - new_level) + (1.0 - gamma) * s;
        level = new_level;
    }
    Run {
        sse,
        level,
        trend,
        seasonal,
    }
}

/// Fits by exhaustive grid search over the smoothing parameters, minimising
/// the in-sample one-step-ahead squared error. Ties keep the earliest grid
/// point.
pub fn fit_local(x: &[f64], kind: LocalKind, period: usize) -> Result<LocalModel> {
    if period == 0 {
        return Err(Error::param("period must be positive"));
    }
    let required = match kind {
        LocalKind::HoltWintersAdditive => (2 * period).max(2),
        LocalKind::SeasonalNaive => period,
        _ => 2,
    };
    if x.len() < required {
        return Err(Error::TooShort {
            what: "local model fit",
            len: x.len(),
            required,
        });
    }
    let mut best: Option<(Run, f64, f64, f64)> = None;
    let mut consider = |run: Run, a: f64, b: f64, g: f64| {
        if best.as_ref().is_none_or(|(r, ..)| run.sse < r.sse) {
            best = Some((run, a, b, g));
        }
    };
    match kind {
        LocalKind::Ses => {
            for a in grid() {
                consider(run_ses(x, a), a, 0.0, 0.0);
            }
        }
        LocalKind::Holt => {
            for a in grid() {
                for b in grid() {
                    consider(run_holt(x, a, b), a, b, 0.0);
                }
            }
        }
        LocalKind::HoltWintersAdditive => {
            for a in grid() {
                for b in grid() {
                    for g in grid() {
                        consider(run_holt_winters(x, period, a, b, g), a, b, g);
                    }
                }
            }
        }
        LocalKind::SeasonalNaive => {
            let seasonal = (0..period)
                .map(|phase| {
                    // value at the last time index with this phase
                    let t = x.len() - period + (phase + period - x.len() % period) % period;
                    x[t]
                })
                .collect();
            consider(
                Run {
                    sse: 0.0,
                    level: 0.0,
                    trend: 0.0,
                    seasonal,
                },
                0.0,
                0.0,
                0.0,
            );
        }
    }
    let (run, alpha, beta, gamma) = best.expect("grid is nonempty");
    Ok(LocalModel {
        kind,
        alpha,
        beta,
        gamma,
        period,
        level: run.level,
        trend: run.trend,
        seasonal: run.seasonal,
        next_t: x.len(),
        sse: run.sse,
    })
}

pub fn forecast_local(model: &LocalModel, horizon: usize) -> Vec<f64> {
    (1..=horizon)
        .map(|h| {
            let t = model.next_t + h - 1;
            match model.kind {
                LocalKind::Ses => model.level,
                LocalKind::Holt => model.level + h as f64 * model.trend,
                LocalKind::HoltWintersAdditive => {
                    model.level + h as f64 * model.trend + model.seasonal[t % model.period]
                }
                LocalKind::SeasonalNaive => model.seasonal[t % model.period],
            }
        })
        .collect()
}
