//! Series preprocessing for the global learners: mean normalisation, the
//! `log(x + 1)` transform, classical additive deseasonalisation, Fourier
//! regressors and the moving-window scheme. Every step that touches values has
//! an exact inverse so forecasts can be mapped back to the original scale.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `value ↦ (value + shift) / divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub divisor: f64,
    pub shift: f64,
}

impl Normalization {
    pub fn apply(&self, v: f64) -> f64 {
        (v + self.shift) / self.divisor
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.divisor - self.shift
    }
}

/// Divides by the series mean. A series whose mean is not positive is instead
/// shifted by `1 - min(x)` with a unit divisor, so the result stays finite and
/// positive.
pub fn mean_normalize(x: &[f64]) -> (Vec<f64>, Normalization) {
    let mean = if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    };
    let norm = if mean > 0.0 {
        Normalization {
            divisor: mean,
            shift: 0.0,
        }
    } else {
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let min = if min.is_finite() { min } else { 0.0 };
        Normalization {
            divisor: 1.0,
            shift: 1.0 - min,
        }
    };
    (x.iter().map(|&v| norm.apply(v)).collect(), norm)
}

pub fn log_transform(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(index, &value)| {
            if value < 0.0 {
                Err(Error::NegativeLogInput { index, value })
            } else {
                Ok(libm::log1p(value))
            }
        })
        .collect()
}

pub fn log_inverse(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| libm::expm1(v)).collect()
}

/// Centred moving average. Odd orders average `order` neighbours; even orders
/// use the usual `2 x order` weighting. Returns the index of the first
/// smoothed point and the smoothed values.
pub fn centred_moving_average(x: &[f64], order: usize) -> (usize, Vec<f64>) {
    assert!(order >= 1);
    if order == 1 {
        return (0, x.to_vec());
    }
    let half = order / 2;
    if x.len() < 2 * half + 1 {
        return (half, Vec::new());
    }
    let m = order as f64;
    let out = (half..x.len() - half)
        .map(|t| {
            if order % 2 == 1 {
                x[t - half..=t + half].iter().sum::<f64>() / m
            } else {
                let inner: f64 = x[t - half + 1..t + half].iter().sum();
                (inner + 0.5 * (x[t - half] + x[t + half])) / m
            }
        })
        .collect();
    (half, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub period: usize,
    /// Seasonal index for phase `t % period`; sums to zero.
    pub indices: Vec<f64>,
    pub trend_start: usize,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub deseasonalized: Vec<f64>,
}

impl Decomposition {
    pub fn seasonal_at(&self, t: usize) -> f64 {
        self.indices[t % self.period]
    }

    /// Adds the periodic seasonal pattern back onto values indexed from `start`.
    pub fn reseasonalize(&self, values: &[f64], start: usize) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v + self.seasonal_at(start + i))
            .collect()
    }

    /// `x - seasonal` over the span where the trend is defined.
    pub fn remainder(&self) -> Vec<f64> {
        self.trend
            .iter()
            .enumerate()
            .map(|(i, tr)| {
                let t = self.trend_start + i;
                self.deseasonalized[t] - tr
            })
            .collect()
    }
}

/// Classical additive decomposition: centred moving-average trend, mean
/// seasonal indices of the detrended series, re-centred to zero mean.
pub fn classical_decompose(x: &[f64], period: usize) -> Result<Decomposition> {
    decompose_with_trend_order(x, period, period)
}

/// As [`classical_decompose`] but with an explicit trend smoothing order,
/// which should be a multiple of `period` for the seasonal pattern to cancel.
pub fn decompose_with_trend_order(
    x: &[f64],
    period: usize,
    trend_order: usize,
) -> Result<Decomposition> {
    if period == 0 || trend_order == 0 {
        return Err(Error::param("period must be positive"));
    }
    let required = (2 * period).max(trend_order + 1);
    if x.len() < required {
        return Err(Error::TooShort {
            what: "seasonal decomposition",
            len: x.len(),
            required,
        });
    }
    let (trend_start, trend) = centred_moving_average(x, trend_order);
    let mut indices = vec![0.0; period];
    if period > 1 {
        let mut counts = vec![0usize; period];
        for (i, tr) in trend.iter().enumerate() {
            let t = trend_start + i;
            indices[t % period] += x[t] - tr;
            counts[t % period] += 1;
        }
        for (idx, &c) in indices.iter_mut().zip(&counts) {
            if c > 0 {
                *idx /= c as f64;
            }
        }
        let centre = indices.iter().sum::<f64>() / period as f64;
        for idx in indices.iter_mut() {
            *idx -= centre;
        }
    }
    let seasonal: Vec<f64> = (0..x.len()).map(|t| indices[t % period]).collect();
    let deseasonalized = x.iter().zip(&seasonal).map(|(v, s)| v - s).collect();
    Ok(Decomposition {
        period,
        indices,
        trend_start,
        trend,
        seasonal,
        deseasonalized,
    })
}

/// `[sin(2πkt/period), cos(2πkt/period)]` for `k = 1..=terms`, interleaved.
pub fn fourier_terms(t: usize, period: f64, terms: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * terms);
    push_fourier_terms(&mut out, t, period, terms)?;
    Ok(out)
}

fn push_fourier_terms(out: &mut Vec<f64>, t: usize, period: f64, terms: usize) -> Result<()> {
    if !(period > 0.0) || terms == 0 || terms as f64 > libm::floor(period / 2.0) {
        return Err(Error::param(format!(
            "{terms} Fourier terms do not fit period {period}"
        )));
    }
    // reduce the phase first so large t keeps full precision
    let phase = libm::fmod(t as f64, period) / period;
    for k in 1..=terms {
        let angle = 2.0 * PI * k as f64 * phase;
        out.push(libm::sin(angle));
        out.push(libm::cos(angle));
    }
    Ok(())
}

/// Input window length: `ceil(1.25 * max(horizon, seasonal_period))`.
pub fn input_window_size(horizon: usize, seasonal_period: usize) -> usize {
    let m = horizon.max(seasonal_period);
    (5 * m).div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierSpec {
    pub period: f64,
    pub terms: usize,
}

/// Column layout of a model input row: `lags` past values, oldest first,
/// optionally followed by the Fourier terms of the target's time index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputLayout {
    pub lags: usize,
    pub fourier: Option<FourierSpec>,
}

impl InputLayout {
    pub fn lags(lags: usize) -> Self {
        Self {
            lags,
            fourier: None,
        }
    }

    pub fn width(&self) -> usize {
        self.lags + self.fourier.map_or(0, |f| 2 * f.terms)
    }

    /// Appends one input row predicting the value at time index `target_t`.
    pub fn push_row(&self, out: &mut Vec<f64>, lagged: &[f64], target_t: usize) -> Result<()> {
        debug_assert_eq!(lagged.len(), self.lags);
        out.extend_from_slice(lagged);
        if let Some(f) = self.fourier {
            push_fourier_terms(out, target_t, f.period, f.terms)?;
        }
        Ok(())
    }
}

/// Pooled (input, target) pairs cut from a collection of series.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub layout: InputLayout,
    /// Row-major, `layout.width()` columns.
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub series_index: Vec<usize>,
}

impl WindowSet {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.inputs[i * w..(i + 1) * w]
    }

    /// Rows restricted to the given series positions, in row order.
    pub fn select_series(&self, keep: &[bool]) -> WindowSet {
        let mut out = WindowSet {
            layout: self.layout,
            inputs: Vec::new(),
            targets: Vec::new(),
            series_index: Vec::new(),
        };
        for i in 0..self.rows() {
            if keep[self.series_index[i]] {
                out.inputs.extend_from_slice(self.row(i));
                out.targets.push(self.targets[i]);
                out.series_index.push(self.series_index[i]);
            }
        }
        out
    }
}

/// Cuts every series into single-step (window, next value) pairs. A series of
/// length `L` contributes `L - lags` rows, in time order.
pub fn make_windows(series: &[(&str, &[f64])], layout: &InputLayout) -> Result<WindowSet> {
    let n = layout.lags;
    if n == 0 {
        return Err(Error::param("window size must be positive"));
    }
    let short: Vec<String> = series
        .iter()
        .filter(|(_, v)| v.len() < n + 1)
        .map(|(id, _)| String::from(*id))
        .collect();
    if !short.is_empty() {
        return Err(Error::ShortSeries {
            ids: short,
            required: n + 1,
        });
    }
    let rows: usize = series.iter().map(|(_, v)| v.len() - n).sum();
    let mut ws = WindowSet {
        layout: *layout,
        inputs: Vec::with_capacity(rows * layout.width()),
        targets: Vec::with_capacity(rows),
        series_index: Vec::with_capacity(rows),
    };
    for (si, (_, values)) in series.iter().enumerate() {
        for t in n..values.len() {
            layout.push_row(&mut ws.inputs, &values[t - n..t], t)?;
            ws.targets.push(values[t]);
            ws.series_index.push(si);
        }
    }
    Ok(ws)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seasonality {
    #[default]
    None,
    Deseasonalise,
    Fourier {
        terms: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub log: bool,
    #[serde(default)]
    pub seasonality: Seasonality,
}

impl PipelineConfig {
    /// Mean normalisation only.
    pub const PLAIN: PipelineConfig = PipelineConfig {
        log: false,
        seasonality: Seasonality::None,
    };
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::PLAIN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    MeanNormalize,
    Log,
    Deseasonalise,
}

/// What was done to one series, in order, and the state needed to undo it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    pub series_id: String,
    pub normalization: Normalization,
    pub log_applied: bool,
    pub seasonal_indices: Option<Vec<f64>>,
    pub pipeline_order: Vec<Step>,
}

impl PreprocessRecord {
    pub fn mean_divisor(&self) -> f64 {
        self.normalization.divisor
    }

    pub fn forward(
        series_id: &str,
        x: &[f64],
        cfg: &PipelineConfig,
        period: usize,
    ) -> Result<(Self, Vec<f64>)> {
        let (mut values, normalization) = mean_normalize(x);
        let mut order = vec![Step::MeanNormalize];
        if cfg.log {
            values = log_transform(&values)?;
            order.push(Step::Log);
        }
        let mut seasonal_indices = None;
        if cfg.seasonality == Seasonality::Deseasonalise && period > 1 {
            let dec = classical_decompose(&values, period)?;
            values = dec.deseasonalized;
            seasonal_indices = Some(dec.indices);
            order.push(Step::Deseasonalise);
        }
        Ok((
            Self {
                series_id: series_id.into(),
                normalization,
                log_applied: cfg.log,
                seasonal_indices,
                pipeline_order: order,
            },
            values,
        ))
    }

    /// Undoes the pipeline in reverse order for values whose first element sits
    /// at time index `start` of the original series.
    pub fn inverse(&self, values: &[f64], start: usize) -> Vec<f64> {
        let mut out = values.to_vec();
        for step in self.pipeline_order.iter().rev() {
            match step {
                Step::Deseasonalise => {
                    let idx = self
                        .seasonal_indices
                        .as_ref()
                        .expect("deseasonalise step without indices");
                    for (i, v) in out.iter_mut().enumerate() {
                        *v += idx[(start + i) % idx.len()];
                    }
                }
                Step::Log => out = log_inverse(&out),
                Step::MeanNormalize => {
                    for v in out.iter_mut() {
                        *v = self.normalization.invert(*v);
                    }
                }
            }
        }
        out
    }
}
