//! Per-series descriptive features used for feature-based clustering.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::decompose_with_trend_order;

pub const FEATURE_NAMES: [&str; 13] = [
    "mean",
    "variance",
    "acf1",
    "trend_strength",
    "linearity",
    "curvature",
    "spectral_entropy",
    "lumpiness",
    "spikiness",
    "level_shift",
    "variance_change",
    "flat_spots",
    "crossing_points",
];

/// Shortest span used for trend smoothing and rolling windows.
const MIN_WINDOW: usize = 10;
/// Trend smoothing spans at least this many points (rounded up to a whole
/// number of seasonal cycles).
const MIN_TREND_SPAN: usize = 13;
const FLAT_SPOT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: f64,
    pub variance: f64,
    pub acf1: f64,
    pub trend_strength: f64,
    pub linearity: f64,
    pub curvature: f64,
    pub spectral_entropy: f64,
    pub lumpiness: f64,
    pub spikiness: f64,
    pub level_shift: f64,
    pub variance_change: f64,
    pub flat_spots: f64,
    pub crossing_points: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 13] {
        [
            self.mean,
            self.variance,
            self.acf1,
            self.trend_strength,
            self.linearity,
            self.curvature,
            self.spectral_entropy,
            self.lumpiness,
            self.spikiness,
            self.level_shift,
            self.variance_change,
            self.flat_spots,
            self.crossing_points,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub standardized: bool,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn from_series(series: &[(&str, &[f64])], period: usize) -> Result<Self> {
        let mut ids = Vec::with_capacity(series.len());
        let mut rows = Vec::with_capacity(series.len());
        for (id, x) in series {
            ids.push(String::from(*id));
            rows.push(extract_features(x, period)?.to_array().to_vec());
        }
        Ok(Self {
            ids,
            rows,
            standardized: false,
        })
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Sample variance (n - 1 denominator); zero below two points.
fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn acf1(x: &[f64]) -> f64 {
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if !(denom > 0.0) {
        return 0.0;
    }
    let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / denom
}

/// Coefficients of `y` on the degree-1 and degree-2 orthonormal polynomials of
/// its time index.
fn orthogonal_poly_coefficients(y: &[f64]) -> (f64, f64) {
    let n = y.len();
    if n < 3 {
        return (0.0, 0.0);
    }
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let tm = mean(&t);
    let p1: Vec<f64> = t.iter().map(|v| v - tm).collect();
    let n1 = libm::sqrt(p1.iter().map(|v| v * v).sum::<f64>());
    let p1: Vec<f64> = p1.iter().map(|v| v / n1).collect();
    // Gram-Schmidt t^2 against 1 and p1
    let sq: Vec<f64> = t.iter().map(|v| v * v).collect();
    let sqm = mean(&sq);
    let proj: f64 = sq.iter().zip(&p1).map(|(a, b)| a * b).sum();
    let p2: Vec<f64> = sq
        .iter()
        .zip(&p1)
        .map(|(s, q)| s - sqm - proj * q)
        .collect();
    let n2 = libm::sqrt(p2.iter().map(|v| v * v).sum::<f64>());
    let p2: Vec<f64> = p2.iter().map(|v| v / n2).collect();
    let dot = |p: &[f64]| y.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    (dot(&p1), dot(&p2))
}

/// Normalised Shannon entropy of the periodogram over the nonzero Fourier
/// frequencies.
fn spectral_entropy(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let nf = n / 2;
    if nf < 2 {
        return 0.0;
    }
    let step = 2.0 * core::f64::consts::PI / n as f64;
    let power: Vec<f64> = (1..=nf)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let ang = step * ((k * t) % n) as f64;
                re += (v - m) * libm::cos(ang);
                im -= (v - m) * libm::sin(ang);
            }
            re * re + im * im
        })
        .collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let h: f64 = power
        .iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * libm::log(p))
        .sum();
    (h / libm::log(nf as f64)).clamp(0.0, 1.0)
}

fn lumpiness(x: &[f64], width: usize) -> f64 {
    let vars: Vec<f64> = x.chunks_exact(width).map(variance).collect();
    variance(&vars)
}

/// Variance of the leave-one-out variances.
fn spikiness(r: &[f64]) -> f64 {
    let n = r.len();
    if n < 3 {
        return 0.0;
    }
    let sum: f64 = r.iter().sum();
    let sumsq: f64 = r.iter().map(|v| v * v).sum();
    let m = (n - 1) as f64;
    let loo: Vec<f64> = r
        .iter()
        .map(|v| {
            let s = sum - v;
            let ss = sumsq - v * v;
            ((ss - s * s / m) / (m - 1.0)).max(0.0)
        })
        .collect();
    variance(&loo)
}

/// Largest absolute change of a windowed statistic between adjacent
/// non-overlapping windows; zero when the series holds fewer than two windows.
fn max_shift(x: &[f64], width: usize, stat: fn(&[f64]) -> f64) -> f64 {
    if x.len() < 2 * width {
        return 0.0;
    }
    let rolled: Vec<f64> = x.windows(width).map(stat).collect();
    (0..rolled.len() - width)
        .map(|i| (rolled[i + width] - rolled[i]).abs())
        .fold(0.0, f64::max)
}

fn flat_spots(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let bin = |v: f64| -> usize {
        if !(span > 0.0) {
            0
        } else {
            (((v - lo) / span * FLAT_SPOT_BINS as f64) as usize).min(FLAT_SPOT_BINS - 1)
        }
    };
    let mut best = 0usize;
    let mut run = 0usize;
    let mut prev = usize::MAX;
    for &v in x {
        let b = bin(v);
        run = if b == prev { run + 1 } else { 1 };
        prev = b;
        best = best.max(run);
    }
    best as f64
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn crossing_points(x: &[f64]) -> f64 {
    let mid = median(x);
    x.windows(2)
        .filter(|w| (w[0] <= mid) != (w[1] <= mid))
        .count() as f64
}

pub fn extract_features(x: &[f64], period: usize) -> Result<FeatureVector> {
    if period == 0 {
        return Err(Error::param("period must be positive"));
    }
    let required = (2 * period).max(MIN_WINDOW);
    if x.len() < required {
        return Err(Error::TooShort {
            what: "feature extraction",
            len: x.len(),
            required,
        });
    }
    let width = period.max(MIN_WINDOW);
    let trend_order = period * MIN_TREND_SPAN.div_ceil(period);
    let (trend_strength, linearity, curvature, spikiness) =
        match decompose_with_trend_order(x, period, trend_order) {
            Ok(dec) => {
                let remainder = dec.remainder();
                let deseason = &dec.deseasonalized[dec.trend_start..dec.trend_start + dec.trend.len()];
                let vr = variance(&remainder);
                let vd = variance(deseason);
                let strength = if vd > 0.0 {
                    (1.0 - vr / vd).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (lin, curv) = orthogonal_poly_coefficients(&dec.trend);
                (strength, lin, curv, spikiness(&remainder))
            }
            // too short for the trend span; treat as trendless
            Err(_) => (0.0, 0.0, 0.0, 0.0),
        };
    Ok(FeatureVector {
        mean: mean(x),
        variance: variance(x),
        acf1: acf1(x),
        trend_strength,
        linearity,
        curvature,
        spectral_entropy: spectral_entropy(x),
        lumpiness: lumpiness(x, width),
        spikiness,
        level_shift: max_shift(x, width, mean),
        variance_change: max_shift(x, width, variance),
        flat_spots: flat_spots(x),
        crossing_points: crossing_points(x),
    })
}

/// Column-wise z-scores with the population standard deviation. Constant
/// columns become zero.
pub fn standardize(fm: &FeatureMatrix) -> Result<FeatureMatrix> {
    if fm.rows.len() < 2 {
        return Err(Error::param("standardizing needs at least two rows"));
    }
    let cols = fm.rows[0].len();
    let n = fm.rows.len() as f64;
    let mut rows = vec![vec![0.0; cols]; fm.rows.len()];
    for c in 0..cols {
        let m = fm.rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = fm.rows.iter().map(|r| (r[c] - m) * (r[c] - m)).sum::<f64>() / n;
        let sd = libm::sqrt(var);
        // relative floor so round-off in a constant column does not blow up
        let scale = m.abs().max(1.0);
        for (out, r) in rows.iter_mut().zip(&fm.rows) {
            out[c] = if sd > 1e-12 * scale { (r[c] - m) / sd } else { 0.0 };
        }
    }
    Ok(FeatureMatrix {
        ids: fm.ids.clone(),
        rows,
        standardized: true,
    })
}
