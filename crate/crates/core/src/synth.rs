//! Seeded synthetic panels with known family membership.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, stream};
use crate::series::{Dataset, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `y_t = intercept + sum_i coefficients[i] * y_{t-1-i} + e_t`.
    Ar { intercept: f64, coefficients: Vec<f64> },
    /// A sinusoid of the given period around `level`, plus AR(1) noise with
    /// coefficient `phi`.
    Seasonal {
        level: f64,
        amplitude: f64,
        period: usize,
        #[serde(default)]
        phi: f64,
    },
}

fn default_name() -> String {
    "synthetic".into()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub families: Vec<Family>,
    pub count_per_family: usize,
    pub length: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub horizon: usize,
    #[serde(default = "one")]
    pub seasonal_period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// Family index of every series, in dataset order.
    pub labels: Vec<usize>,
}

fn generate_one<R: Rng>(family: &Family, length: usize, noise: &Normal<f64>, rng: &mut R) -> Vec<f64> {
    match family {
        Family::Ar {
            intercept,
            coefficients,
        } => {
            let sum: f64 = coefficients.iter().sum();
            let centre = if (1.0 - sum).abs() > 1e-9 {
                intercept / (1.0 - sum)
            } else {
                *intercept
            };
            let spread = 0.5 * centre.abs() + 1.0;
            let p = coefficients.len();
            let mut y: Vec<f64> = (0..p.min(length))
                .map(|_| centre + spread * rng.random_range(-1.0..1.0))
                .collect();
            while y.len() < length {
                let t = y.len();
                let v = intercept
                    + coefficients
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * y[t - 1 - i])
                        .sum::<f64>()
                    + noise.sample(rng);
                y.push(v);
            }
            y
        }
        Family::Seasonal {
            level,
            amplitude,
            period,
            phi,
        } => {
            let phase = rng.random_range(0..*period) as f64;
            let mut u = 0.0;
            (0..length)
                .map(|t| {
                    u = phi * u + noise.sample(rng);
                    let angle = core::f64::consts::TAU * (t as f64 + phase) / *period as f64;
                    level + amplitude * libm::sin(angle) + u
                })
                .collect()
        }
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    if spec.families.is_empty() || spec.count_per_family == 0 {
        return Err(Error::param("at least one family and one series per family are required"));
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::param("noise sd must be nonnegative"));
    }
    for f in &spec.families {
        if let Family::Seasonal { period: 0, .. } = f {
            return Err(Error::param("seasonal family period must be positive"));
        }
    }
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::param(format!("{e}")))?;
    let mut series = Vec::new();
    let mut labels = Vec::new();
    for (f, family) in spec.families.iter().enumerate() {
        for j in 0..spec.count_per_family {
            let counter = (f * spec.count_per_family + j) as u64;
            let mut rng = seeded(derive_seed(spec.seed, stream::SYNTH, counter));
            let values = generate_one(family, spec.length, &noise, &mut rng);
            series.push(TimeSeries::new(
                format!("f{f}_{j:03}"),
                values,
                spec.seasonal_period,
            )?);
            labels.push(f);
        }
    }
    Ok(Synthetic {
        dataset: Dataset::new(spec.name.clone(), spec.horizon, series)?,
        labels,
    })
}
