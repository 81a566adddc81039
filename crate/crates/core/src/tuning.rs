//! Hyperparameter search on the validation holdout.
//!
//! Candidate points are scored by the mean validation sMAPE of the model on a
//! random subset of the series. Points touching the specialist count are
//! scored with the specialists ensemble, all others with the full-panel
//! model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::{run_variant, EnsembleConfig, GfmConfig, GfmContext, LearnerSpec, Panel, Variant};
use crate::error::{Error, Result};
use crate::evaluation::smape;
use crate::exec::Executor;
use crate::rng::{derive_seed, seeded, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamRange {
    Int { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
    Choice { values: Vec<f64> },
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamRange::Int { lo, hi } => lo <= hi,
            ParamRange::Real { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            ParamRange::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("search range for `{name}` is empty")))
        }
    }

    /// Every value of a discrete range.
    fn values(&self) -> Option<Vec<f64>> {
        match self {
            ParamRange::Int { lo, hi } => Some((*lo..=*hi).map(|v| v as f64).collect()),
            ParamRange::Choice { values } => Some(values.clone()),
            ParamRange::Real { lo, hi } if lo == hi => Some(alloc::vec![*lo]),
            ParamRange::Real { .. } => None,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ParamRange::Int { lo, hi } => rng.random_range(*lo..=*hi) as f64,
            ParamRange::Real { lo, hi } => rng.random_range(*lo..=*hi),
            ParamRange::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

/// Parameter name to range. Known names: `hidden`, `decay`, `epochs`, `step`
/// (network), `l2` (pooled regression), `window`, `specialists`.
pub type SearchSpace = BTreeMap<String, ParamRange>;
pub type ParamPoint = BTreeMap<String, f64>;

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && libm::trunc(v) == v {
        Ok(v as usize)
    } else {
        Err(Error::param(format!("`{name}` must be a positive integer, got {v}")))
    }
}

pub fn apply_point(point: &ParamPoint, gfm: &mut GfmConfig, ens: &mut EnsembleConfig) -> Result<()> {
    for (name, &v) in point {
        match (name.as_str(), &mut gfm.learner) {
            ("hidden", LearnerSpec::Ffnn(p)) => p.hidden = as_count(name, v)?,
            ("decay", LearnerSpec::Ffnn(p)) => p.decay = v,
            ("epochs", LearnerSpec::Ffnn(p)) => p.epochs = as_count(name, v)?,
            ("step", LearnerSpec::Ffnn(p)) => p.step = v,
            ("l2", LearnerSpec::Pr { l2 }) => *l2 = v,
            ("window", _) => gfm.window = Some(as_count(name, v)?),
            ("specialists", _) => ens.specialists.specialists = as_count(name, v)?,
            _ => {
                return Err(Error::param(format!(
                    "parameter `{name}` does not apply to this learner"
                )))
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub point: ParamPoint,
    /// `None` when the configuration failed to train or forecast.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub chosen: ParamPoint,
    pub score: f64,
    pub subset: Vec<String>,
    pub exhaustive: bool,
    pub trials: Vec<Trial>,
}

fn candidates(space: &SearchSpace, budget: usize, seed: u64) -> (Vec<ParamPoint>, bool) {
    let discrete: Option<Vec<(String, Vec<f64>)>> = space
        .iter()
        .map(|(k, r)| r.values().map(|v| (k.clone(), v)))
        .collect();
    if let Some(grid) = discrete {
        let size = grid.iter().try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()));
        if size.is_some_and(|s| s <= budget) {
            let mut points = alloc::vec![ParamPoint::new()];
            for (name, values) in &grid {
                points = points
                    .into_iter()
                    .flat_map(|p| {
                        values.iter().map(move |&v| {
                            let mut q = p.clone();
                            q.insert(name.clone(), v);
                            q
                        })
                    })
                    .collect();
            }
            return (points, true);
        }
    }
    let mut rng = seeded(derive_seed(seed, stream::TUNING, 1));
    let points = (0..budget)
        .map(|_| space.iter().map(|(k, r)| (k.clone(), r.sample(&mut rng))).collect())
        .collect();
    (points, false)
}

/// Searches `space` with `budget` evaluations on a random subset of
/// `subset_size` series. Discrete spaces no larger than the budget are
/// enumerated in full. Ties keep the earlier candidate.
#[allow(clippy::too_many_arguments)]
pub fn tune_hyperparameters<E: Executor>(
    panel: &Panel,
    gfm: &GfmConfig,
    ens: &EnsembleConfig,
    space: &SearchSpace,
    budget: usize,
    subset_size: usize,
    seed: u64,
    exec: &E,
) -> Result<TuningResult> {
    if budget == 0 {
        return Err(Error::param("tuning budget must be at least 1"));
    }
    for (name, r) in space {
        r.validate(name)?;
    }
    let (val_panel, actuals) = panel.validation()?;
    let n = val_panel.len();
    let mut idx = sample(
        &mut seeded(derive_seed(seed, stream::TUNING, 0)),
        n,
        subset_size.clamp(1, n),
    )
    .into_vec();
    idx.sort_unstable();
    let sub = val_panel.subset(&idx);
    let sub_actuals: Vec<&Vec<f64>> = idx.iter().map(|&i| &actuals[i]).collect();

    let (points, exhaustive) = candidates(space, budget, seed);
    let mut trials = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (t, point) in points.into_iter().enumerate() {
        let outcome = score_point(&point, &sub, &sub_actuals, gfm, ens, seed, exec);
        let trial = match outcome {
            Ok(s) => {
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((t, s));
                }
                Trial { point, score: Some(s), error: None }
            }
            Err(e) => Trial { point, score: None, error: Some(e.to_string()) },
        };
        trials.push(trial);
    }
    let Some((t, score)) = best else {
        let last = trials.last().and_then(|t| t.error.clone()).unwrap_or_default();
        return Err(Error::param(format!("every tuning candidate failed; last error: {last}")));
    };
    Ok(TuningResult {
        chosen: trials[t].point.clone(),
        score,
        subset: sub.ids.clone(),
        exhaustive,
        trials,
    })
}

fn score_point<E: Executor>(
    point: &ParamPoint,
    panel: &Panel,
    actuals: &[&Vec<f64>],
    gfm: &GfmConfig,
    ens: &EnsembleConfig,
    seed: u64,
    exec: &E,
) -> Result<f64> {
    let (mut g, mut e) = (*gfm, ens.clone());
    apply_point(point, &mut g, &mut e)?;
    let variant = if point.contains_key("specialists") {
        e.specialists.top_n = e.specialists.top_n.min(e.specialists.specialists);
        Variant::Specialists
    } else {
        Variant::Baseline
    };
    let ctx = GfmContext::new(panel, &g)?;
    let run = run_variant(&variant, &ctx, &e, seed, exec)?;
    let forecasts = run.matrix.averaged();
    let mut total = 0.0;
    for (f, y) in forecasts.iter().zip(actuals) {
        total += smape(f, y, e.zero_safe, e.epsilon)?;
    }
    let s = total / forecasts.len() as f64;
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::NonFinite("validation score".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::learners::FfnnParams;
    use alloc::vec;

    /// A geometric trend times a shifted sinusoid: an exact linear
    /// recursion of order three with no intercept.
    fn recursion_panel() -> Panel {
        let histories = (0..6)
            .map(|j| {
                (0..40)
                    .map(|t| {
                        let t = t as f64;
                        (1.0 + 0.2 * j as f64) * libm::pow(1.02, t) * (2.0 + libm::sin(0.9 * t))
                    })
                    .collect()
            })
            .collect();
        Panel {
            ids: (0..6).map(|i| format!("s{i}")).collect(),
            histories,
            period: 1,
            horizon: 4,
        }
    }

    #[test]
    fn budget_zero_errors() {
        let p = recursion_panel();
        let r = tune_hyperparameters(&p, &GfmConfig::default(), &EnsembleConfig::default(), &SearchSpace::new(), 0, 3, 0, &Sequential);
        assert!(r.is_err());
    }

    #[test]
    fn budget_one_returns_the_sampled_point() {
        let p = recursion_panel();
        let mut space = SearchSpace::new();
        space.insert("l2".into(), ParamRange::Real { lo: 0.0, hi: 1.0 });
        let r = tune_hyperparameters(&p, &GfmConfig::default(), &EnsembleConfig::default(), &space, 1, 3, 4, &Sequential).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.chosen, r.trials[0].point);
        assert!(!r.exhaustive);
    }

    #[test]
    fn planted_window_is_found() {
        let p = recursion_panel();
        let mut space = SearchSpace::new();
        space.insert("window".into(), ParamRange::Int { lo: 1, hi: 4 });
        let r = tune_hyperparameters(&p, &GfmConfig::default(), &EnsembleConfig::default(), &space, 4, 6, 1, &Sequential).unwrap();
        assert!(r.exhaustive);
        assert_eq!(r.trials.len(), 4);
        assert_eq!(r.chosen["window"], 3.0);
        assert!(r.score < 1e-6);
    }

    #[test]
    fn deterministic_and_learner_checked() {
        let p = recursion_panel();
        let gfm = GfmConfig {
            learner: LearnerSpec::Ffnn(FfnnParams { epochs: 20, ..FfnnParams::default() }),
            window: Some(3),
            ..GfmConfig::default()
        };
        let mut space = SearchSpace::new();
        space.insert("hidden".into(), ParamRange::Int { lo: 1, hi: 12 });
        space.insert("decay".into(), ParamRange::Real { lo: 0.0, hi: 0.1 });
        let run = |s| tune_hyperparameters(&p, &gfm, &EnsembleConfig::default(), &space, 3, 2, s, &Sequential).unwrap();
        assert_eq!(run(7), run(7));
        let mut bad = SearchSpace::new();
        bad.insert("l2".into(), ParamRange::Choice { values: vec![0.1] });
        assert!(tune_hyperparameters(&p, &gfm, &EnsembleConfig::default(), &bad, 1, 2, 0, &Sequential).is_err());
    }
}
