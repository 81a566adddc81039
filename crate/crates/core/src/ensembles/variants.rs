use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::clustered::{elbow_k, model_seed, run_cluster_number, run_cluster_seed, ClusteredRun};
use super::gfm::GfmContext;
use super::matrix::{combine_forecasts, ForecastMatrix};
use super::specialists::{run_specialists, SpecialistSettings};
use crate::clustering::ClusterMethod;
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_SMAPE_EPSILON;
use crate::exec::Executor;
use crate::learners::{fit_local, forecast_local, LocalKind};
use crate::rng::{derive_seed, stream};

/// A forecasting model under comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    Baseline,
    /// One clustering at the elbow-optimal k.
    Oc(ClusterMethod),
    /// Ensemble over the cluster-count range.
    Number(ClusterMethod),
    /// Ensemble over clustering seeds at the elbow-optimal k.
    Seed(ClusterMethod),
    Specialists,
    SeedEnsemble,
    Local(LocalKind),
    /// Equal-weight mean of the components.
    Combination(Vec<Variant>),
}

fn method_name(m: ClusterMethod) -> &'static str {
    match m {
        ClusterMethod::Kmeans => "Kmeans",
        ClusterMethod::Kmeanspp => "KmeansPlus",
        ClusterMethod::KmedoidsDtw => "DTW",
        ClusterMethod::Random => "Random",
    }
}

fn parse_method(s: &str) -> Option<ClusterMethod> {
    Some(match s {
        "Kmeans" => ClusterMethod::Kmeans,
        "KmeansPlus" => ClusterMethod::Kmeanspp,
        "DTW" => ClusterMethod::KmedoidsDtw,
        "Random" => ClusterMethod::Random,
        _ => return None,
    })
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Baseline => f.write_str("Baseline"),
            Variant::Oc(m) => write!(f, "{}.OC", method_name(*m)),
            Variant::Number(m) => write!(f, "{}.Number", method_name(*m)),
            Variant::Seed(m) => write!(f, "{}.Seed", method_name(*m)),
            Variant::Specialists => f.write_str("Ensemble.Specialists"),
            Variant::SeedEnsemble => f.write_str("Ensemble.Seed"),
            Variant::Local(k) => write!(f, "Local.{k}"),
            Variant::Combination(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::param(format!("unknown model variant `{s}`"));
        if s.contains('+') {
            let parts = s
                .split('+')
                .map(|p| p.trim().parse())
                .collect::<Result<Vec<Variant>>>()?;
            return Ok(Variant::Combination(parts));
        }
        match s {
            "Baseline" => return Ok(Variant::Baseline),
            "Ensemble.Specialists" => return Ok(Variant::Specialists),
            "Ensemble.Seed" => return Ok(Variant::SeedEnsemble),
            _ => {}
        }
        let (head, tail) = s.split_once('.').ok_or_else(unknown)?;
        if head == "Local" {
            return Ok(Variant::Local(tail.parse()?));
        }
        let m = parse_method(head).ok_or_else(unknown)?;
        let v = match tail {
            "OC" => Variant::Oc(m),
            "Number" => Variant::Number(m),
            "Seed" => Variant::Seed(m),
            _ => return Err(unknown()),
        };
        if matches!(v, Variant::Oc(ClusterMethod::KmedoidsDtw) | Variant::Seed(ClusterMethod::KmedoidsDtw)) {
            return Err(Error::param(format!(
                "`{s}`: DTW clustering is only available with the Number ensemble"
            )));
        }
        Ok(v)
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

fn default_k_range() -> (usize, usize) {
    (2, 7)
}

fn default_elbow_range() -> (usize, usize) {
    (1, 7)
}

fn default_seed_iterations() -> usize {
    6
}

fn default_seed_count() -> usize {
    5
}

fn default_epsilon() -> f64 {
    DEFAULT_SMAPE_EPSILON
}

/// Ensemble-level settings shared by all variants of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    #[serde(default = "default_k_range")]
    pub k_range: (usize, usize),
    /// Candidate counts for the elbow search, capped at the series count.
    #[serde(default = "default_elbow_range")]
    pub elbow_range: (usize, usize),
    #[serde(default = "default_seed_iterations")]
    pub seed_iterations: usize,
    /// Forces the cluster count of the OC and Seed variants.
    #[serde(default)]
    pub k_override: Option<usize>,
    #[serde(default)]
    pub specialists: SpecialistSettings,
    /// Model seeds for the seed ensemble; derived from the master seed when
    /// absent.
    #[serde(default)]
    pub ensemble_seeds: Option<Vec<u64>>,
    #[serde(default = "default_seed_count")]
    pub ensemble_seed_count: usize,
    #[serde(default)]
    pub zero_safe: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            k_range: default_k_range(),
            elbow_range: default_elbow_range(),
            seed_iterations: default_seed_iterations(),
            k_override: None,
            specialists: SpecialistSettings::default(),
            ensemble_seeds: None,
            ensemble_seed_count: default_seed_count(),
            zero_safe: false,
            epsilon: default_epsilon(),
        }
    }
}

impl EnsembleConfig {
    pub fn ensemble_seeds(&self, seed: u64) -> Vec<u64> {
        self.ensemble_seeds.clone().unwrap_or_else(|| {
            (0..self.ensemble_seed_count as u64)
                .map(|i| derive_seed(seed, stream::MODEL, i))
                .collect()
        })
    }

    /// Most submodels any ensemble variant in `variants` trains.
    pub fn max_submodels(&self, variants: &[Variant]) -> usize {
        fn walk(v: &Variant, cfg: &EnsembleConfig) -> usize {
            match v {
                Variant::Number(_) => cfg.k_range.1,
                Variant::Oc(_) | Variant::Seed(_) => cfg.k_override.unwrap_or(cfg.elbow_range.1),
                Variant::Specialists => cfg.specialists.specialists,
                Variant::Combination(parts) => parts.iter().map(|p| walk(p, cfg)).max().unwrap_or(1),
                _ => 1,
            }
        }
        variants.iter().map(|v| walk(v, self)).max().unwrap_or(1).max(1)
    }
}

/// What a variant did, for the run manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub model_tag: String,
    pub model_seeds: Vec<u64>,
    pub cluster_seeds: Vec<u64>,
    /// Cluster count per iteration.
    pub ks: Vec<usize>,
    /// Cluster label of every series per iteration.
    pub labels: Vec<Vec<usize>>,
    pub fallback_rows: usize,
    pub specialist_error_history: Vec<f64>,
    pub specialist_chosen_round: Option<usize>,
    pub warnings: Vec<String>,
    pub components: Vec<RunInfo>,
}

pub struct VariantRun {
    pub matrix: ForecastMatrix,
    pub info: RunInfo,
}

fn clustered_info(tag: &str, run: &ClusteredRun, seed: u64) -> RunInfo {
    RunInfo {
        model_tag: tag.into(),
        model_seeds: alloc::vec![model_seed(seed)],
        cluster_seeds: run.assignments.iter().map(|a| a.seed).collect(),
        ks: run.assignments.iter().map(|a| a.k).collect(),
        labels: run.assignments.iter().map(|a| a.labels.clone()).collect(),
        fallback_rows: run.fallbacks,
        ..RunInfo::default()
    }
}

/// Per-series local models on the raw histories.
pub fn run_local<E: Executor>(
    ctx: &GfmContext<'_>,
    tag: &str,
    kind: LocalKind,
    exec: &E,
) -> Result<ForecastMatrix> {
    let panel = ctx.panel();
    let clamp = ctx.config().nonnegative;
    let rows: Vec<Vec<f64>> = exec
        .map(panel.len(), |i| {
            let m = fit_local(&panel.histories[i], kind, panel.period)?;
            let mut f = forecast_local(&m, panel.horizon);
            if clamp {
                f.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            Ok(f)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(ForecastMatrix::single(tag, panel.horizon, panel.ids.clone(), rows))
}

/// One full-panel model per seed.
pub fn run_seed_ensemble<E: Executor>(
    ctx: &GfmContext<'_>,
    tag: &str,
    seeds: &[u64],
    exec: &E,
) -> Result<ForecastMatrix> {
    if seeds.is_empty() {
        return Err(Error::param("the seed ensemble needs at least one seed"));
    }
    let mut m = ForecastMatrix::new(tag, ctx.panel().horizon, ctx.panel().ids.clone());
    for (it, &s) in seeds.iter().enumerate() {
        for (i, row) in ctx.baseline(s, exec)?.into_iter().enumerate() {
            m.push(i, row, super::RowOrigin { cluster: it, fallback: false });
        }
    }
    Ok(m)
}

/// Runs one variant on the context's panel. `seed` is the master seed.
pub fn run_variant<E: Executor>(
    variant: &Variant,
    ctx: &GfmContext<'_>,
    cfg: &EnsembleConfig,
    seed: u64,
    exec: &E,
) -> Result<VariantRun> {
    let tag = variant.to_string();
    let n = ctx.len();
    let elbow = |method| -> Result<usize> {
        match cfg.k_override {
            Some(k) => Ok(k),
            None => elbow_k(ctx.panel(), method, cfg.elbow_range.0..=cfg.elbow_range.1.min(n), seed, exec),
        }
    };
    let (matrix, info) = match variant {
        Variant::Baseline => {
            let s = model_seed(seed);
            let rows = ctx.baseline(s, exec)?;
            let info = RunInfo {
                model_tag: tag.clone(),
                model_seeds: alloc::vec![s],
                ..RunInfo::default()
            };
            (ForecastMatrix::single(tag, ctx.panel().horizon, ctx.panel().ids.clone(), rows), info)
        }
        Variant::Number(m) => {
            let (lo, hi) = cfg.k_range;
            let run = run_cluster_number(ctx, &tag, *m, lo..=hi, seed, exec)?;
            let info = clustered_info(&tag, &run, seed);
            (run.matrix, info)
        }
        Variant::Seed(m) => {
            let k = elbow(*m)?;
            let run = run_cluster_seed(ctx, &tag, *m, k, cfg.seed_iterations, seed, exec)?;
            let info = clustered_info(&tag, &run, seed);
            (run.matrix, info)
        }
        Variant::Oc(m) => {
            let k = elbow(*m)?;
            let run = run_cluster_seed(ctx, &tag, *m, k, 1, seed, exec)?;
            let info = clustered_info(&tag, &run, seed);
            (run.matrix, info)
        }
        Variant::Specialists => {
            let s = model_seed(seed);
            let run = run_specialists(
                ctx,
                &tag,
                &cfg.specialists,
                seed,
                s,
                cfg.zero_safe,
                cfg.epsilon,
                exec,
            )?;
            let mut warnings = Vec::new();
            if !run.state.reseeded.is_empty() {
                warnings.push(format!(
                    "{} empty specialist train sets were refilled with random samples",
                    run.state.reseeded.len()
                ));
            }
            let info = RunInfo {
                model_tag: tag.clone(),
                model_seeds: alloc::vec![s],
                specialist_error_history: run.state.avg_val_error_history.clone(),
                specialist_chosen_round: Some(run.state.chosen_round),
                warnings,
                ..RunInfo::default()
            };
            (run.matrix, info)
        }
        Variant::SeedEnsemble => {
            let seeds = cfg.ensemble_seeds(seed);
            let mut warnings = Vec::new();
            if !ctx.config().learner.is_stochastic() {
                warnings.push("the learner does not depend on its seed; every member equals Baseline".into());
            }
            let matrix = run_seed_ensemble(ctx, &tag, &seeds, exec)?;
            let info = RunInfo {
                model_tag: tag,
                model_seeds: seeds,
                warnings,
                ..RunInfo::default()
            };
            (matrix, info)
        }
        Variant::Local(kind) => {
            let matrix = run_local(ctx, &tag, *kind, exec)?;
            let info = RunInfo {
                model_tag: tag,
                ..RunInfo::default()
            };
            (matrix, info)
        }
        Variant::Combination(parts) => {
            if parts.len() < 2 {
                return Err(Error::param("a combination needs at least two models"));
            }
            let runs = parts
                .iter()
                .map(|p| run_variant(p, ctx, cfg, seed, exec))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&ForecastMatrix> = runs.iter().map(|r| &r.matrix).collect();
            let matrix = combine_forecasts(tag.clone(), &refs)?;
            let info = RunInfo {
                model_tag: tag,
                components: runs.into_iter().map(|r| r.info).collect(),
                ..RunInfo::default()
            };
            (matrix, info)
        }
    };
    matrix.validate()?;
    Ok(VariantRun { matrix, info })
}
