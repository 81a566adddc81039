use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gfm_core::ensembles::{EnsembleConfig, GfmConfig, LearnerSpec, Variant};
use gfm_core::preprocess::PipelineConfig;
use gfm_core::series::Imputation;
use gfm_core::synth::SynthSpec;
use gfm_core::tuning::{ParamRange, SearchSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetConfig {
    Csv {
        /// Relative paths resolve against the config file's directory.
        path: PathBuf,
        horizon: usize,
        #[serde(default = "one")]
        seasonal_period: usize,
        #[serde(default)]
        imputation: Imputation,
        /// Train a separate set of models per value of the third CSV column.
        #[serde(default)]
        group_by: bool,
    },
    Synthetic(SynthSpec),
}

fn one() -> usize {
    1
}

fn default_budget() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Empty means the learner's default space.
    #[serde(default)]
    pub space: SearchSpace,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            budget: default_budget(),
            space: SearchSpace::new(),
        }
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Baseline]
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub nonnegative: bool,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tuning: TuningConfig,
}

impl ExperimentConfig {
    /// Reads a config or a run manifest (whose top level is a config).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let DatasetConfig::Csv { path, .. } = &mut self.dataset {
            if path.is_relative() {
                let joined = base.join(&*path);
                *path = joined.canonicalize().unwrap_or(joined);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            bail!("config lists no variants");
        }
        let (lo, hi) = self.ensemble.k_range;
        if lo == 0 || lo > hi {
            bail!("k_range {lo}..={hi} is empty");
        }
        let (lo, hi) = self.ensemble.elbow_range;
        if lo == 0 || lo > hi {
            bail!("elbow_range {lo}..={hi} is empty");
        }
        if self.tuning.enabled && self.tuning.budget == 0 {
            bail!("tuning budget must be at least 1");
        }
        let mut seen = std::collections::HashSet::new();
        for v in &self.variants {
            if !seen.insert(v.to_string()) {
                bail!("variant `{v}` is listed twice");
            }
        }
        Ok(())
    }

    pub fn gfm(&self) -> GfmConfig {
        GfmConfig {
            learner: self.learner,
            pipeline: self.pipeline,
            window: self.window,
            nonnegative: self.nonnegative,
        }
    }

    /// The configured space, or hidden nodes 1-12 and decay 0-0.1 for the
    /// network, plus specialist counts 2-7 when that ensemble is requested.
    pub fn search_space(&self) -> SearchSpace {
        if !self.tuning.space.is_empty() {
            return self.tuning.space.clone();
        }
        let mut space = SearchSpace::new();
        if let LearnerSpec::Ffnn(_) = self.learner {
            space.insert("hidden".into(), ParamRange::Int { lo: 1, hi: 12 });
            space.insert("decay".into(), ParamRange::Real { lo: 0.0, hi: 0.1 });
        }
        if self.variants.iter().any(mentions_specialists) {
            space.insert("specialists".into(), ParamRange::Int { lo: 2, hi: 7 });
        }
        space
    }
}

fn mentions_specialists(v: &Variant) -> bool {
    match v {
        Variant::Specialists => true,
        Variant::Combination(parts) => parts.iter().any(mentions_specialists),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"source": "csv", "path": "d.csv", "horizon": 6}}"#,
        )
        .unwrap();
        assert_eq!(cfg.variants, vec![Variant::Baseline]);
        assert_eq!(cfg.ensemble.k_range, (2, 7));
        assert_eq!(cfg.ensemble.seed_iterations, 6);
        assert_eq!(cfg.learner, LearnerSpec::Pr { l2: 0.0 });
        cfg.validate().unwrap();
    }

    #[test]
    fn full_config_parses() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
                "name": "x",
                "dataset": {"source": "synthetic", "families": [{"kind": "ar", "intercept": 1, "coefficients": [0.5]}],
                            "count_per_family": 4, "length": 40, "noise_sd": 0.1, "seed": 1, "horizon": 4},
                "learner": {"kind": "ffnn", "hidden": 3, "decay": 0.01, "epochs": 100, "step": 0.05, "seed": 0},
                "pipeline": {"log": true, "seasonality": {"fourier": {"terms": 2}}},
                "variants": ["Baseline", "Kmeans.Number", "Baseline+Local.ses"],
                "ensemble": {"specialists": {"specialists": 3, "top_n": 2, "max_rounds": 5, "final_round": "last"}},
                "tuning": {"enabled": true, "budget": 3, "space": {"hidden": {"type": "int", "lo": 1, "hi": 4}}}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.variants.len(), 3);
        assert!(cfg.pipeline.log);
        assert_eq!(cfg.search_space().len(), 1);
    }

    #[test]
    fn rejects_duplicates_and_bad_variants() {
        let dup: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"source": "csv", "path": "d.csv", "horizon": 6}, "variants": ["Baseline", "Baseline"]}"#,
        )
        .unwrap();
        assert!(dup.validate().is_err());
        let bad = serde_json::from_str::<ExperimentConfig>(
            r#"{"dataset": {"source": "csv", "path": "d.csv", "horizon": 6}, "variants": ["Nope"]}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn default_space_follows_learner_and_variants() {
        let mut cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"source": "csv", "path": "d.csv", "horizon": 6}, "variants": ["Ensemble.Specialists"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.search_space().keys().collect::<Vec<_>>(), vec!["specialists"]);
        cfg.learner = LearnerSpec::Ffnn(Default::default());
        assert_eq!(cfg.search_space().len(), 3);
    }
}
