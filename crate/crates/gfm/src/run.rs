//! The end-to-end experiment: load, split, tune, run every variant, evaluate
//! against the test portions and persist the artifacts.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use gfm_core::ensembles::{
    run_variant, EnsembleConfig, ForecastMatrix, GfmConfig, GfmContext, Panel, RunInfo,
};
use gfm_core::evaluation::{evaluate_forecasts, stat_test_report, MetricResult, StatTestReport};
use gfm_core::exec::Executor;
use gfm_core::rng::{derive_seed, stream};
use gfm_core::synth::generate_synthetic;
use gfm_core::tuning::{apply_point, tune_hyperparameters, TuningResult};
use gfm_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::io::{horizon_header, load_dataset, write_json, LoadedDataset};

/// Where this implementation knowingly differs from the method it follows.
pub const DEVIATIONS: &[&str] = &[
    "seasonal decomposition is classical (moving-average) rather than STL",
    "local models are simple, Holt and additive Holt-Winters exponential smoothing plus seasonal naive, \
     with grid-searched smoothing parameters, instead of automatic ETS/ARIMA selection",
    "hyperparameters are chosen by seeded random search (exhaustive for small discrete spaces) instead of SMAC",
    "the feed-forward network is trained by full-batch gradient descent with a fixed step instead of BFGS",
    "clustering uses features or distances of the training portions only",
    "the specialists ensemble forecasts with the last round before the validation error grew \
     unless final_round is set to last",
    "clusters too small to train on fall back to the model trained on all series",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group: Option<String>,
    pub seed: u64,
    pub series: Vec<String>,
    pub tuning: Option<TuningResult>,
    pub model: GfmConfig,
    pub ensemble: EnsembleConfig,
    pub variants: Vec<RunInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub library_version: String,
    pub workers: usize,
    pub dataset: String,
    pub series_count: usize,
    pub horizon: usize,
    pub groups: Vec<GroupRecord>,
    /// Seconds per stage.
    pub wall_times: BTreeMap<String, f64>,
    pub deviations: Vec<String>,
    pub warnings: Vec<String>,
}

/// The resolved config at the top level, so a manifest can be passed back
/// as `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub config: ExperimentConfig,
    pub run: RunRecord,
}

pub struct RunOutputs {
    pub matrices: Vec<ForecastMatrix>,
    pub metrics: Vec<MetricResult>,
    pub stats: Option<StatTestReport>,
    pub manifest: RunManifest,
}

pub fn load_configured(cfg: &ExperimentConfig) -> Result<LoadedDataset> {
    match &cfg.dataset {
        DatasetConfig::Csv {
            path,
            horizon,
            seasonal_period,
            imputation,
            ..
        } => load_dataset(path, *horizon, *seasonal_period, *imputation),
        DatasetConfig::Synthetic(spec) => {
            let s = generate_synthetic(spec)?;
            let groups = s.labels.iter().map(|l| Some(format!("family{l}"))).collect();
            Ok(LoadedDataset {
                dataset: s.dataset,
                groups,
            })
        }
    }
}

fn group_indices(cfg: &ExperimentConfig, loaded: &LoadedDataset) -> Result<Vec<(Option<String>, Vec<usize>)>> {
    let grouped = matches!(cfg.dataset, DatasetConfig::Csv { group_by: true, .. });
    if !grouped {
        return Ok(vec![(None, (0..loaded.dataset.len()).collect())]);
    }
    let mut out: Vec<(Option<String>, Vec<usize>)> = Vec::new();
    for (i, g) in loaded.groups.iter().enumerate() {
        let Some(g) = g else {
            bail!(
                "group_by is set but series `{}` has no group column",
                loaded.dataset.series()[i].id
            );
        };
        match out.iter_mut().find(|(name, _)| name.as_deref() == Some(g)) {
            Some((_, idx)) => idx.push(i),
            None => out.push((Some(g.clone()), vec![i])),
        }
    }
    Ok(out)
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().with_context(|| format!("stage `{stage}`"))?;
        *self.0.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
        Ok(out)
    }
}

pub fn run_experiment<E: Executor>(cfg: &ExperimentConfig, workers: usize, exec: &E) -> Result<RunOutputs> {
    cfg.validate()?;
    let mut timer = Timer(BTreeMap::new());
    let mut warnings = Vec::new();
    let loaded = timer.time("load", || load_configured(cfg))?;
    let ds = &loaded.dataset;
    let groups = group_indices(cfg, &loaded)?;
    let h = ds.horizon();
    let ids: Vec<String> = ds.series().iter().map(|s| s.id.clone()).collect();

    let mut merged: Vec<ForecastMatrix> = cfg
        .variants
        .iter()
        .map(|v| ForecastMatrix::new(v.to_string(), h, ids.clone()))
        .collect();
    let mut records = Vec::new();
    for (g, (name, idx)) in groups.iter().enumerate() {
        let seed = if name.is_some() {
            derive_seed(cfg.seed, stream::GROUP, g as u64)
        } else {
            cfg.seed
        };
        let sub: Dataset = ds.subset(name.clone().unwrap_or_else(|| ds.name().to_string()), idx)?;
        let panel = Panel::for_test(&sub)?;
        let mut gfm = cfg.gfm();
        let mut ens = cfg.ensemble.clone();

        let mut tuning = None;
        if cfg.tuning.enabled {
            let space = cfg.search_space();
            if space.is_empty() {
                warnings.push("tuning is enabled but the search space is empty".to_string());
            } else {
                let subset = panel.len().div_ceil(ens.max_submodels(&cfg.variants));
                let result = timer.time("tune", || {
                    Ok(tune_hyperparameters(&panel, &gfm, &ens, &space, cfg.tuning.budget, subset, seed, exec)?)
                })?;
                apply_point(&result.chosen, &mut gfm, &mut ens)?;
                ens.specialists.top_n = ens.specialists.top_n.min(ens.specialists.specialists);
                tuning = Some(result);
            }
        }

        let ctx = GfmContext::new(&panel, &gfm).context("stage `preprocess`")?;
        let mut infos = Vec::new();
        for (v, variant) in cfg.variants.iter().enumerate() {
            let run = timer.time(&format!("variant {variant}"), || Ok(run_variant(variant, &ctx, &ens, seed, exec)?))?;
            for w in &run.info.warnings {
                warnings.push(format!("{variant}: {w}"));
            }
            for (j, &i) in idx.iter().enumerate() {
                merged[v].rows[i] = run.matrix.rows[j].clone();
                merged[v].origins[i] = run.matrix.origins[j].clone();
            }
            infos.push(run.info);
        }
        records.push(GroupRecord {
            group: name.clone(),
            seed,
            series: panel.ids.clone(),
            tuning,
            model: gfm,
            ensemble: ens,
            variants: infos,
        });
    }

    let (metrics, stats) = timer.time("evaluate", || evaluate(ds, &merged, &cfg.ensemble))?;
    for (m, mr) in merged.iter().zip(&metrics) {
        if mr.mase_excluded > 0 {
            warnings.push(format!(
                "{}: {} series have an undefined MASE and are left out of its aggregates",
                m.model_tag, mr.mase_excluded
            ));
        }
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        run: RunRecord {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            dataset: ds.name().to_string(),
            series_count: ds.len(),
            horizon: h,
            groups: records,
            wall_times: timer.0,
            deviations: DEVIATIONS.iter().map(|s| s.to_string()).collect(),
            warnings,
        },
    };
    Ok(RunOutputs {
        matrices: merged,
        metrics,
        stats,
        manifest,
    })
}

/// Scores every matrix against the test portions, plus the rank tests over
/// series when there are at least two models.
pub fn evaluate(
    ds: &Dataset,
    matrices: &[ForecastMatrix],
    ens: &EnsembleConfig,
) -> Result<(Vec<MetricResult>, Option<StatTestReport>)> {
    let h = ds.horizon();
    let ids: Vec<&str> = ds.series().iter().map(|s| s.id.as_str()).collect();
    let actuals: Vec<&[f64]> = ds.series().iter().map(|s| &s.values[s.len() - h..]).collect();
    let trains: Vec<&[f64]> = ds.series().iter().map(|s| &s.values[..s.len() - h]).collect();
    let periods: Vec<usize> = ds.series().iter().map(|s| s.seasonal_period).collect();
    let metrics = matrices
        .iter()
        .map(|m| {
            evaluate_forecasts(&ids, &m.averaged(), &actuals, &trains, &periods, ens.zero_safe, ens.epsilon)
                .with_context(|| format!("evaluating {}", m.model_tag))
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = if matrices.len() >= 2 && ds.len() >= 2 {
        let models: Vec<String> = matrices.iter().map(|m| m.model_tag.clone()).collect();
        let errors: Vec<Vec<f64>> = (0..ds.len())
            .map(|i| metrics.iter().map(|m| m.per_series[i].smape).collect())
            .collect();
        Some(stat_test_report(&models, &errors)?)
    } else {
        None
    };
    Ok((metrics, stats))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_forecasts(dir: &Path, matrices: &[ForecastMatrix]) -> Result<()> {
    let h = matrices.first().map_or(0, |m| m.horizon);
    let mut per = csv_writer(&dir.join("forecasts.csv"))?;
    per.write_record(horizon_header(&["series_id", "model_tag", "iteration"], h))?;
    let mut fin = csv_writer(&dir.join("final_forecasts.csv"))?;
    fin.write_record(horizon_header(&["series_id", "model_tag"], h))?;
    for m in matrices {
        for (i, id) in m.series_ids.iter().enumerate() {
            for (it, row) in m.rows[i].iter().enumerate() {
                let mut rec = vec![id.clone(), m.model_tag.clone(), it.to_string()];
                rec.extend(row.iter().map(f64::to_string));
                per.write_record(&rec)?;
            }
        }
        for (id, row) in m.series_ids.iter().zip(m.averaged()) {
            let mut rec = vec![id.clone(), m.model_tag.clone()];
            rec.extend(row.iter().map(f64::to_string));
            fin.write_record(&rec)?;
        }
    }
    per.flush()?;
    fin.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Aggregate<'a> {
    model_tag: &'a str,
    mean_smape: f64,
    median_smape: f64,
    mean_mase: Option<f64>,
    median_mase: Option<f64>,
    mase_excluded: usize,
}

pub fn write_metrics(dir: &Path, tags: &[String], metrics: &[MetricResult]) -> Result<()> {
    let mut w = csv_writer(&dir.join("metrics.csv"))?;
    w.write_record(["series_id", "smape", "mase", "model_tag"])?;
    for (tag, m) in tags.iter().zip(metrics) {
        for s in &m.per_series {
            let mase = s.mase.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([s.series_id.as_str(), &s.smape.to_string(), &mase, tag])?;
        }
    }
    w.flush()?;
    let aggregates: Vec<Aggregate> = tags
        .iter()
        .zip(metrics)
        .map(|(tag, m)| Aggregate {
            model_tag: tag,
            mean_smape: m.mean_smape,
            median_smape: m.median_smape,
            mean_mase: m.mean_mase,
            median_mase: m.median_mase,
            mase_excluded: m.mase_excluded,
        })
        .collect();
    write_json(&dir.join("aggregates.json"), &aggregates)
}

/// `ranks.csv` and `pairwise_p.csv`; header-only when there is no report.
pub fn write_stats(dir: &Path, report: Option<&StatTestReport>) -> Result<()> {
    let mut ranks = csv_writer(&dir.join("ranks.csv"))?;
    ranks.write_record(["model_tag", "average_rank"])?;
    let mut pairs = csv_writer(&dir.join("pairwise_p.csv"))?;
    pairs.write_record(["model_a", "model_b", "p_raw", "p_holm", "method"])?;
    if let Some(r) = report {
        for (m, rank) in r.models.iter().zip(&r.average_ranks) {
            ranks.write_record([m.as_str(), &rank.to_string()])?;
        }
        for p in &r.pairwise {
            let method = serde_json::to_value(p.method)?;
            pairs.write_record([
                p.first.as_str(),
                p.second.as_str(),
                &p.p_raw.to_string(),
                &p.p_holm.to_string(),
                method.as_str().unwrap_or_default(),
            ])?;
        }
        write_json(&dir.join("stats.json"), r)?;
    }
    ranks.flush()?;
    pairs.flush()?;
    Ok(())
}

pub fn write_outputs(dir: &Path, out: &RunOutputs) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_forecasts(dir, &out.matrices)?;
    let tags: Vec<String> = out.matrices.iter().map(|m| m.model_tag.clone()).collect();
    write_metrics(dir, &tags, &out.metrics)?;
    write_stats(dir, out.stats.as_ref())?;
    write_json(&dir.join("manifest.json"), &out.manifest)
}
