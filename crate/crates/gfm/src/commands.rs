//! The single-step subcommands: features, cluster, evaluate, stats, synth.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gfm_core::clustering::ClusterMethod;
use gfm_core::ensembles::{elbow_k, ClusterInputs, ForecastMatrix, Panel};
use gfm_core::evaluation::stat_test_report;
use gfm_core::exec::Executor;
use gfm_core::features::{standardize, FeatureMatrix};
use gfm_core::rng::{derive_seed, stream};
use gfm_core::synth::{generate_synthetic, SynthSpec};

use crate::config::ExperimentConfig;
use crate::io::{read_forecasts, write_dataset, write_json};
use crate::run::{evaluate, load_configured, write_metrics, write_stats};

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

fn training_panel(cfg: &ExperimentConfig) -> Result<Panel> {
    let loaded = load_configured(cfg)?;
    Ok(Panel::for_test(&loaded.dataset)?)
}

/// Features of the training portions, one row per series.
pub fn features(cfg: &ExperimentConfig, standardized: bool, out: &Path) -> Result<FeatureMatrix> {
    let panel = training_panel(cfg)?;
    let mut fm = FeatureMatrix::from_series(&panel.series(), panel.period)?;
    if standardized {
        fm = standardize(&fm)?;
    }
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("features.csv"))?;
    let mut header = vec!["series_id"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for (id, row) in fm.ids.iter().zip(&fm.rows) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(fm)
}

/// Clusters the training portions with `k`, or the elbow choice when absent.
/// Returns the labels and the k used.
pub fn cluster<E: Executor>(
    cfg: &ExperimentConfig,
    method: ClusterMethod,
    k: Option<usize>,
    out: &Path,
    exec: &E,
) -> Result<(Vec<usize>, usize)> {
    let panel = training_panel(cfg)?;
    let k = match k {
        Some(k) => k,
        None => {
            let (lo, hi) = cfg.ensemble.elbow_range;
            elbow_k(&panel, method, lo..=hi, cfg.seed, exec).context("choosing k (pass --k for kmedoids_dtw)")?
        }
    };
    let seed = derive_seed(cfg.seed, stream::CLUSTER, 0);
    let assignment = ClusterInputs::prepare(&panel, method, exec)?.cluster(method, k, seed)?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
    w.write_record(["series_id", "cluster", "method", "k", "seed"])?;
    for (id, l) in panel.ids.iter().zip(&assignment.labels) {
        w.write_record([id.as_str(), &l.to_string(), method.as_str(), &k.to_string(), &seed.to_string()])?;
    }
    w.flush()?;
    Ok((assignment.labels, k))
}

/// Scores a forecasts file against the test portions of the configured
/// dataset. Every model must forecast every series.
pub fn evaluate_file(cfg: &ExperimentConfig, forecasts: &Path, out: &Path) -> Result<()> {
    let loaded = load_configured(cfg)?;
    let ds = &loaded.dataset;
    let table = read_forecasts(forecasts)?;
    let ids: Vec<String> = ds.series().iter().map(|s| s.id.clone()).collect();
    let position: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut matrices: Vec<(ForecastMatrix, Vec<bool>)> = Vec::new();
    for (tag, id, values) in table.rows {
        let &i = position
            .get(id.as_str())
            .ok_or_else(|| anyhow!("forecast for unknown series `{id}`"))?;
        if values.len() != ds.horizon() {
            bail!("`{tag}` forecasts {} steps for `{id}`, horizon is {}", values.len(), ds.horizon());
        }
        let slot = match matrices.iter().position(|(m, _)| m.model_tag == tag) {
            Some(s) => s,
            None => {
                matrices.push((ForecastMatrix::new(tag, ds.horizon(), ids.clone()), vec![false; ids.len()]));
                matrices.len() - 1
            }
        };
        let (m, seen) = &mut matrices[slot];
        m.rows[i] = vec![values];
        seen[i] = true;
    }
    for (m, seen) in &matrices {
        if let Some(i) = seen.iter().position(|s| !s) {
            bail!("`{}` has no forecast for `{}`", m.model_tag, ids[i]);
        }
    }
    let matrices: Vec<ForecastMatrix> = matrices.into_iter().map(|(m, _)| m).collect();
    let (metrics, stats) = evaluate(ds, &matrices, &cfg.ensemble)?;
    std::fs::create_dir_all(out)?;
    let tags: Vec<String> = matrices.iter().map(|m| m.model_tag.clone()).collect();
    write_metrics(out, &tags, &metrics)?;
    write_stats(out, stats.as_ref())
}

/// Rank tests over a long `dataset,model,mean_smape` table; datasets are
/// the blocks and every model needs a score on every dataset.
pub fn stats_file(input: &Path, out: &Path) -> Result<()> {
    let mut rdr = csv::Reader::from_path(input).with_context(|| format!("opening {}", input.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["dataset", "model", "mean_smape"] {
        bail!("row 1: expected header `dataset,model,mean_smape`");
    }
    let mut datasets: Vec<String> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    let mut scores: HashMap<(usize, usize), f64> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| anyhow!("row {row}: {e}"))?;
        let d = index_of(&mut datasets, &rec[0]);
        let m = index_of(&mut models, &rec[1]);
        let v: f64 = rec[2]
            .parse()
            .map_err(|_| anyhow!("row {row}: `{}` is not a number", &rec[2]))?;
        if scores.insert((d, m), v).is_some() {
            bail!("row {row}: duplicate score for `{}` on `{}`", &rec[1], &rec[0]);
        }
    }
    let errors = datasets
        .iter()
        .enumerate()
        .map(|(d, name)| {
            models
                .iter()
                .enumerate()
                .map(|(m, model)| {
                    scores
                        .get(&(d, m))
                        .copied()
                        .ok_or_else(|| anyhow!("`{model}` has no score on `{name}`"))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let report = stat_test_report(&models, &errors)?;
    std::fs::create_dir_all(out)?;
    write_stats(out, Some(&report))
}

fn index_of(names: &mut Vec<String>, name: &str) -> usize {
    match names.iter().position(|n| n == name) {
        Some(i) => i,
        None => {
            names.push(name.to_string());
            names.len() - 1
        }
    }
}

/// Writes `data.csv` (with the family as the group column) and
/// `labels.csv`.
pub fn synth(spec: &SynthSpec, out: &Path) -> Result<()> {
    let s = generate_synthetic(spec)?;
    std::fs::create_dir_all(out)?;
    let groups: Vec<String> = s.labels.iter().map(|l| format!("family{l}")).collect();
    write_dataset(&out.join("data.csv"), &s.dataset, Some(&groups))?;
    let mut w = csv::Writer::from_path(out.join("labels.csv"))?;
    w.write_record(["series_id", "family"])?;
    for (ts, l) in s.dataset.series().iter().zip(&s.labels) {
        w.write_record([ts.id.as_str(), &l.to_string()])?;
    }
    w.flush()?;
    write_json(&out.join("spec.json"), spec)
}
