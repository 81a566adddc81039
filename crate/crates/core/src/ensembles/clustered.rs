use alloc::vec::Vec;
use core::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::gfm::{GfmContext, Panel};
use super::matrix::{ForecastMatrix, RowOrigin};
use crate::clustering::{
    dtw_matrix, elbow_optimal_k, kmeans, pam, random_partition, ClusterAssignment, ClusterMethod,
    KmeansInit,
};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::features::{standardize, FeatureMatrix};
use crate::learners::GlobalModel;
use crate::preprocess::mean_normalize;
use crate::rng::{derive_seed, stream};

/// Standardized features of every history.
pub fn feature_rows(panel: &Panel) -> Result<Vec<Vec<f64>>> {
    let fm = FeatureMatrix::from_series(&panel.series(), panel.period)?;
    Ok(standardize(&fm)?.rows)
}

/// What a clustering method needs, computed once and reused across k and
/// seeds.
pub enum ClusterInputs {
    Features(Vec<Vec<f64>>),
    /// Pairwise DTW distances between mean-normalised histories.
    Distances(Vec<Vec<f64>>),
    Count(usize),
}

impl ClusterInputs {
    pub fn prepare<E: Executor>(panel: &Panel, method: ClusterMethod, exec: &E) -> Result<Self> {
        Ok(match method {
            ClusterMethod::Kmeans | ClusterMethod::Kmeanspp => {
                ClusterInputs::Features(feature_rows(panel)?)
            }
            ClusterMethod::KmedoidsDtw => {
                let scaled: Vec<Vec<f64>> =
                    panel.histories.iter().map(|x| mean_normalize(x).0).collect();
                let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
                ClusterInputs::Distances(dtw_matrix(&refs, exec)?)
            }
            ClusterMethod::Random => ClusterInputs::Count(panel.len()),
        })
    }

    pub fn cluster(&self, method: ClusterMethod, k: usize, seed: u64) -> Result<ClusterAssignment> {
        match (self, method) {
            (ClusterInputs::Features(rows), ClusterMethod::Kmeans) => {
                kmeans(rows, k, seed, KmeansInit::Random)
            }
            (ClusterInputs::Features(rows), ClusterMethod::Kmeanspp) => {
                kmeans(rows, k, seed, KmeansInit::PlusPlus)
            }
            (ClusterInputs::Distances(d), ClusterMethod::KmedoidsDtw) => pam(d, k, seed).map(|r| r.0),
            (ClusterInputs::Count(n), ClusterMethod::Random) => random_partition(*n, k, seed),
            _ => Err(Error::param("clustering inputs do not match the method")),
        }
    }
}

/// Elbow-optimal cluster count on the standardized features. k-means++
/// seeding is used for the k-means++ method, random seeding otherwise.
pub fn elbow_k<E: Executor>(
    panel: &Panel,
    method: ClusterMethod,
    range: RangeInclusive<usize>,
    seed: u64,
    exec: &E,
) -> Result<usize> {
    if method == ClusterMethod::KmedoidsDtw {
        return Err(Error::param("the elbow search runs on features; DTW has no fixed-k variant"));
    }
    let rows = feature_rows(panel)?;
    let hi = (*range.end()).min(rows.len());
    let init = if method == ClusterMethod::Kmeanspp {
        KmeansInit::PlusPlus
    } else {
        KmeansInit::Random
    };
    elbow_optimal_k(
        &rows,
        *range.start()..=hi,
        derive_seed(seed, stream::ELBOW, 0),
        init,
        exec,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredRun {
    pub matrix: ForecastMatrix,
    pub assignments: Vec<ClusterAssignment>,
    /// Rows produced by the full-data model for untrainable clusters.
    pub fallbacks: usize,
}

/// One iteration row per partition: a model per cluster, each member
/// forecast by its cluster's model. Clusters too small to train on use the
/// full-data model, fitted only when needed.
pub fn run_partitions<E: Executor>(
    ctx: &GfmContext<'_>,
    tag: &str,
    assignments: &[ClusterAssignment],
    model_seed: u64,
    exec: &E,
) -> Result<ClusteredRun> {
    let n = ctx.len();
    let mut baseline: Option<GlobalModel> = None;
    let mut fallbacks = 0;
    let mut matrix = ForecastMatrix::new(tag, ctx.panel().horizon, ctx.panel().ids.clone());
    for asg in assignments {
        if !asg.is_partition(n) {
            return Err(Error::param("assignment does not cover the panel"));
        }
        let members = asg.members();
        let trainable: Vec<bool> = members.iter().map(|m| ctx.trainable(m)).collect();
        if baseline.is_none() && members.iter().zip(&trainable).any(|(m, t)| !m.is_empty() && !t) {
            baseline = Some(ctx.fit(&ctx.all(), model_seed)?);
        }
        let models: Vec<Option<GlobalModel>> = exec
            .map(asg.k, |c| {
                if trainable[c] {
                    ctx.fit(&members[c], model_seed).map(Some)
                } else {
                    Ok(None)
                }
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = exec
            .map(n, |i| {
                let model = models[asg.labels[i]]
                    .as_ref()
                    .or(baseline.as_ref())
                    .expect("fallback model exists for untrainable clusters");
                ctx.forecast(model, i)
            })
            .into_iter()
            .collect::<Result<_>>()?;
        for (i, row) in rows.into_iter().enumerate() {
            let fallback = models[asg.labels[i]].is_none();
            fallbacks += usize::from(fallback);
            matrix.push(
                i,
                row,
                RowOrigin {
                    cluster: asg.labels[i],
                    fallback,
                },
            );
        }
    }
    Ok(ClusteredRun {
        matrix,
        assignments: assignments.to_vec(),
        fallbacks,
    })
}

/// Re-clusters at every k in the range under one shared seed and keeps one
/// row per k.
pub fn run_cluster_number<E: Executor>(
    ctx: &GfmContext<'_>,
    tag: &str,
    method: ClusterMethod,
    k_range: RangeInclusive<usize>,
    seed: u64,
    exec: &E,
) -> Result<ClusteredRun> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || lo > hi || hi > ctx.len() {
        return Err(Error::param(alloc::format!(
            "cluster range {lo}..={hi} must lie within 1..={}",
            ctx.len()
        )));
    }
    let inputs = ClusterInputs::prepare(ctx.panel(), method, exec)?;
    let cluster_seed = derive_seed(seed, stream::CLUSTER, 0);
    let ks: Vec<usize> = k_range.collect();
    let assignments: Vec<ClusterAssignment> = exec
        .map(ks.len(), |i| inputs.cluster(method, ks[i], cluster_seed))
        .into_iter()
        .collect::<Result<_>>()?;
    run_partitions(ctx, tag, &assignments, model_seed(seed), exec)
}

/// Clusters at a fixed k under a fresh seed per iteration.
pub fn run_cluster_seed<E: Executor>(
    ctx: &GfmContext<'_>,
    tag: &str,
    method: ClusterMethod,
    k: usize,
    iterations: usize,
    seed: u64,
    exec: &E,
) -> Result<ClusteredRun> {
    if iterations == 0 {
        return Err(Error::param("at least one iteration is required"));
    }
    let inputs = ClusterInputs::prepare(ctx.panel(), method, exec)?;
    let assignments: Vec<ClusterAssignment> = exec
        .map(iterations, |it| {
            inputs.cluster(method, k, derive_seed(seed, stream::CLUSTER_SEED_ITER, it as u64))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    run_partitions(ctx, tag, &assignments, model_seed(seed), exec)
}

/// A single clustering and one model per cluster: the first iteration of the
/// seed variant.
pub fn run_cluster_oc<E: Executor>(
    ctx: &GfmContext<'_>,
    tag: &str,
    method: ClusterMethod,
    k: usize,
    seed: u64,
    exec: &E,
) -> Result<ClusteredRun> {
    run_cluster_seed(ctx, tag, method, k, 1, seed, exec)
}

/// Seed shared by every submodel of a run.
pub fn model_seed(seed: u64) -> u64 {
    derive_seed(seed, stream::MODEL, 0)
}
