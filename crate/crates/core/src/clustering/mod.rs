//! Clustering of series collections: Lloyd's k-means with random or k-means++
//! seeding, PAM k-medoids over DTW distances, seeded random partitions, and
//! elbow-based choice of the cluster count.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

mod elbow;
mod kmeans;
mod kmedoids;

pub use elbow::{elbow_from_profile, elbow_optimal_k, wcss_profile, ELBOW_RESTARTS};
pub use kmeans::{kmeans, kmeans_traced, KmeansInit, KmeansTrace, MAX_LLOYD_ITERATIONS};
pub use kmedoids::{
    dtw_distance, dtw_matrix, kmedoids_dtw, pam, PamTrace, MAX_PAM_SWAPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans,
    Kmeanspp,
    KmedoidsDtw,
    Random,
}

impl ClusterMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClusterMethod::Kmeans => "kmeans",
            ClusterMethod::Kmeanspp => "kmeanspp",
            ClusterMethod::KmedoidsDtw => "kmedoids_dtw",
            ClusterMethod::Random => "random",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kmeans" => ClusterMethod::Kmeans,
            "kmeanspp" => ClusterMethod::Kmeanspp,
            "kmedoids_dtw" => ClusterMethod::KmedoidsDtw,
            "random" => ClusterMethod::Random,
            other => return Err(Error::param(alloc::format!("unknown cluster method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub method: ClusterMethod,
    /// Within-cluster sum of squared distances for k-means, total distance to
    /// the medoid for k-medoids, zero for random partitions.
    pub inertia: f64,
    /// Cluster indices left without members.
    pub collapsed: Vec<usize>,
}

impl ClusterAssignment {
    pub(crate) fn new(labels: Vec<usize>, k: usize, seed: u64, method: ClusterMethod, inertia: f64) -> Self {
        let sizes = cluster_sizes(&labels, k);
        let collapsed = (0..k).filter(|&c| sizes[c] == 0).collect();
        Self {
            labels,
            k,
            seed,
            method,
            inertia,
            collapsed,
        }
    }

    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Every item carries exactly one label in `0..k`.
    pub fn is_partition(&self, n: usize) -> bool {
        self.labels.len() == n && self.labels.iter().all(|&l| l < self.k)
    }
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::param(alloc::format!(
            "cluster count {k} must lie in 1..={n}"
        )))
    } else {
        Ok(())
    }
}

/// Uniform seeded labels. Empty clusters are filled by moving one member of
/// the largest cluster (its highest index) until none remain.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Result<ClusterAssignment> {
    check_k(k, n)?;
    let mut rng = seeded(seed);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    loop {
        let sizes = cluster_sizes(&labels, k);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            break;
        };
        let largest = (0..k).max_by_key(|&c| (sizes[c], core::cmp::Reverse(c))).unwrap();
        let mover = labels.iter().rposition(|&l| l == largest).unwrap();
        labels[mover] = empty;
    }
    Ok(ClusterAssignment::new(labels, k, seed, ClusterMethod::Random, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_single_cluster() {
        let a = random_partition(7, 1, 3).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn random_is_deterministic() {
        assert_eq!(random_partition(30, 4, 9).unwrap(), random_partition(30, 4, 9).unwrap());
    }

    #[test]
    fn random_k_equals_n_gives_singletons() {
        for seed in 0..20 {
            let a = random_partition(6, 6, seed).unwrap();
            let mut l = a.labels.clone();
            l.sort();
            assert_eq!(l, (0..6).collect::<Vec<_>>());
            assert!(a.collapsed.is_empty());
        }
    }

    #[test]
    fn random_rejects_k_above_n() {
        assert!(random_partition(3, 4, 0).is_err());
        assert!(random_partition(3, 0, 0).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [ClusterMethod::Kmeans, ClusterMethod::Kmeanspp, ClusterMethod::KmedoidsDtw, ClusterMethod::Random] {
            assert_eq!(m.as_str().parse::<ClusterMethod>().unwrap(), m);
        }
    }
}
