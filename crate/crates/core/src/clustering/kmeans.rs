use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_k, ClusterAssignment, ClusterMethod};
use crate::error::{Error, Result};
use crate::rng::{seeded, SeededRng};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmeansInit {
    Random,
    PlusPlus,
}

/// Inertia after each assignment step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KmeansTrace {
    pub inertia: Vec<f64>,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn init_random(rows: &[Vec<f64>], k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    rand::seq::index::sample(rng, rows.len(), k)
        .into_iter()
        .map(|i| rows[i].clone())
        .collect()
}

fn init_plusplus(rows: &[Vec<f64>], k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // round-off can leave target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &rows[pick]));
        }
        centroids.push(rows[pick].clone());
    }
    centroids
}

fn cluster_means(rows: &[Vec<f64>], labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = rows[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for v in s.iter_mut() {
                *v /= c as f64;
            }
        }
    }
    (sums, counts)
}

pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, init: KmeansInit) -> Result<ClusterAssignment> {
    kmeans_traced(rows, k, seed, init).map(|(a, _)| a)
}

/// Lloyd iterations until the assignment stops changing or
/// [`MAX_LLOYD_ITERATIONS`] is reached. An empty cluster is re-seeded at the
/// point farthest from its own centroid.
pub fn kmeans_traced(
    rows: &[Vec<f64>],
    k: usize,
    seed: u64,
    init: KmeansInit,
) -> Result<(ClusterAssignment, KmeansTrace)> {
    let n = rows.len();
    check_k(k, n)?;
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::param("feature rows have unequal lengths"));
    }
    let mut rng = seeded(seed);
    let mut centroids = match init {
        KmeansInit::Random => init_random(rows, k, &mut rng),
        KmeansInit::PlusPlus => init_plusplus(rows, k, &mut rng),
    };
    let mut labels = vec![usize::MAX; n];
    let mut trace = KmeansTrace::default();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut inertia = 0.0;
        let mut next = Vec::with_capacity(n);
        for r in rows {
            let (c, d) = nearest(r, &centroids);
            next.push(c);
            inertia += d;
        }
        trace.inertia.push(inertia);
        if next == labels {
            trace.converged = true;
            break;
        }
        labels = next;
        let (means, counts) = cluster_means(rows, &labels, k);
        centroids = means;
        let mut used = vec![false; n];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..n)
                .filter(|&i| !used[i])
                .map(|i| (i, sq_dist(&rows[i], &centroids[labels[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = far {
                used[i] = true;
                centroids[c] = rows[i].clone();
            }
        }
    }
    let (means, _) = cluster_means(rows, &labels, k);
    let inertia = rows
        .iter()
        .zip(&labels)
        .map(|(r, &l)| sq_dist(r, &means[l]))
        .sum();
    let method = match init {
        KmeansInit::Random => ClusterMethod::Kmeans,
        KmeansInit::PlusPlus => ClusterMethod::Kmeanspp,
    };
    Ok((ClusterAssignment::new(labels, k, seed, method, inertia), trace))
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (b, centre) in [[0.0, 0.0], [10.0, 10.0]].iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![centre[0] + noise.sample(&mut rng), centre[1] + noise.sample(&mut rng)]);
                truth.push(b);
            }
        }
        (rows, truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::tests_support::blobs;

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.iter().zip(b).all(|(x, y)| {
            a.iter().zip(b).all(|(x2, y2)| (x == x2) == (y == y2))
        }) && a.len() == b.len()
    }

    #[test]
    fn single_cluster_inertia_is_total_ss() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let a = kmeans(&rows, 1, 4, KmeansInit::Random).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
        // centroid (1, 1): 2 + 2 + 4
        assert!((a.inertia - 8.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_rows_is_exact() {
        let rows = vec![vec![0.0], vec![1.0], vec![5.0], vec![9.0]];
        for init in [KmeansInit::Random, KmeansInit::PlusPlus] {
            let a = kmeans(&rows, 4, 11, init).unwrap();
            assert_eq!(a.inertia, 0.0);
            let mut l = a.labels.clone();
            l.sort();
            assert_eq!(l, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn separates_two_blobs() {
        let (rows, truth) = blobs(15, 1);
        for seed in 0..10 {
            let a = kmeans(&rows, 2, seed, KmeansInit::PlusPlus).unwrap();
            assert!(same_partition(&a.labels, &truth), "seed {seed}");
            let a = kmeans(&rows, 2, seed, KmeansInit::Random).unwrap();
            assert!(same_partition(&a.labels, &truth), "seed {seed}");
        }
    }

    #[test]
    fn rejects_k_above_rows() {
        assert!(kmeans(&[vec![1.0]], 2, 0, KmeansInit::Random).is_err());
    }

    #[test]
    fn duplicate_rows_record_collapse() {
        let rows = vec![vec![1.0]; 3];
        let a = kmeans(&rows, 3, 0, KmeansInit::PlusPlus).unwrap();
        assert!(a.is_partition(3));
        assert_eq!(a.inertia, 0.0);
        assert_eq!(a.collapsed.len(), 2);
    }

    proptest! {
        #[test]
        fn lloyd_inertia_never_increases(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 3..30),
            k in 1usize..5,
            seed in any::<u64>(),
            pp in any::<bool>(),
        ) {
            let k = k.min(rows.len());
            let init = if pp { KmeansInit::PlusPlus } else { KmeansInit::Random };
            let (a, trace) = kmeans_traced(&rows, k, seed, init).unwrap();
            for w in trace.inertia.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
            prop_assert!(a.is_partition(rows.len()));
            prop_assert_eq!(&a, &kmeans(&rows, k, seed, init).unwrap());
        }
    }
}
