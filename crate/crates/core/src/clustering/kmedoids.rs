use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{check_k, ClusterAssignment, ClusterMethod};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::seeded;

pub const MAX_PAM_SWAPS: usize = 100;

/// Unconstrained DTW with absolute-difference local cost and unit steps in
/// both directions plus the diagonal.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("DTW needs nonempty sequences"));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        for j in 0..m {
            let cost = (x - b[j]).abs();
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = prev[j];
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            cur[j] = cost + best;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Symmetric pairwise DTW matrix; rows are computed as independent work items.
pub fn dtw_matrix<E: Executor>(series: &[&[f64]], exec: &E) -> Result<Vec<Vec<f64>>> {
    let n = series.len();
    let upper: Vec<Result<Vec<f64>>> = exec.map(n, |i| {
        (i + 1..n)
            .map(|j| dtw_distance(series[i], series[j]))
            .collect()
    });
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, d) in row?.into_iter().enumerate() {
            let j = i + 1 + off;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

/// Total cost after BUILD and after every accepted swap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PamTrace {
    pub costs: Vec<f64>,
    pub medoids: Vec<usize>,
}

fn nearest_two(dist: &[Vec<f64>], medoids: &[usize], j: usize) -> (usize, f64, f64) {
    let mut best = (0, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (pos, &m) in medoids.iter().enumerate() {
        let d = dist[m][j];
        if d < best.1 {
            second = best.1;
            best = (pos, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}

/// PAM over a precomputed dissimilarity matrix. The seed fixes the order in
/// which candidates are scanned, which decides ties.
pub fn pam(dist: &[Vec<f64>], k: usize, seed: u64) -> Result<(ClusterAssignment, PamTrace)> {
    let n = dist.len();
    check_k(k, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));

    // BUILD
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut near = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for &c in order.iter().filter(|&&c| !is_medoid[c]) {
            let total: f64 = (0..n).map(|j| near[j].min(dist[c][j])).sum();
            if best.is_none_or(|(_, b)| total < b) {
                best = Some((c, total));
            }
        }
        let (c, _) = best.expect("k <= n leaves a candidate");
        medoids.push(c);
        is_medoid[c] = true;
        for j in 0..n {
            near[j] = near[j].min(dist[c][j]);
        }
    }
    let mut cost: f64 = near.iter().sum();
    let mut trace = PamTrace {
        costs: vec![cost],
        medoids: Vec::new(),
    };

    // SWAP
    for _ in 0..MAX_PAM_SWAPS {
        let cache: Vec<(usize, f64, f64)> = (0..n).map(|j| nearest_two(dist, &medoids, j)).collect();
        let mut best: Option<(usize, usize, f64)> = None;
        for pos in 0..k {
            for &o in order.iter().filter(|&&o| !is_medoid[o]) {
                let total: f64 = (0..n)
                    .map(|j| {
                        let (p, d1, d2) = cache[j];
                        let keep = if p == pos { d2 } else { d1 };
                        keep.min(dist[o][j])
                    })
                    .sum();
                if best.is_none_or(|(_, _, b)| total < b) {
                    best = Some((pos, o, total));
                }
            }
        }
        match best {
            Some((pos, o, total)) if total < cost - 1e-12 * cost.abs().max(1.0) => {
                is_medoid[medoids[pos]] = false;
                is_medoid[o] = true;
                medoids[pos] = o;
                cost = total;
                trace.costs.push(cost);
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let mut labels = Vec::with_capacity(n);
    let mut inertia = 0.0;
    for j in 0..n {
        let (p, d, _) = nearest_two(dist, &medoids, j);
        labels.push(p);
        inertia += d;
    }
    trace.medoids = medoids;
    Ok((
        ClusterAssignment::new(labels, k, seed, ClusterMethod::KmedoidsDtw, inertia),
        trace,
    ))
}

pub fn kmedoids_dtw<E: Executor>(
    series: &[&[f64]],
    k: usize,
    seed: u64,
    exec: &E,
) -> Result<ClusterAssignment> {
    check_k(k, series.len())?;
    let dist = dtw_matrix(series, exec)?;
    pam(&dist, k, seed).map(|(a, _)| a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use proptest::prelude::*;
    use rand::Rng;

    /// Minimum cost over every monotone alignment path, by exhaustive recursion.
    fn brute_dtw(a: &[f64], b: &[f64]) -> f64 {
        fn walk(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let here = (a[i] - b[j]).abs();
            if i == a.len() - 1 && j == b.len() - 1 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(walk(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(walk(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(walk(a, b, i + 1, j + 1));
            }
            here + best
        }
        walk(a, b, 0, 0)
    }

    #[test]
    fn dtw_examples() {
        let x = [1.0, 4.0, 2.0];
        assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
        assert_eq!(brute_dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]), 0.0);
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(brute_dtw(&[0.0, 0.0], &[1.0, 1.0]), 2.0);
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert!(dtw_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn dtw_matches_brute_force_on_small_corpus() {
        let mut rng = seeded(99);
        for _ in 0..200 {
            let la = rng.random_range(1..=6);
            let lb = rng.random_range(1..=6);
            let a: Vec<f64> = (0..la).map(|_| rng.random_range(-5..=5) as f64).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-5..=5) as f64).collect();
            assert_eq!(dtw_distance(&a, &b).unwrap(), brute_dtw(&a, &b), "{a:?} {b:?}");
        }
    }

    #[test]
    fn pam_all_medoids_costs_nothing() {
        let s: [&[f64]; 3] = [&[1.0, 2.0], &[5.0, 1.0, 0.0], &[9.0]];
        let a = kmedoids_dtw(&s, 3, 1, &Sequential).unwrap();
        assert_eq!(a.inertia, 0.0);
    }

    #[test]
    fn pam_single_series() {
        let s: [&[f64]; 1] = [&[1.0, 2.0]];
        let a = kmedoids_dtw(&s, 1, 5, &Sequential).unwrap();
        assert_eq!(a.labels, vec![0]);
        assert_eq!(a.inertia, 0.0);
        assert!(kmedoids_dtw(&s, 2, 5, &Sequential).is_err());
    }

    #[test]
    fn pam_separates_warped_copies() {
        let a: Vec<f64> = (0..20).map(|t| libm::sin(t as f64 * 0.6)).collect();
        // time-warped copy: every third point repeated
        let warped: Vec<f64> = a.iter().enumerate().flat_map(|(i, &v)| {
            if i % 3 == 0 { vec![v, v] } else { vec![v] }
        }).collect();
        assert_eq!(dtw_distance(&a, &warped).unwrap(), 0.0);
        let b: Vec<f64> = (0..20).map(|t| 3.0 + (t % 5) as f64).collect();
        let b2: Vec<f64> = b.iter().map(|v| v + 0.1).collect();
        let b3: Vec<f64> = b.iter().rev().copied().collect();
        let series: [&[f64]; 6] = [&a, &warped, &a, &b, &b2, &b3];
        for seed in 0..8 {
            let asg = kmedoids_dtw(&series, 2, seed, &Sequential).unwrap();
            let l = &asg.labels;
            assert!(l[0] == l[1] && l[1] == l[2], "seed {seed}: {l:?}");
            assert!(l[3] == l[4] && l[4] == l[5], "seed {seed}: {l:?}");
            assert_ne!(l[0], l[3]);
        }
    }

    proptest! {
        #[test]
        fn dtw_properties(
            a in prop::collection::vec(-10.0f64..10.0, 1..12),
            b in prop::collection::vec(-10.0f64..10.0, 1..12),
        ) {
            let ab = dtw_distance(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, dtw_distance(&b, &a).unwrap());
            let n = a.len().min(b.len());
            let diag: f64 = a[..n].iter().zip(&b[..n]).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!(dtw_distance(&a[..n], &b[..n]).unwrap() <= diag + 1e-12);
        }

        #[test]
        fn pam_cost_never_increases(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..6), 2..12),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            let k = k.min(pts.len());
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let dist = dtw_matrix(&refs, &Sequential).unwrap();
            let (asg, trace) = pam(&dist, k, seed).unwrap();
            for w in trace.costs.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(asg.is_partition(pts.len()));
            prop_assert!((asg.inertia - trace.costs.last().unwrap()).abs() <= 1e-9 * asg.inertia.max(1.0));
            prop_assert_eq!(asg, pam(&dist, k, seed).unwrap().0);
        }
    }
}
