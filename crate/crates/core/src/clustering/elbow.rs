use alloc::vec::Vec;
use core::ops::RangeInclusive;

use super::kmeans::{kmeans, KmeansInit};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::{derive_seed, stream};

pub const ELBOW_RESTARTS: usize = 5;

/// Knee of a WCSS curve: the point farthest from the chord joining the first
/// and last points, with both axes rescaled to `[0, 1]`. Ties (within 1e-12)
/// go to the smallest k.
pub fn elbow_from_profile(ks: &[usize], wcss: &[f64]) -> Result<usize> {
    if ks.is_empty() || ks.len() != wcss.len() {
        return Err(Error::param("elbow profile must be nonempty and aligned"));
    }
    let (k0, k1) = (ks[0] as f64, ks[ks.len() - 1] as f64);
    let (w0, w1) = (wcss[0], wcss[wcss.len() - 1]);
    let kspan = k1 - k0;
    let wlo = wcss.iter().copied().fold(f64::INFINITY, f64::min);
    let whi = wcss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wspan = whi - wlo;
    if !(kspan > 0.0) || !(wspan > 0.0) {
        return Ok(ks[0]);
    }
    let norm = |k: f64, w: f64| ((k - k0) / kspan, (w - wlo) / wspan);
    let (ax, ay) = norm(k0, w0);
    let (bx, by) = norm(k1, w1);
    let (dx, dy) = (bx - ax, by - ay);
    let len = libm::sqrt(dx * dx + dy * dy);
    let dist: Vec<f64> = ks
        .iter()
        .zip(wcss)
        .map(|(&k, &w)| {
            let (px, py) = norm(k as f64, w);
            (dx * (py - ay) - dy * (px - ax)).abs() / len
        })
        .collect();
    let max = dist.iter().copied().fold(0.0, f64::max);
    let pos = dist.iter().position(|&d| d >= max - 1e-12).unwrap_or(0);
    Ok(ks[pos])
}

/// Best-of-[`ELBOW_RESTARTS`] k-means inertia for every k in the range.
pub fn wcss_profile<E: Executor>(
    rows: &[Vec<f64>],
    k_range: RangeInclusive<usize>,
    seed: u64,
    init: KmeansInit,
    exec: &E,
) -> Result<Vec<(usize, f64)>> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || lo > hi || hi > rows.len() {
        return Err(Error::param(alloc::format!(
            "elbow range {lo}..={hi} must lie within 1..={}",
            rows.len()
        )));
    }
    let ks: Vec<usize> = (lo..=hi).collect();
    exec.map(ks.len(), |i| {
        let k = ks[i];
        let mut best = f64::INFINITY;
        for r in 0..ELBOW_RESTARTS {
            let s = derive_seed(seed, stream::ELBOW, (k * ELBOW_RESTARTS + r) as u64);
            best = best.min(kmeans(rows, k, s, init)?.inertia);
        }
        Ok((k, best))
    })
    .into_iter()
    .collect()
}

pub fn elbow_optimal_k<E: Executor>(
    rows: &[Vec<f64>],
    k_range: RangeInclusive<usize>,
    seed: u64,
    init: KmeansInit,
    exec: &E,
) -> Result<usize> {
    let profile = wcss_profile(rows, k_range, seed, init, exec)?;
    let (ks, w): (Vec<usize>, Vec<f64>) = profile.into_iter().unzip();
    elbow_from_profile(&ks, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::vec;

    /// Unnormalised perpendicular distance from each point to the end chord,
    /// computed from the line equation through the endpoints.
    fn chord_distances(points: &[(f64, f64)]) -> Vec<f64> {
        let (x1, y1) = points[0];
        let (x2, y2) = points[points.len() - 1];
        let a = y2 - y1;
        let b = x1 - x2;
        let c = x2 * y1 - x1 * y2;
        points
            .iter()
            .map(|&(x, y)| (a * x + b * y + c).abs() / libm::sqrt(a * a + b * b))
            .collect()
    }

    #[test]
    fn knee_of_reference_profile() {
        let w = [100.0, 40.0, 35.0, 33.0, 32.0, 31.0];
        let ks: Vec<usize> = (1..=6).collect();
        // raw-geometry oracle agrees on the knee
        let pts: Vec<(f64, f64)> = ks.iter().zip(&w).map(|(&k, &v)| (k as f64, v)).collect();
        let d = chord_distances(&pts);
        let oracle = d.iter().enumerate().fold(0, |b, (i, v)| if *v > d[b] { i } else { b });
        assert_eq!(ks[oracle], 2);
        assert_eq!(elbow_from_profile(&ks, &w).unwrap(), 2);
    }

    #[test]
    fn linear_profile_ties_to_smallest() {
        let ks: Vec<usize> = (3..=8).collect();
        let w: Vec<f64> = ks.iter().map(|&k| 50.0 - 4.0 * k as f64).collect();
        assert_eq!(elbow_from_profile(&ks, &w).unwrap(), 3);
    }

    #[test]
    fn two_blobs_pick_two() {
        let (rows, _) = crate::clustering::kmeans::tests_support::blobs(12, 3);
        let k = elbow_optimal_k(&rows, 1..=6, 7, KmeansInit::PlusPlus, &Sequential).unwrap();
        assert_eq!(k, 2);
    }

    #[test]
    fn invalid_range() {
        let rows = vec![vec![0.0]; 3];
        assert!(elbow_optimal_k(&rows, 0..=2, 0, KmeansInit::Random, &Sequential).is_err());
        assert!(elbow_optimal_k(&rows, 1..=4, 0, KmeansInit::Random, &Sequential).is_err());
    }
}
