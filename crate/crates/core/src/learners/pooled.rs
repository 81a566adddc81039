use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::WindowModel;
use crate::error::{Error, Result};
use crate::preprocess::{InputLayout, WindowSet};

/// Linear autoregression shared by every series in the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRegressionModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub l2_weight: f64,
    pub layout: InputLayout,
}

impl PooledRegressionModel {
    pub fn from_parts(coefficients: Vec<f64>, intercept: f64, layout: InputLayout) -> Self {
        Self {
            coefficients,
            intercept,
            l2_weight: 0.0,
            layout,
        }
    }

    pub fn window_size(&self) -> usize {
        self.layout.lags
    }
}

impl WindowModel for PooledRegressionModel {
    fn layout(&self) -> &InputLayout {
        &self.layout
    }

    fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }
}

/// In-place Cholesky factorisation of a symmetric matrix (row-major, `p x p`)
/// followed by the two triangular solves.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Result<Vec<f64>> {
    let scale = (0..p).map(|i| a[i * p + i]).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tol) {
            return Err(Error::SingularSystem);
        }
        let d = libm::sqrt(d);
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Ok(b)
}

/// Least squares with an unpenalised intercept and an L2 penalty on the
/// coefficients. The intercept is profiled out by centring, and the remaining
/// normal equations are solved by Cholesky factorisation.
pub fn fit_pr(ws: &WindowSet, l2_weight: f64) -> Result<PooledRegressionModel> {
    let p = ws.width();
    let rows = ws.rows();
    if !(l2_weight >= 0.0) {
        return Err(Error::param("l2 weight must be nonnegative"));
    }
    if rows < ws.layout.lags + 1 {
        return Err(Error::TooShort {
            what: "pooled regression training rows",
            len: rows,
            required: ws.layout.lags + 1,
        });
    }
    let n = rows as f64;
    let mut xbar = vec![0.0; p];
    for r in 0..rows {
        for (m, v) in xbar.iter_mut().zip(ws.row(r)) {
            *m += v;
        }
    }
    for m in xbar.iter_mut() {
        *m /= n;
    }
    let ybar = ws.targets.iter().sum::<f64>() / n;

    let mut ata = vec![0.0; p * p];
    let mut atb = vec![0.0; p];
    let mut centred = vec![0.0; p];
    for r in 0..rows {
        for ((c, v), m) in centred.iter_mut().zip(ws.row(r)).zip(&xbar) {
            *c = v - m;
        }
        let yc = ws.targets[r] - ybar;
        for i in 0..p {
            atb[i] += centred[i] * yc;
            for j in 0..=i {
                ata[i * p + j] += centred[i] * centred[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            ata[j * p + i] = ata[i * p + j];
        }
        ata[i * p + i] += l2_weight;
    }
    let coefficients = cholesky_solve(ata, atb, p)?;
    let intercept = ybar - coefficients.iter().zip(&xbar).map(|(c, m)| c * m).sum::<f64>();
    if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(PooledRegressionModel {
        coefficients,
        intercept,
        l2_weight,
        layout: ws.layout,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::preprocess::make_windows;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    /// Gaussian elimination with partial pivoting on the augmented
    /// `[1 | X]` normal equations, intercept left unpenalised.
    pub(crate) fn normal_equations_oracle(ws: &WindowSet, l2: f64) -> (f64, Vec<f64>) {
        let p = ws.width() + 1;
        let mut m = vec![vec![0.0; p + 1]; p];
        for r in 0..ws.rows() {
            let mut x = vec![1.0];
            x.extend_from_slice(ws.row(r));
            for i in 0..p {
                for j in 0..p {
                    m[i][j] += x[i] * x[j];
                }
                m[i][p] += x[i] * ws.targets[r];
            }
        }
        for i in 1..p {
            m[i][i] += l2;
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..=p {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        let sol: Vec<f64> = (0..p).map(|i| m[i][p] / m[i][i]).collect();
        (sol[0], sol[1..].to_vec())
    }

    #[test]
    fn recovers_exact_ar1() {
        let series: Vec<Vec<f64>> = [1.0, 8.0, -4.0]
            .iter()
            .map(|&s| {
                let mut y = vec![s];
                for _ in 0..10 {
                    let l = *y.last().unwrap();
                    y.push(2.0 + 0.5 * l);
                }
                y
            })
            .collect();
        let refs: Vec<(&str, &[f64])> = series.iter().map(|s| ("a", s.as_slice())).collect();
        let ws = make_windows(&refs, &InputLayout::lags(1)).unwrap();
        let m = fit_pr(&ws, 0.0).unwrap();
        assert!((m.intercept - 2.0).abs() < 1e-8);
        assert!((m.coefficients[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn constant_targets() {
        let ws = WindowSet {
            layout: InputLayout::lags(1),
            inputs: vec![1.0, 2.0, 4.0],
            targets: vec![3.0, 3.0, 3.0],
            series_index: vec![0, 0, 0],
        };
        let m = fit_pr(&ws, 0.0).unwrap();
        assert!(m.coefficients[0].abs() < 1e-12);
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_ridge_shrinks_to_mean() {
        let ws = WindowSet {
            layout: InputLayout::lags(2),
            inputs: vec![1.0, 2.0, 2.0, 5.0, 5.0, 3.0, 3.0, 1.0],
            targets: vec![5.0, 3.0, 1.0, 4.0],
            series_index: vec![0; 4],
        };
        let m = fit_pr(&ws, 1e9).unwrap();
        assert!(m.coefficients.iter().all(|c| c.abs() < 1e-4));
        assert!((m.intercept - 3.25).abs() < 1e-4);
    }

    #[test]
    fn singular_without_ridge() {
        let ws = WindowSet {
            layout: InputLayout::lags(1),
            inputs: vec![2.0, 2.0, 2.0],
            targets: vec![1.0, 2.0, 3.0],
            series_index: vec![0; 3],
        };
        assert_eq!(fit_pr(&ws, 0.0), Err(Error::SingularSystem));
        assert!(fit_pr(&ws, 0.1).is_ok());
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = seeded(3);
        for _ in 0..100 {
            let lags = rng.random_range(1..=5);
            let rows = rng.random_range(lags + 2..=50);
            let ws = WindowSet {
                layout: InputLayout::lags(lags),
                inputs: (0..rows * lags).map(|_| rng.random_range(-3.0..3.0)).collect(),
                targets: (0..rows).map(|_| rng.random_range(-3.0..3.0)).collect(),
                series_index: vec![0; rows],
            };
            let l2 = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) };
            let m = fit_pr(&ws, l2).unwrap();
            let (b0, b) = normal_equations_oracle(&ws, l2);
            assert!((m.intercept - b0).abs() < 1e-8);
            for (x, y) in m.coefficients.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn fit_is_deterministic(vals in prop::collection::vec(-5.0f64..5.0, 12..40)) {
            let ws = make_windows(&[("a", &vals)], &InputLayout::lags(2)).unwrap();
            prop_assert_eq!(fit_pr(&ws, 0.5), fit_pr(&ws, 0.5));
        }
    }
}
