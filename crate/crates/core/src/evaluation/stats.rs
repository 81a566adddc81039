use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of nonzero pairs for which the Wilcoxon null distribution
/// is enumerated exactly.
pub const EXACT_WILCOXON_MAX: usize = 20;

/// Mean ranks (1-based) with ties sharing the average of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Regularised upper incomplete gamma `Q(a, x)`.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_pre = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * libm::exp(ln_pre)).clamp(0.0, 1.0)
    } else {
        // modified Lentz continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (libm::exp(ln_pre) * h).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    gamma_q(df as f64 / 2.0, x / 2.0)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub average_ranks: Vec<f64>,
}

/// `errors[block][model]`; lower is better and ranks ascend with error.
pub fn friedman_test(errors: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = errors.len();
    let k = errors.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(Error::param("Friedman test needs at least two models"));
    }
    if n < 2 {
        return Err(Error::param("Friedman test needs at least two blocks"));
    }
    if errors.iter().any(|r| r.len() != k) {
        return Err(Error::param("Friedman rows differ in length"));
    }
    let mut avg = vec![0.0; k];
    for row in errors {
        for (a, r) in avg.iter_mut().zip(average_ranks(row)) {
            *a += r;
        }
    }
    for a in avg.iter_mut() {
        *a /= n as f64;
    }
    let (nf, kf) = (n as f64, k as f64);
    let centre = (kf + 1.0) / 2.0;
    let statistic =
        12.0 * nf / (kf * (kf + 1.0)) * avg.iter().map(|r| (r - centre) * (r - centre)).sum::<f64>();
    Ok(FriedmanResult {
        statistic,
        df: k - 1,
        p_value: chi_square_sf(statistic, k - 1),
        average_ranks: avg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero; the p-value is 1 by convention.
    AllZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences `a - b`.
    pub statistic: f64,
    pub p_value: f64,
    pub nonzero: usize,
    pub method: WilcoxonMethod,
}

/// Two-sided signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            nonzero: 0,
            method: WilcoxonMethod::AllZero,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if n <= EXACT_WILCOXON_MAX {
        // doubled ranks are integers even with ties
        let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let w2 = libm::round(2.0 * w_plus) as usize;
        let all = libm::pow(2.0, n as f64);
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
        return Ok(WilcoxonResult {
            statistic: w_plus,
            p_value: (2.0 * lower.min(upper)).min(1.0),
            nonzero: n,
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p = if var > 0.0 {
        let dev = ((w_plus - mean).abs() - 0.5).max(0.0);
        (2.0 * normal_sf(dev / libm::sqrt(var))).min(1.0)
    } else {
        1.0
    };
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value: p,
        nonzero: n,
        method: WilcoxonMethod::Normal,
    })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &i) in idx.iter().enumerate() {
        running = running.max(((m - j) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub first: String,
    pub second: String,
    pub p_raw: f64,
    pub p_holm: f64,
    pub method: WilcoxonMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestReport {
    pub models: Vec<String>,
    pub friedman_statistic: f64,
    pub friedman_p: f64,
    pub average_ranks: Vec<f64>,
    pub pairwise: Vec<PairwiseTest>,
}

/// Friedman test across all models plus Holm-adjusted pairwise Wilcoxon tests
/// over every unordered pair.
pub fn stat_test_report(models: &[String], errors: &[Vec<f64>]) -> Result<StatTestReport> {
    if errors.iter().any(|r| r.len() != models.len()) {
        return Err(Error::param("error matrix does not match the model list"));
    }
    let fr = friedman_test(errors)?;
    let k = models.len();
    let column = |j: usize| -> Vec<f64> { errors.iter().map(|r| r[j]).collect() };
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let w = wilcoxon_signed_rank(&column(i), &column(j))?;
            pairs.push((i, j, w));
        }
    }
    let raw: Vec<f64> = pairs.iter().map(|(_, _, w)| w.p_value).collect();
    let adj = holm_adjust(&raw);
    let pairwise = pairs
        .into_iter()
        .zip(adj)
        .map(|((i, j, w), h)| PairwiseTest {
            first: models[i].clone(),
            second: models[j].clone(),
            p_raw: w.p_value,
            p_holm: h,
            method: w.method,
        })
        .collect();
    Ok(StatTestReport {
        models: models.to_vec(),
        friedman_statistic: fr.statistic,
        friedman_p: fr.p_value,
        average_ranks: fr.average_ranks,
        pairwise,
    })
}
