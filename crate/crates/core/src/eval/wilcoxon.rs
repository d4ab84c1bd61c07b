use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size handled by the exact null distribution.
pub const EXACT_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub method: WilcoxonMethod,
    /// Set when every difference was zero.
    pub all_zero: bool,
}

/// Mid-ranks of the absolute values, doubled so they stay integral.
fn doubled_midranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // positions i..=j (1-based i+1..=j+1) share the mean rank
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Right-tailed signed-rank test of H1: median(x - y) > 0. The p-value is
/// P(W+ >= observed) under the symmetric null.
pub fn wilcoxon_right(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 5 {
        return Err(Error::Argument(format!("need at least 5 pairs, got {}", x.len())));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            n: 0,
            method: WilcoxonMethod::Exact,
            all_zero: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let w2: u64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| *r).sum();
    let w_plus = w2 as f64 / 2.0;

    if n <= EXACT_LIMIT {
        // counts[s] = number of sign patterns whose doubled positive-rank sum is s
        let total: u64 = ranks.iter().sum();
        let mut counts = vec![0u64; total as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let tail: u64 = counts[w2 as usize..].iter().sum();
        return Ok(WilcoxonResult {
            p_value: tail as f64 / (1u64 << n) as f64,
            w_plus,
            n,
            method: WilcoxonMethod::Exact,
            all_zero: false,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    let p = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z);
    Ok(WilcoxonResult {
        p_value: p,
        w_plus,
        n,
        method: WilcoxonMethod::Normal,
        all_zero: false,
    })
}

pub fn bonferroni_threshold(alpha: f64, comparisons: usize) -> Result<f64> {
    if comparisons == 0 {
        return Err(Error::Argument("Bonferroni correction needs at least one comparison".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha / comparisons as f64)
}

pub fn is_significant(p: f64, alpha: f64, comparisons: usize) -> Result<bool> {
    Ok(p < bonferroni_threshold(alpha, comparisons)?)
}
