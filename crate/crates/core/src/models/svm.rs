//! Soft-margin support vector machine solved with SMO and second-order
//! working-set selection.

use serde::{Deserialize, Serialize};

use super::{check_binary, ScoreModel};
use crate::error::{Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-3;
/// Above this many samples kernel rows are computed on demand.
pub const FULL_GRAM_LIMIT: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
}

impl Kernel {
    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf => "rbf",
        }
    }

    /// Inputs are divided by `scale` before the kernel is applied.
    pub fn eval(self, u: &[f64], v: &[f64], scale: f64) -> f64 {
        let s2 = scale * scale;
        match self {
            Kernel::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / s2,
            Kernel::Rbf => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * s2)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub box_constraint: f64,
    pub kernel_scale: f64,
    pub tolerance: f64,
    /// 0 selects max(200 000, 500 n).
    pub max_iterations: usize,
}

impl SvmParams {
    pub fn new(kernel: Kernel, box_constraint: f64, kernel_scale: f64) -> Self {
        SvmParams {
            kernel,
            box_constraint,
            kernel_scale,
            tolerance: KKT_TOLERANCE,
            max_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub kernel_scale: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl ScoreModel for SvmModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.coef)
                .map(|(sv, c)| c * self.kernel.eval(sv, x, self.kernel_scale))
                .sum::<f64>()
    }
}

struct Gram<'a> {
    x: &'a [Vec<f64>],
    kernel: Kernel,
    scale: f64,
    full: Option<Vec<f64>>,
    cache: Vec<(usize, Vec<f64>)>,
}

impl<'a> Gram<'a> {
    fn new(x: &'a [Vec<f64>], kernel: Kernel, scale: f64) -> Self {
        let n = x.len();
        let full = (n <= FULL_GRAM_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel.eval(&x[i], &x[j], scale);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        Gram {
            x,
            kernel,
            scale,
            full,
            cache: Vec::new(),
        }
    }

    fn diag(&self, i: usize) -> f64 {
        self.kernel.eval(&self.x[i], &self.x[i], self.scale)
    }

    #[allow(clippy::unnecessary_unwrap)]
    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.x.len();
        if self.full.is_some() {
            return &self.full.as_ref().unwrap()[i * n..(i + 1) * n];
        }
        let pos = match self.cache.iter().position(|(k, _)| *k == i) {
            Some(p) => p,
            None => {
                let row: Vec<f64> = self.x.iter().map(|v| self.kernel.eval(&self.x[i], v, self.scale)).collect();
                if self.cache.len() >= 64 {
                    self.cache.remove(0);
                }
                self.cache.push((i, row));
                self.cache.len() - 1
            }
        };
        &self.cache[pos].1
    }
}

pub fn train_svm(x: &[Vec<f64>], y: &[bool], params: &SvmParams) -> Result<SvmModel> {
    check_binary(x, y)?;
    let c = params.box_constraint;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Argument(format!("box constraint must be positive, got {c}")));
    }
    if !(params.kernel_scale > 0.0 && params.kernel_scale.is_finite()) {
        return Err(Error::Argument(format!(
            "kernel scale must be positive, got {}",
            params.kernel_scale
        )));
    }
    let n = x.len();
    let max_iter = if params.max_iterations == 0 {
        (500 * n).max(200_000)
    } else {
        params.max_iterations
    };
    let ys: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut gram = Gram::new(x, params.kernel, params.kernel_scale);
    let qd: Vec<f64> = (0..n).map(|i| gram.diag(i)).collect();

    let mut alpha = vec![0.0; n];
    // gradient of 0.5 a'Qa - e'a
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let mut violation;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_sel != usize::MAX {
            let ki: Vec<f64> = gram.row(i_sel).to_vec();
            for t in 0..n {
                if !in_low(alpha[t], ys[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = qd[i_sel] + qd[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = 1e-12;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        violation = if i_sel == usize::MAX { 0.0 } else { gmax - gmin };
        if violation < params.tolerance || j_sel == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            let best = finish(x, &ys, &alpha, &grad, c, params, iterations);
            return Err(Error::Convergence {
                iterations,
                violation,
                best: Box::new(best),
            });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let ki: Vec<f64> = gram.row(i).to_vec();
        let kj: Vec<f64> = gram.row(j).to_vec();
        let qij = ys[i] * ys[j] * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += ys[t] * (ys[i] * ki[t] * di + ys[j] * kj[t] * dj);
        }
    }
    log::debug!("svm converged after {iterations} iterations, violation {violation:.2e}");
    Ok(finish(x, &ys, &alpha, &grad, c, params, iterations))
}

fn finish(x: &[Vec<f64>], ys: &[f64], alpha: &[f64], grad: &[f64], c: f64, params: &SvmParams, iterations: usize) -> SvmModel {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 { free_sum / n_free as f64 } else { 0.5 * (ub + lb) };
    let mut support_vectors = Vec::new();
    let mut coef = Vec::new();
    for t in 0..alpha.len() {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            coef.push(alpha[t] * ys[t]);
        }
    }
    SvmModel {
        kernel: params.kernel,
        kernel_scale: params.kernel_scale,
        support_vectors,
        coef,
        bias: -rho,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn xor() -> (Vec<Vec<f64>>, Vec<bool>) {
        let x = vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]];
        let y = vec![true, true, false, false];
        (x, y)
    }

    fn accuracy(m: &SvmModel, x: &[Vec<f64>], y: &[bool]) -> f64 {
        x.iter().zip(y).filter(|(r, &l)| (m.decision(r) > 0.0) == l).count() as f64 / y.len() as f64
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while x.len() < n {
            let p: Vec<f64> = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let margin = p[0] + 0.5 * p[1] - 0.2;
            if margin.abs() > 0.3 {
                y.push(margin > 0.0);
                x.push(p);
            }
        }
        (x, y)
    }

    #[test]
    fn xor_needs_rbf() {
        let (x, y) = xor();
        let rbf = train_svm(&x, &y, &SvmParams::new(Kernel::Rbf, 10.0, 1.0)).unwrap();
        assert_eq!(accuracy(&rbf, &x, &y), 1.0);
        let lin = train_svm(&x, &y, &SvmParams::new(Kernel::Linear, 10.0, 1.0)).unwrap();
        assert!(accuracy(&lin, &x, &y) <= 0.75);
    }

    #[test]
    fn kkt_conditions_hold() {
        let (x, y) = separable(80, 1);
        // add label noise so some multipliers sit at the bound
        let y: Vec<bool> = y.iter().enumerate().map(|(i, &l)| if i % 17 == 0 { !l } else { l }).collect();
        let c = 2.0;
        let m = train_svm(&x, &y, &SvmParams::new(Kernel::Rbf, c, 0.8)).unwrap();
        // recover alpha for every training point from the support set
        for (row, &label) in x.iter().zip(&y) {
            let yi = if label { 1.0 } else { -1.0 };
            let margin = yi * m.decision(row);
            let alpha = m
                .support_vectors
                .iter()
                .zip(&m.coef)
                .find(|(sv, _)| sv.as_slice() == row.as_slice())
                .map(|(_, c)| c.abs())
                .unwrap_or(0.0);
            if alpha == 0.0 {
                assert!(margin >= 1.0 - 2e-3, "{margin}");
            } else if alpha >= c {
                assert!(margin <= 1.0 + 2e-3, "{margin}");
            } else {
                assert!((margin - 1.0).abs() < 2e-3, "{margin}");
            }
        }
        let balance: f64 = m.coef.iter().sum();
        assert!(balance.abs() < 1e-9);
    }

    #[test]
    fn duplicated_points_keep_the_boundary() {
        let (x, y) = separable(40, 2);
        let mut params = SvmParams::new(Kernel::Linear, 1e3, 1.0);
        params.tolerance = 1e-9;
        let a = train_svm(&x, &y, &params).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<bool> = y.iter().chain(&y).copied().collect();
        let b = train_svm(&x2, &y2, &params).unwrap();
        let mut rng = crate::rng::rng_from_seed(9);
        for _ in 0..50 {
            let p = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert!((a.decision(&p) - b.decision(&p)).abs() < 1e-6);
        }
    }

    #[test]
    fn label_swap_negates_scores() {
        let (x, y) = separable(60, 3);
        let flipped: Vec<bool> = y.iter().map(|l| !l).collect();
        let mut p = SvmParams::new(Kernel::Rbf, 5.0, 1.3);
        p.tolerance = 1e-9;
        let a = train_svm(&x, &y, &p).unwrap();
        let b = train_svm(&x, &flipped, &p).unwrap();
        for row in &x {
            assert!((a.decision(row) + b.decision(row)).abs() < 1e-6);
        }
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let (x, y) = separable(60, 4);
        let mut p = SvmParams::new(Kernel::Rbf, 100.0, 0.5);
        p.max_iterations = 3;
        match train_svm(&x, &y, &p) {
            Err(Error::Convergence { iterations, best, .. }) => {
                assert_eq!(iterations, 3);
                assert!(!best.support_vectors.is_empty());
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn kernel_scale_divides_inputs() {
        let u = [1.0, 2.0];
        let v = [3.0, -1.0];
        assert!((Kernel::Linear.eval(&u, &v, 2.0) - Kernel::Linear.eval(&[0.5, 1.0], &[1.5, -0.5], 1.0)).abs() < 1e-15);
        let expect = (-(4.0 + 9.0) / (2.0 * 4.0f64)).exp();
        assert!((Kernel::Rbf.eval(&u, &v, 2.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn on_demand_rows_match_full_gram() {
        let (x, y) = separable(30, 5);
        let p = SvmParams::new(Kernel::Rbf, 3.0, 1.0);
        let a = train_svm(&x, &y, &p).unwrap();
        let mut g = Gram::new(&x, Kernel::Rbf, 1.0);
        let full = g.full.take().unwrap();
        for i in [0, 7, 29] {
            assert_eq!(g.row(i), &full[i * 30..(i + 1) * 30]);
        }
        assert!(a.iterations > 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let (x, y) = xor();
        assert!(train_svm(&x, &y, &SvmParams::new(Kernel::Rbf, 0.0, 1.0)).is_err());
        assert!(train_svm(&x, &y, &SvmParams::new(Kernel::Rbf, 1.0, -1.0)).is_err());
    }
}
