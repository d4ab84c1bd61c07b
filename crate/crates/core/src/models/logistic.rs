//! L2-penalized logistic regression fitted by damped Newton steps.

use nalgebra::{DMatrix, DVector};

use super::{check_binary, ScoreModel};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

impl ScoreModel for LogisticModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative penalized log-likelihood and its gradient. `params` holds the
/// intercept first; the intercept is not penalized.
pub fn objective(params: &[f64], x: &[Vec<f64>], y: &[bool], l2: f64) -> (f64, Vec<f64>) {
    let d = params.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; d];
    for (row, &label) in x.iter().zip(y) {
        let z = params[0] + row.iter().zip(&params[1..]).map(|(a, b)| a * b).sum::<f64>();
        let t = if label { 1.0 } else { 0.0 };
        // -[t log s(z) + (1-t) log(1-s(z))] = log(1+e^z) - t z
        loss += log1p_exp(z) - t * z;
        let r = sigmoid(z) - t;
        grad[0] += r;
        for (g, v) in grad[1..].iter_mut().zip(row) {
            *g += r * v;
        }
    }
    for j in 1..d {
        loss += 0.5 * l2 * params[j] * params[j];
        grad[j] += l2 * params[j];
    }
    (loss, grad)
}

/// Newton iterations from zero until the gradient norm drops below 1e-6 or
/// 500 iterations pass.
pub fn train_logistic(x: &[Vec<f64>], y: &[bool], l2: f64) -> Result<LogisticModel> {
    check_binary(x, y)?;
    if !(l2 >= 0.0) {
        return Err(Error::Argument(format!("l2 must be non-negative, got {l2}")));
    }
    let d = x[0].len() + 1;
    let mut params = vec![0.0; d];
    let (mut loss, mut grad) = objective(&params, x, y, l2);
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < GRADIENT_TOLERANCE {
            break;
        }
        iterations += 1;

        let mut hess = DMatrix::<f64>::zeros(d, d);
        let mut aug = vec![0.0; d];
        for row in x {
            let z = params[0] + row.iter().zip(&params[1..]).map(|(a, b)| a * b).sum::<f64>();
            let s = sigmoid(z);
            let w = s * (1.0 - s);
            if w == 0.0 {
                continue;
            }
            aug[0] = 1.0;
            aug[1..].copy_from_slice(row);
            for i in 0..d {
                let wi = w * aug[i];
                for j in i..d {
                    hess[(i, j)] += wi * aug[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                hess[(i, j)] = hess[(j, i)];
            }
            // separable data with no penalty has a vanishing Hessian
            hess[(i, i)] += if i == 0 { 1e-10 } else { l2 + 1e-10 };
        }
        let g = DVector::from_vec(grad.clone());
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => hess
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::SingularMatrix("logistic Hessian".into()))?,
        };

        // backtracking on the Newton direction
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p - t * s).collect();
            let (trial_loss, trial_grad) = objective(&trial, x, y, l2);
            if trial_loss <= loss - 1e-4 * t * slope {
                params = trial;
                loss = trial_loss;
                grad = trial_grad;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    Ok(LogisticModel {
        intercept: params[0],
        weights: params[1..].to_vec(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, seed: u64, sep: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let shift = if pos { sep } else { -sep };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push(vec![a + shift, b - 0.5 * shift, rng.gen_range(-1.0..1.0)]);
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn separable_pair() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![false, true];
        let m = train_logistic(&x, &y, 0.0).unwrap();
        assert!(m.decision(&x[0]) < 0.0 && m.decision(&x[1]) > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = blobs(60, 1, 0.7);
        let l2 = 0.3;
        let m = train_logistic(&x, &y, l2).unwrap();
        let mut rng = crate::rng::rng_from_seed(2);
        let optimum: Vec<f64> = std::iter::once(m.intercept).chain(m.weights.iter().copied()).collect();
        let random: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for point in [optimum.clone(), random] {
            let (_, grad) = objective(&point, &x, &y, l2);
            for j in 0..point.len() {
                let h = 1e-6;
                let mut p = point.clone();
                p[j] += h;
                let up = objective(&p, &x, &y, l2).0;
                p[j] -= 2.0 * h;
                let down = objective(&p, &x, &y, l2).0;
                let numeric = (up - down) / (2.0 * h);
                let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(1e-6);
                // near the optimum both values are round-off sized
                assert!(
                    rel < 1e-5 || (grad[j] - numeric).abs() < 1e-7,
                    "coord {j}: {} vs {numeric}",
                    grad[j]
                );
            }
        }
        let (_, g_opt) = objective(&optimum, &x, &y, l2);
        assert!(g_opt.iter().map(|g| g * g).sum::<f64>().sqrt() < GRADIENT_TOLERANCE);
    }

    #[test]
    fn label_swap_negates_scores() {
        let (x, y) = blobs(80, 5, 0.5);
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let a = train_logistic(&x, &y, 0.1).unwrap();
        let b = train_logistic(&x, &flipped, 0.1).unwrap();
        for row in &x {
            assert!((a.decision(row) + b.decision(row)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_logistic(&x, &[true, true], 1.0), Err(Error::DegenerateData(_))));
    }
}
