//! Regularized two-class linear discriminant.

use nalgebra::{DMatrix, DVector};

use super::{check_binary, ScoreModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl ScoreModel for LdaModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.bias + x.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Pooled covariance shrunk toward its diagonal by `gamma`; coefficients
/// smaller than `delta` in magnitude are zeroed.
pub fn train_lda(x: &[Vec<f64>], y: &[bool], delta: f64, gamma: f64) -> Result<LdaModel> {
    check_binary(x, y)?;
    if !(delta >= 0.0) {
        return Err(Error::Argument(format!("delta must be non-negative, got {delta}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let n_pos = y.iter().filter(|&&v| v).count();
    let n_neg = y.len() - n_pos;
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::DegenerateData(format!(
            "LDA needs two samples per class, got {n_pos} wheeze / {n_neg} other"
        )));
    }
    let d = x[0].len();

    let class_mean = |want: bool, count: usize| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for (row, _) in x.iter().zip(y).filter(|(_, &l)| l == want) {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= count as f64);
        m
    };
    let mu_pos = class_mean(true, n_pos);
    let mu_neg = class_mean(false, n_neg);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for (row, &label) in x.iter().zip(y) {
        let mu = if label { &mu_pos } else { &mu_neg };
        for ((c, v), m) in centered.iter_mut().zip(row).zip(mu) {
            *c = v - m;
        }
        for i in 0..d {
            if centered[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    let dof = (x.len() - 2) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / dof;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    // columns with no within-class spread carry no usable direction
    let active: Vec<usize> = (0..d).filter(|&i| cov[(i, i)] > 1e-12).collect();
    let mut coef = vec![0.0; d];
    if !active.is_empty() {
        let k = active.len();
        let reg = DMatrix::from_fn(k, k, |a, b| {
            let v = cov[(active[a], active[b])];
            if a == b {
                v
            } else {
                (1.0 - gamma) * v
            }
        });
        let diff = DVector::from_iterator(k, active.iter().map(|&i| mu_pos[i] - mu_neg[i]));
        let chol = reg.cholesky().ok_or_else(|| {
            Error::SingularMatrix(format!(
                "regularized covariance is not positive definite at gamma={gamma}; try a larger gamma"
            ))
        })?;
        let w = chol.solve(&diff);
        for (slot, &i) in active.iter().enumerate() {
            coef[i] = w[slot];
        }
    }
    for c in coef.iter_mut() {
        if c.abs() < delta {
            *c = 0.0;
        }
    }

    let midpoint: f64 = coef
        .iter()
        .zip(mu_pos.iter().zip(&mu_neg))
        .map(|(w, (a, b))| w * 0.5 * (a + b))
        .sum();
    let prior = (n_pos as f64 / n_neg as f64).ln();
    Ok(LdaModel {
        coef,
        bias: prior - midpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64, shift: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::rng::rng_from_seed(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|i| {
                let pos = i % 3 != 0;
                let s = if pos { shift } else { -shift };
                let a = noise.sample(&mut rng);
                (vec![a + s, 0.6 * a + noise.sample(&mut rng) * 0.8 - s, noise.sample(&mut rng)], pos)
            })
            .unzip()
    }

    fn accuracy(m: &LdaModel, x: &[Vec<f64>], y: &[bool]) -> f64 {
        x.iter().zip(y).filter(|(r, &l)| (m.decision(r) > 0.0) == l).count() as f64 / y.len() as f64
    }

    #[test]
    fn separated_blobs() {
        let (xtr, ytr) = blobs(300, 1, 2.0);
        let (xte, yte) = blobs(300, 2, 2.0);
        let m = train_lda(&xtr, &ytr, 0.0, 0.0).unwrap();
        assert!(accuracy(&m, &xte, &yte) > 0.95);
    }

    #[test]
    fn full_shrinkage_is_diagonal_lda() {
        let (x, y) = blobs(120, 3, 1.0);
        let m = train_lda(&x, &y, 0.0, 1.0).unwrap();
        // independent diagonal computation
        let (n_pos, n_neg) = (y.iter().filter(|&&v| v).count() as f64, y.iter().filter(|&&v| !v).count() as f64);
        for j in 0..3 {
            let mp = x.iter().zip(&y).filter(|(_, &l)| l).map(|(r, _)| r[j]).sum::<f64>() / n_pos;
            let mn = x.iter().zip(&y).filter(|(_, &l)| !l).map(|(r, _)| r[j]).sum::<f64>() / n_neg;
            let ss: f64 = x.iter().zip(&y).map(|(r, &l)| (r[j] - if l { mp } else { mn }).powi(2)).sum();
            let var = ss / (y.len() as f64 - 2.0);
            assert!((m.coef[j] - (mp - mn) / var).abs() < 1e-10);
        }
    }

    #[test]
    fn huge_delta_falls_back_to_prior() {
        let (x, y) = blobs(90, 4, 1.0);
        let m = train_lda(&x, &y, 1e9, 0.1).unwrap();
        assert!(m.coef.iter().all(|&c| c == 0.0));
        // two thirds of the samples are positive
        assert!((m.bias - 2f64.ln()).abs() < 1e-12);
        assert!(x.iter().all(|r| m.decision(r) > 0.0));
    }

    #[test]
    fn collinear_features_need_shrinkage() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        assert!(matches!(train_lda(&x, &y, 0.0, 0.0), Err(Error::SingularMatrix(_))));
        assert!(train_lda(&x, &y, 0.0, 0.5).is_ok());
    }

    #[test]
    fn argument_checks() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![false, false, true, true];
        assert!(train_lda(&x, &y, -1.0, 0.5).is_err());
        assert!(train_lda(&x, &y, 0.0, 1.5).is_err());
        assert!(matches!(
            train_lda(&x, &[false, true, true, true], 0.0, 0.5),
            Err(Error::DegenerateData(_))
        ));
    }
}
