use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Burr Type XII distribution with scale `alpha` (seconds) and shapes `c`, `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurrParams {
    pub alpha: f64,
    pub c: f64,
    pub k: f64,
}

impl BurrParams {
    /// Fit to the annotated wheeze durations of the public corpus.
    pub const WHEEZE_DURATIONS: BurrParams = BurrParams {
        alpha: 0.2266,
        c: 4.1906,
        k: 0.3029,
    };

    pub fn new(alpha: f64, c: f64, k: f64) -> Result<Self> {
        let p = BurrParams { alpha, c, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.alpha) && ok(self.c) && ok(self.k) {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "Burr parameters must be positive, got alpha={} c={} k={}",
                self.alpha, self.c, self.k
            )))
        }
    }

    /// `(k c / alpha) (x/alpha)^(c-1) / (1 + (x/alpha)^c)^(k+1)`
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Argument(format!("Burr density needs x > 0, got {x}")));
        }
        let z = x / self.alpha;
        let zc = z.powf(self.c);
        Ok((self.k * self.c / self.alpha) * z.powf(self.c - 1.0) / (1.0 + zc).powf(self.k + 1.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let zc = (x / self.alpha).powf(self.c);
        // 1 - (1+zc)^-k without cancellation for small zc
        -(-self.k * zc.ln_1p()).exp_m1()
    }

    pub fn inverse_cdf(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Argument(format!("quantile must lie in [0, 1), got {q}")));
        }
        // (1-q)^(-1/k) - 1, computed as expm1(-ln(1-q)/k)
        let inner = (-(-q).ln_1p() / self.k).exp_m1();
        Ok(self.alpha * inner.powf(1.0 / self.c))
    }

    /// Location of the density maximum (0 when `c <= 1`).
    pub fn mode(&self) -> f64 {
        if self.c <= 1.0 {
            return 0.0;
        }
        self.alpha * ((self.c - 1.0) / (self.c * self.k + 1.0)).powf(1.0 / self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: BurrParams = BurrParams::WHEEZE_DURATIONS;

    /// Adaptive Simpson on [a, b].
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    #[test]
    fn density_integrates_to_one() {
        // substitute x = t/(1-t) to map (0, inf) onto (0, 1)
        let g = |t: f64| {
            if t <= 0.0 || t >= 1.0 {
                return 0.0;
            }
            let x = t / (1.0 - t);
            P.pdf(x).unwrap() / ((1.0 - t) * (1.0 - t))
        };
        let total = simpson(&g, 0.0, 1.0, 1e-12, 50);
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn mode_matches_numeric_maximum() {
        // golden-section search on the density
        let (mut a, mut b) = (0.01, 2.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = b - r * (b - a);
            let x2 = a + r * (b - a);
            if P.pdf(x1).unwrap() < P.pdf(x2).unwrap() {
                a = x1;
            } else {
                b = x2;
            }
        }
        let numeric = 0.5 * (a + b);
        assert!((P.mode() - numeric).abs() < 1e-6);
        assert!((P.mode() - 0.2458).abs() < 1e-4);
        let peak = P.pdf(0.2458).unwrap();
        assert!(peak > P.pdf(0.1).unwrap() && peak > P.pdf(1.0).unwrap());
    }

    #[test]
    fn median_matches_bisection() {
        let (mut lo, mut hi) = (1e-9, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if P.cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let median = P.inverse_cdf(0.5).unwrap();
        assert!((median - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!((median - 0.3814).abs() < 1e-4);
    }

    #[test]
    fn inverse_cdf_edges() {
        assert_eq!(P.inverse_cdf(0.0).unwrap(), 0.0);
        assert!(P.inverse_cdf(1.0).is_err());
        assert!(P.inverse_cdf(-0.1).is_err());
        assert!(P.pdf(0.0).is_err());
        assert!(P.pdf(-1.0).is_err());
        assert!(BurrParams::new(0.0, 1.0, 1.0).is_err());
        assert!(BurrParams::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn cdf_inverts_quantile() {
        for i in 0..1000 {
            let q = i as f64 / 1000.0;
            let x = P.inverse_cdf(q).unwrap();
            assert!((P.cdf(x) - q).abs() < 1e-10, "q={q}");
        }
    }

    proptest::proptest! {
        #[test]
        fn quantile_is_monotone(alpha in 0.01f64..10.0, c in 0.1f64..10.0, k in 0.05f64..5.0) {
            let p = BurrParams::new(alpha, c, k).unwrap();
            proptest::prop_assert!(p.inverse_cdf(0.25).unwrap() < p.inverse_cdf(0.75).unwrap());
        }
    }
}
