use crate::error::{Error, Result};

/// Per-column z-scoring fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant column.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Argument(format!(
                "standardization needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Argument("rows have different lengths".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // treat round-off noise on a constant column as constant
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_column_maps_to_zero() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert!(s.transform(&rows).iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn two_point_column() {
        let rows = vec![vec![0.0], vec![2.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.transform(&rows), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn transformed_training_columns_are_standard() {
        let mut rng = crate::rng::rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                vec![
                    rng.gen_range(-3.0..9.0),
                    rng.gen_range(100.0..101.0) * 1e3,
                    rng.gen::<f64>().powi(3),
                ]
            })
            .collect();
        let s = Standardizer::fit(&rows).unwrap();
        let z = s.transform(&rows);
        for j in 0..3 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / 200.0;
            let sd = (z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 200.0).sqrt();
            assert!(mean.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn needs_two_rows() {
        assert!(matches!(Standardizer::fit(&[vec![1.0]]), Err(Error::Argument(_))));
    }
}
