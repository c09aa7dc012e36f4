use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};

/// Running mean and population variance, merged batch-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub clip: f64,
}

const EPS: f64 = 1e-8;

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        RunningNorm {
            count: 0.0,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            clip: 10.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let d = self.dim();
        for row in batch {
            ensure_len("normalised observation", d, row.len())?;
        }
        let n = batch.len() as f64;
        let mut b_mean = vec![0.0; d];
        for row in batch {
            for (m, x) in b_mean.iter_mut().zip(row) {
                *m += x / n;
            }
        }
        let mut b_var = vec![0.0; d];
        for row in batch {
            for ((v, x), m) in b_var.iter_mut().zip(row).zip(&b_mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let total = self.count + n;
        for j in 0..d {
            let delta = b_mean[j] - self.mean[j];
            let m2 = self.var[j] * self.count + b_var[j] * n + delta * delta * self.count * n / total;
            self.mean[j] += delta * n / total;
            self.var[j] = m2 / total;
        }
        self.count = total;
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("normalised observation", self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(v, (m, s2))| ((v - m) / (s2 + EPS).sqrt()).clamp(-self.clip, self.clip))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_pass(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let var = (0..d)
            .map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n)
            .collect();
        (mean, var)
    }

    #[test]
    fn streamed_scalars() {
        let mut norm = RunningNorm::new(1);
        for x in [1.0, 2.0, 3.0] {
            norm.update(&[vec![x]]).unwrap();
        }
        assert!((norm.mean[0] - 2.0).abs() < 1e-12);
        assert!((norm.var[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(norm.count, 3.0);
    }

    #[test]
    fn empty_batch_is_noop() {
        let mut norm = RunningNorm::new(2);
        norm.update(&[vec![1.0, 5.0]]).unwrap();
        let before = norm.clone();
        norm.update(&[]).unwrap();
        assert_eq!(norm, before);
    }

    #[test]
    fn normalisation_clips() {
        let mut norm = RunningNorm::new(1);
        norm.update(&[vec![0.0], vec![0.0], vec![1e-3]]).unwrap();
        assert_eq!(norm.normalize(&[1e6]).unwrap(), vec![10.0]);
        assert!(norm.normalize(&[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn merged_batches_match_two_pass(
            a in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..20),
            b in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..20),
        ) {
            let mut norm = RunningNorm::new(3);
            norm.update(&a).unwrap();
            norm.update(&b).unwrap();
            let all: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
            let (mean, var) = two_pass(&all);
            for j in 0..3 {
                prop_assert!((norm.mean[j] - mean[j]).abs() < 1e-9);
                prop_assert!((norm.var[j] - var[j]).abs() < 1e-9 * var[j].max(1.0));
                prop_assert!(norm.var[j] >= 0.0);
            }
        }
    }
}
