//! Principal component analysis of demonstration actions.
//!
//! The covariance of the mean-centred actions (normalised by `N - 1`) is
//! diagonalised with cyclic Jacobi rotations. Components come back sorted by
//! explained variance, with ties kept in original column order and each
//! component's sign fixed so that its largest-magnitude entry is positive.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Fraction of total variance per component, descending.
    pub explained_variance_ratio: Vec<f64>,
    /// Covariance eigenvalues matching `explained_variance_ratio`.
    pub explained_variance: Vec<f64>,
    /// Orthonormal components, one per row.
    pub components: Matrix,
    pub mean: Vec<f64>,
}

impl PcaResult {
    pub fn cumulative(&self) -> Vec<f64> {
        self.explained_variance_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    /// Coordinates of `x` in the component basis.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        (0..self.components.rows())
            .map(|k| crate::linalg::dot(self.components.row(k), &centred))
            .collect()
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (k, c) in coords.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.components.row(k)) {
                *o += c * w;
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 100;

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix.
pub fn symmetric_eigen(matrix: &Matrix) -> (Vec<f64>, Matrix) {
    let n = matrix.rows();
    assert_eq!(n, matrix.cols(), "symmetric_eigen needs a square matrix");
    let mut a = matrix.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Sample covariance (`1 / (N - 1)`) of the rows of `data`, plus the mean.
pub fn covariance(data: &Matrix) -> (Matrix, Vec<f64>) {
    let (n, d) = data.shape();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(data.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = data.row(i);
        for j in 0..d {
            let cj = row[j] - mean[j];
            for k in j..d {
                cov[(j, k)] += cj * (row[k] - mean[k]);
            }
        }
    }
    for j in 0..d {
        for k in j..d {
            let v = cov[(j, k)] / (n as f64 - 1.0);
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }
    (cov, mean)
}

pub fn compute_pca(actions: &Matrix) -> Result<PcaResult> {
    if actions.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca needs at least 2 samples, got {}",
            actions.rows()
        )));
    }
    if actions.cols() == 0 {
        return Err(Error::InvalidArgument("pca needs at least one column".into()));
    }
    if !actions.is_finite() {
        return Err(Error::NonFinite {
            context: "pca input".into(),
        });
    }
    let (cov, mean) = covariance(actions);
    let (values, vectors) = symmetric_eigen(&cov);
    let d = values.len();

    let mut order: Vec<usize> = (0..d).collect();
    // stable: equal eigenvalues keep column order
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());

    let variances: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let total: f64 = variances.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument(
            "actions have zero variance; nothing to analyse".into(),
        ));
    }
    let mut components = Matrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        let col = vectors.column(i);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (j, x) in col.iter().enumerate() {
            components[(k, j)] = sign * x;
        }
    }
    Ok(PcaResult {
        explained_variance_ratio: variances.iter().map(|v| v / total).collect(),
        explained_variance: variances,
        components,
        mean,
    })
}

/// Latent dimension used throughout: half the action dimension, rounded up.
pub fn suggest_latent_dim(a_full: usize) -> usize {
    a_full.div_ceil(2).max(1)
}

/// Smallest number of leading components whose cumulative ratio reaches
/// `threshold`.
pub fn dims_for_variance(pca: &PcaResult, threshold: f64) -> usize {
    // Cumulative sums of ratios that should total 1 can land a few ulps short.
    const SLACK: f64 = 1e-12;
    let mut acc = 0.0;
    for (k, r) in pca.explained_variance_ratio.iter().enumerate() {
        acc += r;
        if acc >= threshold - SLACK {
            return k + 1;
        }
    }
    pca.explained_variance_ratio.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ratios(r: &[f64]) -> PcaResult {
        PcaResult {
            explained_variance_ratio: r.to_vec(),
            explained_variance: r.to_vec(),
            components: Matrix::identity(r.len()),
            mean: vec![0.0; r.len()],
        }
    }

    #[test]
    fn rank_one_data_has_unit_first_ratio() {
        let dir = [0.3, -1.2, 0.5];
        let offset = [1.0, 2.0, -0.5];
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|t| {
                let s = (t as f64 * 0.7).sin() * 2.0;
                dir.iter().zip(&offset).map(|(d, o)| o + s * d).collect()
            })
            .collect();
        let pca = compute_pca(&Matrix::from_rows(&rows)).unwrap();
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        assert_eq!(dims_for_variance(&pca, 0.97), 1);
    }

    #[test]
    fn dims_for_hand_ratios() {
        let pca = ratios(&[0.6, 0.3, 0.1]);
        assert_eq!(dims_for_variance(&pca, 0.97), 3);
        assert_eq!(dims_for_variance(&pca, 0.9), 2);
        assert_eq!(dims_for_variance(&pca, 0.5), 1);
        let sparse = ratios(&[0.7, 0.3, 0.0, 0.0]);
        assert_eq!(dims_for_variance(&sparse, 1.0), 2);
    }

    #[test]
    fn latent_dim_rounds_up() {
        assert_eq!(suggest_latent_dim(12), 6);
        assert_eq!(suggest_latent_dim(7), 4);
        assert_eq!(suggest_latent_dim(1), 1);
    }

    #[test]
    fn isotropic_gaussian_is_nearly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..20_000)
            .map(|_| (0..4).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let pca = compute_pca(&Matrix::from_rows(&rows)).unwrap();
        for r in &pca.explained_variance_ratio {
            assert!((r - 0.25).abs() < 0.05, "{:?}", pca.explained_variance_ratio);
        }
    }

    #[test]
    fn rejects_short_and_non_finite_input() {
        assert!(compute_pca(&Matrix::from_rows(&[[1.0, 2.0]])).is_err());
        assert!(compute_pca(&Matrix::from_rows(&[[1.0, f64::NAN], [0.0, 1.0]])).is_err());
    }

    #[test]
    fn components_are_orthonormal_with_fixed_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..5).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let pca = compute_pca(&Matrix::from_rows(&rows)).unwrap();
        let c = &pca.components;
        let gram = c.matmul(&c.transpose());
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-9);
            }
            let pivot = c.row(i).iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot > 0.0);
        }
        let s: f64 = pca.explained_variance_ratio.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(pca.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
    }
}
