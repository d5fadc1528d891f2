//! PCA in the d ≫ N regime via the N×N Gram-matrix eigendecomposition.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Orthonormal principal basis plus the data mean.
#[derive(Debug, Clone)]
pub struct PcaTransform {
    pub mean: DVector<f64>,
    /// d×p, columns orthonormal, ordered by descending eigenvalue.
    pub basis: DMatrix<f64>,
}

impl PcaTransform {
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects one raw vector: Uᵀ(x − mean).
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(&(x - &self.mean))
    }

    /// Projects a vector that is already in the model's normalized space
    /// (mean is still removed; PCA mean of normalized data is generally
    /// nonzero).
    pub fn project_centered_unit(&self, x: &DVector<f64>) -> DVector<f64> {
        self.project(x)
    }

    /// Projects each row of an N×d matrix, returning N×p.
    pub fn project_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let p = self.output_dim();
        let mut out = DMatrix::zeros(n, p);
        for i in 0..n {
            let proj = self.project(&x.row(i).transpose());
            out.row_mut(i).copy_from(&proj.transpose());
        }
        out
    }

    /// Back-projection U·z + mean (used by reconstruction tests).
    pub fn reconstruct(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.basis * z + &self.mean
    }
}

/// Fits PCA on the rows of `x` (N samples × d features). `target` must
/// satisfy target ≤ min(N−1, d); components whose Gram eigenvalue is
/// numerically zero are dropped.
pub fn fit_pca(x: &DMatrix<f64>, target: usize) -> Result<PcaTransform> {
    let n = x.nrows();
    let d = x.ncols();
    if n < 2 {
        return Err(Error::InsufficientData("PCA needs at least 2 samples".into()));
    }
    let max_dim = (n - 1).min(d);
    if target == 0 || target > max_dim {
        return Err(Error::Config(format!(
            "PCA dimension {target} out of range (1..={max_dim} for {n} samples of dim {d})"
        )));
    }

    let mut mean = DVector::zeros(d);
    for i in 0..n {
        mean += x.row(i).transpose();
    }
    mean /= n as f64;
    let mut centered = x.clone();
    for i in 0..n {
        let row = centered.row(i) - mean.transpose();
        centered.row_mut(i).copy_from(&row);
    }

    // Gram matrix G = Xc Xcᵀ, upper triangle rows in parallel.
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = centered.row(i);
            (i..n).map(|j| ri.dot(&centered.row(j))).collect()
        })
        .collect();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for (off, &v) in rows[i].iter().enumerate() {
            gram[(i, i + off)] = v;
            gram[(i + off, i)] = v;
        }
    }

    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let max_eig = eig.eigenvalues[order[0]].max(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .take(target)
        .filter(|&i| eig.eigenvalues[i] > max_eig * 1e-12 && eig.eigenvalues[i] > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(Error::Numerical("PCA found no positive-variance directions".into()));
    }
    if keep.len() < target {
        log::warn!(
            "PCA: requested {target} components, data rank supports only {}",
            keep.len()
        );
    }

    // Basis column j = Xcᵀ v_j / sqrt(λ_j); columns computed in parallel.
    let cols: Vec<DVector<f64>> = keep
        .par_iter()
        .map(|&idx| {
            let lambda = eig.eigenvalues[idx];
            let v = eig.eigenvectors.column(idx);
            let mut col = DVector::zeros(d);
            for i in 0..n {
                col.axpy(v[i], &centered.row(i).transpose(), 1.0);
            }
            col / lambda.sqrt()
        })
        .collect();
    let mut basis = DMatrix::zeros(d, cols.len());
    for (j, col) in cols.iter().enumerate() {
        basis.set_column(j, col);
    }

    Ok(PcaTransform { mean, basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_reconstruction_of_low_rank_data() {
        // Rank-2 data, p=2 → reconstruction error ≤ 1e-10.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b1: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b2: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = DMatrix::from_fn(30, 12, |r, c| {
            let (a, b) = ((r as f64 * 0.37).sin() * 2.0, (r as f64 * 0.61).cos());
            a * b1[c] + b * b2[c]
        });
        let t = fit_pca(&x, 2).unwrap();
        for i in 0..30 {
            let row = x.row(i).transpose();
            let rec = t.reconstruct(&t.project(&row));
            assert!((rec - row).norm() <= 1e-10);
        }
    }

    #[test]
    fn white_data_projection_preserves_distances() {
        // Full-dimensional white data: PCA to full rank is a rigid rotation,
        // so pairwise distances are preserved and reconstruction is exact.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(40, 5, |_, _| rng.random_range(-1.0..1.0f64));
        let t = fit_pca(&x, 5).unwrap();
        let p0 = t.project(&x.row(0).transpose());
        let p1 = t.project(&x.row(1).transpose());
        let orig = (x.row(0) - x.row(1)).norm();
        assert_relative_eq!((p0.clone() - p1).norm(), orig, epsilon = 1e-10);
        let rec = t.reconstruct(&p0);
        assert!((rec - x.row(0).transpose()).norm() <= 1e-10);
    }

    #[test]
    fn basis_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(25, 100, |_, _| rng.random_range(-1.0..1.0f64));
        let t = fit_pca(&x, 10).unwrap();
        let gram = t.basis.tr_mul(&t.basis);
        for i in 0..10 {
            for j in 0..10 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[(i, j)], expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn gram_trick_matches_direct_covariance_pca() {
        // Direct-eigendecomposition oracle at small d: eigenvectors of the
        // (N−1)-scaled covariance, compared up to per-component sign.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100;
        let d = 30;
        let p = 10;
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0f64));
        let t = fit_pca(&x, p).unwrap();

        let mut mean = DVector::zeros(d);
        for i in 0..n {
            mean += x.row(i).transpose();
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            let dev = x.row(i).transpose() - &mean;
            cov += &dev * dev.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

        for j in 0..p {
            let direct = eig.eigenvectors.column(order[j]);
            let gram = t.basis.column(j);
            // Align sign on the largest-magnitude coefficient of `direct`.
            let pivot = (0..d)
                .max_by(|&a, &b| direct[a].abs().partial_cmp(&direct[b].abs()).unwrap())
                .unwrap();
            let sign = (direct[pivot] * gram[pivot]).signum();
            for i in 0..d {
                assert_relative_eq!(gram[i] * sign, direct[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_dimension() {
        let x = DMatrix::zeros(10, 20);
        assert!(matches!(fit_pca(&x, 10), Err(Error::Config(_))));
        assert!(matches!(fit_pca(&x, 0), Err(Error::Config(_))));
    }
}
