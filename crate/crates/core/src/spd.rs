//! Gaussian ↔ SPD embedding, matrix logarithm, and half-vectorization.
//!
//! An n-dimensional Gaussian (μ, Σ) is lifted into the cone of
//! (n+1)×(n+1) symmetric positive-definite matrices with unit determinant,
//! flattened onto the tangent space at the identity via the matrix
//! logarithm, and packed into a Euclidean vector whose inner product equals
//! the Frobenius inner product of the underlying symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Length of the flattened vector for an n-dimensional Gaussian:
/// (n² + 3n)/2 + 1, i.e. the half-vectorization length of an (n+1)×(n+1)
/// symmetric matrix.
pub fn tangent_dim(n: usize) -> usize {
    (n * n + 3 * n) / 2 + 1
}

/// Half-vectorization length of a symmetric d×d matrix.
pub fn half_vec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Contract(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Errors unless max|A - Aᵀ| ≤ 1e-12 · max|A|.
fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(m, what)?;
    let amax = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > 1e-12 * amax {
        return Err(Error::SymmetryViolation(format!(
            "{what}: max asymmetry {worst:.3e} exceeds 1e-12 relative tolerance"
        )));
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Mean and covariance of one multivariate Gaussian.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianModel {
    /// Builds a Gaussian; `cov` must be symmetric within 1e-12 relative
    /// tolerance (it is symmetrized internally to wash out rounding).
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianModel> {
        check_symmetric(&cov, "covariance")?;
        if mean.len() != cov.nrows() {
            return Err(Error::Contract(format!(
                "mean length {} does not match covariance dimension {}",
                mean.len(),
                cov.nrows()
            )));
        }
        Ok(GaussianModel {
            mean,
            cov: symmetrize(&cov),
        })
    }

    /// Sample mean and sample covariance (N−1 denominator) over rows.
    pub fn from_samples(samples: &DMatrix<f64>) -> Result<GaussianModel> {
        let n = samples.nrows();
        let d = samples.ncols();
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 samples for a covariance, got {n}"
            )));
        }
        let mut mean = DVector::zeros(d);
        for i in 0..n {
            mean += samples.row(i).transpose();
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            let dev = samples.row(i).transpose() - &mean;
            // Accumulate the upper triangle, mirror at the end.
            for r in 0..d {
                for c in r..d {
                    cov[(r, c)] += dev[r] * dev[c];
                }
            }
        }
        let denom = (n - 1) as f64;
        for r in 0..d {
            for c in r..d {
                let v = cov[(r, c)] / denom;
                cov[(r, c)] = v;
                cov[(c, r)] = v;
            }
        }
        Ok(GaussianModel { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Returns a copy with the covariance ridge-regularized.
    pub fn regularized(&self, eps_rel: f64) -> Result<GaussianModel> {
        let cov = regularize_covariance(&self.cov, eps_rel)?;
        Ok(GaussianModel {
            mean: self.mean.clone(),
            cov,
        })
    }
}

/// Symmetric matrix with a certified positive spectrum.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    data: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive-definiteness (via Cholesky).
    pub fn new(m: DMatrix<f64>) -> Result<SpdMatrix> {
        check_symmetric(&m, "SPD candidate")?;
        let sym = symmetrize(&m);
        if nalgebra::Cholesky::new(sym.clone()).is_none() {
            return Err(Error::NotSpd(
                "Cholesky factorization failed; matrix is singular or indefinite".into(),
            ));
        }
        Ok(SpdMatrix { data: sym })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Flattened symmetric matrix in orthonormal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    values: DVector<f64>,
    source_dim: usize,
}

impl TangentVector {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Dimension d of the symmetric matrix this vector was packed from.
    pub fn source_dim(&self) -> usize {
        self.source_dim
    }
}

/// Adds eps_rel · max(trace/n, 1e-8) to the diagonal. The floor keeps the
/// ridge positive for all-zero covariances (constant patches).
pub fn regularize_covariance(sigma: &DMatrix<f64>, eps_rel: f64) -> Result<DMatrix<f64>> {
    check_symmetric(sigma, "covariance")?;
    if eps_rel <= 0.0 {
        return Err(Error::Config(format!(
            "eps_rel must be positive, got {eps_rel}"
        )));
    }
    let n = sigma.nrows() as f64;
    let ridge = eps_rel * (sigma.trace() / n).max(1e-8);
    let mut out = symmetrize(sigma);
    for i in 0..sigma.nrows() {
        out[(i, i)] += ridge;
    }
    Ok(out)
}

/// Embeds an n-dim Gaussian as the (n+1)×(n+1) SPD matrix
/// |Σ|^(−1/(n+1)) · [[Σ + μμᵀ, μ], [μᵀ, 1]], which has determinant 1.
///
/// The determinant power is evaluated in log space so large-dimension
/// covariances with tiny eigenvalues cannot underflow.
pub fn embed_gaussian(g: &GaussianModel) -> Result<SpdMatrix> {
    let n = g.dim();
    let chol = nalgebra::Cholesky::new(g.cov.clone()).ok_or_else(|| {
        Error::NotSpd("covariance is singular or indefinite; regularize first".into())
    })?;
    let log_det: f64 = (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
    let scale = (-log_det / (n as f64 + 1.0)).exp();

    let mut block = DMatrix::zeros(n + 1, n + 1);
    for r in 0..n {
        for c in 0..n {
            block[(r, c)] = g.cov[(r, c)] + g.mean[r] * g.mean[c];
        }
        block[(r, n)] = g.mean[r];
        block[(n, r)] = g.mean[r];
    }
    block[(n, n)] = 1.0;
    SpdMatrix::new(block * scale)
}

/// Matrix logarithm of an SPD matrix via symmetric eigendecomposition:
/// U diag(ln λᵢ) Uᵀ. The tangency point is the identity.
pub fn log_map(s: &SpdMatrix) -> Result<DMatrix<f64>> {
    log_symmetric(s.as_matrix())
}

/// Tangent-space coordinates of `s` at an arbitrary base point:
/// log(T^(−1/2) S T^(−1/2)). With `base` = identity this is `log_map`.
pub fn log_map_at(s: &SpdMatrix, base: &SpdMatrix) -> Result<DMatrix<f64>> {
    if base.dim() != s.dim() {
        return Err(Error::Contract(format!(
            "base dimension {} does not match input dimension {}",
            base.dim(),
            s.dim()
        )));
    }
    let inv_sqrt = invsqrt_symmetric(base.as_matrix())?;
    let whitened = symmetrize(&(&inv_sqrt * s.as_matrix() * &inv_sqrt));
    log_symmetric(&whitened)
}

fn eigen_decompose(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

fn log_symmetric(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = eigen_decompose(m);
    let mut log_vals = DVector::zeros(vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::ManifoldViolation(format!(
                "eigenvalue {v:.3e} is not positive; cannot take matrix logarithm"
            )));
        }
        log_vals[i] = v.ln();
    }
    let rebuilt = &vecs * DMatrix::from_diagonal(&log_vals) * vecs.transpose();
    Ok(symmetrize(&rebuilt))
}

fn invsqrt_symmetric(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = eigen_decompose(m);
    let mut inv_sqrt = DVector::zeros(vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::ManifoldViolation(format!(
                "eigenvalue {v:.3e} is not positive; cannot take inverse square root"
            )));
        }
        inv_sqrt[i] = 1.0 / v.sqrt();
    }
    Ok(symmetrize(
        &(&vecs * DMatrix::from_diagonal(&inv_sqrt) * vecs.transpose()),
    ))
}

/// Matrix exponential of a symmetric matrix: U diag(exp λᵢ) Uᵀ.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(a, "matrix exponential input")?;
    let (vals, vecs) = eigen_decompose(a);
    let exp_vals = vals.map(f64::exp);
    Ok(symmetrize(
        &(&vecs * DMatrix::from_diagonal(&exp_vals) * vecs.transpose()),
    ))
}

/// Packs a symmetric d×d matrix into a d(d+1)/2 vector: row-major upper
/// triangle, off-diagonal entries scaled by √2 so that
/// ⟨vec(A), vec(B)⟩ = ⟨A, B⟩_F.
pub fn half_vectorize(a: &DMatrix<f64>) -> Result<TangentVector> {
    check_symmetric(a, "half-vectorization input")?;
    let d = a.nrows();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut values = DVector::zeros(half_vec_len(d));
    let mut k = 0;
    for r in 0..d {
        for c in r..d {
            values[k] = if r == c { a[(r, c)] } else { sqrt2 * a[(r, c)] };
            k += 1;
        }
    }
    Ok(TangentVector {
        values,
        source_dim: d,
    })
}

/// Full flattening of a Gaussian: embed → log → half-vectorize.
/// Output length is (n² + 3n)/2 + 1 for an n-dimensional input.
pub fn gaussian_to_vector(g: &GaussianModel) -> Result<TangentVector> {
    gaussian_to_vector_at(g, None)
}

/// Same as [`gaussian_to_vector`] with an explicit tangency point for the
/// logarithm; `None` uses the identity.
pub fn gaussian_to_vector_at(
    g: &GaussianModel,
    tangency: Option<&SpdMatrix>,
) -> Result<TangentVector> {
    let embedded = embed_gaussian(g)?;
    let log = match tangency {
        None => log_map(&embedded)?,
        Some(base) => log_map_at(&embedded, base)?,
    };
    let v = half_vectorize(&log)?;
    debug_assert_eq!(v.len(), tangent_dim(g.dim()));
    Ok(v)
}
