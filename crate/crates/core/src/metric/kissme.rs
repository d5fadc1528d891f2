//! KISSME: metric from equivalence constraints,
//! M = Σ_similar⁻¹ − Σ_dissimilar⁻¹ over pair-difference covariances.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::metric::{invert_spd, pair_difference_covariances};

/// Fits KISSME on projected training views. Returns (W, M) where W is empty
/// (identity projection) and M is the difference of inverse covariances.
pub(crate) fn fit(
    xa: &DMatrix<f64>,
    ids_a: &[u32],
    xb: &DMatrix<f64>,
    ids_b: &[u32],
    negative_ratio: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (sigma_s, sigma_d) =
        pair_difference_covariances(xa, ids_a, xb, ids_b, negative_ratio, seed)?;
    let m = from_covariances(&sigma_s, &sigma_d)?;
    Ok((DMatrix::zeros(0, 0), m))
}

pub(crate) fn from_covariances(
    sigma_s: &DMatrix<f64>,
    sigma_d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = invert_spd(sigma_s, "similar-pair covariance")?
        - invert_spd(sigma_d, "dissimilar-pair covariance")?;
    Ok((&m + m.transpose()) * 0.5)
}
