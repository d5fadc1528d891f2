//! Cross-view quadratic discriminant analysis: a discriminant subspace and
//! a metric kernel learned simultaneously from the generalized Rayleigh
//! quotient of extrinsic vs intrinsic pair-difference covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::metric::{
    generalized_symmetric_eigen, invert_spd, pair_difference_covariances,
};

/// Fits XQDA on projected training views. Returns (W, M).
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    xa: &DMatrix<f64>,
    ids_a: &[u32],
    xb: &DMatrix<f64>,
    ids_b: &[u32],
    lambda: f64,
    max_dim: usize,
    negative_ratio: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (sigma_i, sigma_e) =
        pair_difference_covariances(xa, ids_a, xb, ids_b, negative_ratio, seed)?;
    let (w, m, _) = solve(&sigma_i, &sigma_e, lambda, max_dim)?;
    Ok((w, m))
}

/// Core solver: ridge Σ_I, solve Σ_E w = λ Σ_I w, keep eigenvectors with
/// generalized eigenvalue > 1 (at least 1, at most `max_dim`), and form
/// M = (WᵀΣ_I W)⁻¹ − (WᵀΣ_E W)⁻¹. Returns (W, M, eigenvalues).
pub(crate) fn solve(
    sigma_i: &DMatrix<f64>,
    sigma_e: &DMatrix<f64>,
    lambda: f64,
    max_dim: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let p = sigma_i.nrows();
    let ridge = lambda * (sigma_i.trace() / p as f64).abs().max(1e-12);
    let mut sigma_i_r = sigma_i.clone();
    for i in 0..p {
        sigma_i_r[(i, i)] += ridge;
    }

    let (vals, vecs) = generalized_symmetric_eigen(sigma_e, &sigma_i_r)?;
    let above_one = vals.iter().filter(|&&v| v > 1.0).count();
    let r = above_one.clamp(1, max_dim.min(p));
    let w = vecs.columns(0, r).into_owned();

    let wsi = w.tr_mul(&(&sigma_i_r * &w));
    let wse = w.tr_mul(&(sigma_e * &w));
    let m = invert_spd(&wsi, "projected intrinsic covariance")?
        - invert_spd(&wse, "projected extrinsic covariance")?;
    let m = (&m + m.transpose()) * 0.5;
    Ok((w, m, vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MetricConfig, MetricKind};
    use crate::metric::{fit_metric, testdata, PairSet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(p, p) * 0.2
    }

    #[test]
    fn equal_covariances_trigger_dimension_floor() {
        // Σ_I = Σ_E: all generalized eigenvalues sit at 1/(1+λ·scale) < 1,
        // so the eigenvalue > 1 selection is empty and the floor keeps r = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = random_spd(&mut rng, 6);
        let (w, _, vals) = solve(&s, &s, 1e-3, 64).unwrap();
        assert_eq!(w.ncols(), 1);
        for v in vals.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-2);
            assert!(*v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn projection_is_sigma_i_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let sigma_i = random_spd(&mut rng, 8);
        // Extrinsic with genuinely larger spread in some directions.
        let boost = random_spd(&mut rng, 8) * 4.0;
        let sigma_e = &sigma_i + boost;
        let (w, _, _) = solve(&sigma_i, &sigma_e, 1e-3, 64).unwrap();
        assert!(w.ncols() >= 1);
        let p = sigma_i.nrows();
        let ridge = 1e-3 * (sigma_i.trace() / p as f64).max(1e-12);
        let mut sigma_i_r = sigma_i.clone();
        for i in 0..p {
            sigma_i_r[(i, i)] += ridge;
        }
        let gram = w.tr_mul(&(&sigma_i_r * &w));
        for i in 0..w.ncols() {
            for j in 0..w.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[(i, j)], expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn separable_clusters_give_perfect_held_in_ranking() {
        let (xa, ids_a, xb, ids_b) = testdata::two_view_clusters(21, 10, 1, 12, 0.05);
        let pairs = PairSet::new(xa.clone(), ids_a.clone(), xb.clone(), ids_b.clone()).unwrap();
        let cfg = MetricConfig {
            pca_dim: Some(8),
            ..Default::default()
        };
        let model = fit_metric(MetricKind::Xqda, &pairs, vec![0.0; 12], &cfg, 1).unwrap();
        // Rank-1 on the training data itself: every probe's best match is its
        // own identity.
        let mut correct = 0;
        for i in 0..xa.nrows() {
            let probe: Vec<f64> = (0..12).map(|c| xa[(i, c)]).collect();
            let mut best = (f64::INFINITY, 0usize);
            for j in 0..xb.nrows() {
                let gal: Vec<f64> = (0..12).map(|c| xb[(j, c)]).collect();
                let s = model.score(&probe, &gal).unwrap();
                if s < best.0 {
                    best = (s, j);
                }
            }
            if ids_b[best.1] == ids_a[i] {
                correct += 1;
            }
        }
        assert_eq!(correct, xa.nrows());
    }

    #[test]
    fn shuffled_labels_keep_eigenvalues_near_one() {
        use rand::seq::SliceRandom;
        let (xa, mut ids_a, xb, ids_b) = testdata::two_view_clusters(22, 200, 1, 4, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Shuffling one view's labels decouples "similar" pairs from true
        // identity, so the intrinsic and extrinsic difference distributions
        // coincide up to sampling noise.
        ids_a.shuffle(&mut rng);
        let (sigma_i, sigma_e) =
            pair_difference_covariances(&xa, &ids_a, &xb, &ids_b, 10, 3).unwrap();
        let (_, _, vals) = solve(&sigma_i, &sigma_e, 1e-3, 64).unwrap();
        for v in vals.iter() {
            assert!(*v > 0.5 && *v < 2.0, "eigenvalue {v} far from 1");
        }
    }

    use crate::metric::pair_difference_covariances;
}
