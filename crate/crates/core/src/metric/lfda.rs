//! Local Fisher discriminant analysis: Fisher scatter matrices weighted by
//! a k-nearest-neighbor affinity with local scaling, solved as a generalized
//! eigenproblem. Distances in the projected space are Euclidean.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::generalized_symmetric_eigen;

/// Fits LFDA on row samples with integer class labels. Returns the p×r
/// projection with orthonormal columns.
pub(crate) fn fit(
    x: &DMatrix<f64>,
    labels: &[u32],
    target: usize,
    knn: usize,
) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    if labels.len() != n {
        return Err(Error::Contract("label count does not match sample count".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData("LFDA needs at least 2 samples".into()));
    }
    let r = target.clamp(1, p);

    let mut classes: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    for (label, members) in &classes {
        if members.len() == 1 {
            log::warn!("LFDA: class {label} has a single sample; it contributes only to the between-class scatter");
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut w_within = DMatrix::zeros(n, n);
    // Different-class pairs carry weight 1/n in the between-class affinity.
    let mut w_between = DMatrix::from_element(n, n, inv_n);

    for members in classes.values() {
        let nc = members.len();
        if nc < 2 {
            // Leave the 1/n between-class weights toward other classes; the
            // (single) diagonal entry never enters a difference term.
            continue;
        }
        // Pairwise distances within the class.
        let mut dist = DMatrix::zeros(nc, nc);
        for a in 0..nc {
            for b in (a + 1)..nc {
                let d = (x.row(members[a]) - x.row(members[b])).norm();
                dist[(a, b)] = d;
                dist[(b, a)] = d;
            }
        }
        // Local scaling: distance to the k-th nearest same-class neighbor.
        let k = knn.min(nc - 1).max(1);
        let mut scale = vec![0.0f64; nc];
        for a in 0..nc {
            let mut ds: Vec<f64> = (0..nc).filter(|&b| b != a).map(|b| dist[(a, b)]).collect();
            ds.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
            scale[a] = ds[k - 1].max(1e-12);
        }
        for a in 0..nc {
            for b in 0..nc {
                if a == b {
                    continue;
                }
                let d = dist[(a, b)];
                let affinity = (-d * d / (scale[a] * scale[b])).exp();
                let (i, j) = (members[a], members[b]);
                w_within[(i, j)] = affinity / nc as f64;
                w_between[(i, j)] = affinity * (inv_n - 1.0 / nc as f64);
            }
        }
    }

    let s_within = scatter_from_affinity(x, &w_within);
    let s_between = scatter_from_affinity(x, &w_between);

    let mut s_within_r = s_within;
    let ridge = 1e-3 * (s_within_r.trace() / p as f64).abs().max(1e-12);
    for i in 0..p {
        s_within_r[(i, i)] += ridge;
    }

    let (_, vecs) = generalized_symmetric_eigen(&s_between, &s_within_r)?;
    let top = vecs.columns(0, r).into_owned();
    // Final orthonormalization of the projection columns.
    let qr = top.qr();
    Ok(qr.q().columns(0, r).into_owned())
}

/// S = ½ Σ_ij W_ij (xi − xj)(xi − xj)ᵀ = Xᵀ (D − W) X with D = diag(W·1).
fn scatter_from_affinity(x: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut laplacian = -w.clone();
    for i in 0..n {
        let row_sum: f64 = w.row(i).iter().sum();
        laplacian[(i, i)] += row_sum;
    }
    let s = x.tr_mul(&(&laplacian * x));
    (&s + s.transpose()) * 0.5
}
