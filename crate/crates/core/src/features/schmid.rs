//! Schmid filter bank: isotropic "Gabor-like" kernels combining a radial
//! harmonic with a Gaussian envelope, F(r) = F₀ + cos(2πrτ/σ)·exp(−r²/2σ²).
//! F₀ is chosen numerically so every kernel has zero DC response.

use ndarray::Array2;

use crate::config::{SchmidVariant, SCHMID_PARAMS};

/// The 13 zero-DC, L2-normalized kernels.
#[derive(Debug, Clone)]
pub struct SchmidFilterBank {
    kernels: Vec<Array2<f64>>,
    params: Vec<(f64, u32)>,
}

impl SchmidFilterBank {
    /// Builds the bank on square supports of radius ⌈3σ⌉.
    pub fn build(variant: SchmidVariant) -> SchmidFilterBank {
        let kernels = SCHMID_PARAMS
            .iter()
            .map(|&(sigma, tau)| build_kernel(sigma, tau, variant))
            .collect();
        SchmidFilterBank {
            kernels,
            params: SCHMID_PARAMS.to_vec(),
        }
    }

    pub fn kernels(&self) -> &[Array2<f64>] {
        &self.kernels
    }

    pub fn params(&self) -> &[(f64, u32)] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

fn build_kernel(sigma: f64, tau: u32, variant: SchmidVariant) -> Array2<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let size = 2 * radius + 1;
    let freq = match variant {
        SchmidVariant::TwoPi => 2.0 * std::f64::consts::PI,
        SchmidVariant::Classical => std::f64::consts::PI,
    };
    let mut taps = Array2::zeros((size, size));
    for r in 0..size {
        for c in 0..size {
            let dy = r as f64 - radius as f64;
            let dx = c as f64 - radius as f64;
            let rho = (dx * dx + dy * dy).sqrt();
            taps[[r, c]] =
                (freq * rho * tau as f64 / sigma).cos() * (-rho * rho / (2.0 * sigma * sigma)).exp();
        }
    }
    let count = (size * size) as f64;
    let f0 = -taps.sum() / count;
    taps.mapv_inplace(|v| v + f0);
    let norm = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    taps.mapv_inplace(|v| v / norm);
    // Second DC pass removes the rounding residue of the first.
    let residue = taps.sum() / count;
    taps.mapv_inplace(|v| v - residue);
    taps
}

/// Index reflected into [0, len) by mirroring at the borders
/// (the edge sample is duplicated).
pub(crate) fn reflect(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// 2-D correlation with reflect padding. The Schmid kernels are radially
/// symmetric, so correlation and convolution coincide.
pub(crate) fn convolve_reflect(src: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (h, w) = src.dim();
    let ks = kernel.nrows();
    let rad = ks / 2;
    let pw = w + 2 * rad;
    let ph = h + 2 * rad;
    let mut padded = vec![0.0f64; ph * pw];
    for pr in 0..ph {
        let sr = reflect(pr as isize - rad as isize, h);
        for pc in 0..pw {
            let sc = reflect(pc as isize - rad as isize, w);
            padded[pr * pw + pc] = src[[sr, sc]];
        }
    }
    let kern = kernel.as_slice().expect("kernel is contiguous");
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for tr in 0..ks {
                let prow = (r + tr) * pw + c;
                let krow = tr * ks;
                for tc in 0..ks {
                    acc += kern[krow + tc] * padded[prow + tc];
                }
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Replaces every pixel with the mean of its non-overlapping `block`×`block`
/// cell (edge cells are clamped to the image).
pub(crate) fn block_pool_broadcast(resp: &Array2<f64>, block: usize) -> Array2<f64> {
    let (h, w) = resp.dim();
    let mut out = Array2::zeros((h, w));
    let mut r0 = 0;
    while r0 < h {
        let r1 = (r0 + block).min(h);
        let mut c0 = 0;
        while c0 < w {
            let c1 = (c0 + block).min(w);
            let mut sum = 0.0;
            for r in r0..r1 {
                for c in c0..c1 {
                    sum += resp[[r, c]];
                }
            }
            let mean = sum / ((r1 - r0) * (c1 - c0)) as f64;
            for r in r0..r1 {
                for c in c0..c1 {
                    out[[r, c]] = mean;
                }
            }
            c0 = c1;
        }
        r0 = r1;
    }
    out
}
