//! Per-pixel feature extraction: image standardization, color moments,
//! Schmid responses, gradient-orientation bins, HSV and normalized-RG
//! channels, and assembly into the four feature sets.

pub mod schmid;

use ndarray::{Array2, Array3};

use crate::config::{DescriptorBlock, DescriptorConfig, FeatureSet, YChannelMode};
use crate::error::{Error, Result};

pub use schmid::SchmidFilterBank;

/// Standardized image width in pixels.
pub const STD_WIDTH: usize = 48;
/// Standardized image height in pixels.
pub const STD_HEIGHT: usize = 128;

/// RGB image standardized to 48×128 with channels in [0, 1].
#[derive(Debug, Clone)]
pub struct RgbImage {
    /// Shape (H, W, 3).
    data: Array3<f64>,
}

impl RgbImage {
    /// Decodes 8-bit image bytes (PNG/JPEG/BMP), bilinearly resizes to
    /// 48×128, and scales channels to [0, 1].
    pub fn from_bytes(bytes: &[u8]) -> Result<RgbImage> {
        let decoded = image::load_from_memory(bytes)?;
        if decoded.width() == 0 || decoded.height() == 0 {
            return Err(Error::Degenerate("zero-area image".into()));
        }
        let rgb = decoded.to_rgb8();
        let rgb = if rgb.width() as usize == STD_WIDTH && rgb.height() as usize == STD_HEIGHT {
            rgb
        } else {
            image::imageops::resize(
                &rgb,
                STD_WIDTH as u32,
                STD_HEIGHT as u32,
                image::imageops::FilterType::Triangle,
            )
        };
        let mut data = Array3::zeros((STD_HEIGHT, STD_WIDTH, 3));
        for (x, y, px) in rgb.enumerate_pixels() {
            for ch in 0..3 {
                data[[y as usize, x as usize, ch]] = px.0[ch] as f64 / 255.0;
            }
        }
        Ok(RgbImage { data })
    }

    pub fn from_path(path: &std::path::Path) -> Result<RgbImage> {
        let bytes = std::fs::read(path)?;
        RgbImage::from_bytes(&bytes)
    }

    /// Wraps an already-standardized (H, W, 3) tensor with values in [0, 1].
    pub fn from_array(data: Array3<f64>) -> Result<RgbImage> {
        let (h, w, c) = data.dim();
        if h == 0 || w == 0 {
            return Err(Error::Degenerate("zero-area image".into()));
        }
        if c != 3 {
            return Err(Error::Contract(format!("expected 3 channels, got {c}")));
        }
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Contract("channel values must lie in [0, 1]".into()));
        }
        Ok(RgbImage { data })
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Rec. 601 luma: 0.299 R + 0.587 G + 0.114 B.
    pub fn luminance(&self) -> Array2<f64> {
        let (h, w, _) = self.data.dim();
        Array2::from_shape_fn((h, w), |(r, c)| {
            0.299 * self.data[[r, c, 0]] + 0.587 * self.data[[r, c, 1]] + 0.114 * self.data[[r, c, 2]]
        })
    }
}

/// Decode + standardize, the entry point for file bytes.
pub fn load_and_standardize(bytes: &[u8]) -> Result<RgbImage> {
    RgbImage::from_bytes(bytes)
}

/// W×H×n per-pixel feature tensor for one image and one descriptor block.
#[derive(Debug, Clone)]
pub struct PixelFeatureMap {
    pub block: DescriptorBlock,
    /// Shape (H, W, n).
    pub data: Array3<f64>,
}

impl PixelFeatureMap {
    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }
}

/// Per-pixel mean and sample standard deviation (N−1) of R, G, B over the
/// `window`×`window` neighborhood, clamped at the borders. Channel order:
/// [mean R, std R, mean G, std G, mean B, std B].
pub fn color_moments(img: &RgbImage, window: usize) -> Array3<f64> {
    let (h, w, _) = img.data().dim();
    let half = window / 2;
    let mut out = Array3::zeros((h, w, 6));
    for r in 0..h {
        let r0 = r.saturating_sub(half);
        let r1 = (r + half).min(h - 1);
        for c in 0..w {
            let c0 = c.saturating_sub(half);
            let c1 = (c + half).min(w - 1);
            let n = ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
            for ch in 0..3 {
                let mut sum = 0.0;
                for rr in r0..=r1 {
                    for cc in c0..=c1 {
                        sum += img.data()[[rr, cc, ch]];
                    }
                }
                let mean = sum / n;
                let mut devsq = 0.0;
                for rr in r0..=r1 {
                    for cc in c0..=c1 {
                        let d = img.data()[[rr, cc, ch]] - mean;
                        devsq += d * d;
                    }
                }
                let std = (devsq / (n - 1.0)).sqrt();
                out[[r, c, 2 * ch]] = mean;
                out[[r, c, 2 * ch + 1]] = std;
            }
        }
    }
    out
}

/// 13 Schmid responses on luminance: convolution with each bank kernel
/// (reflect padding), average-pooled over `pool`×`pool` non-overlapping
/// blocks and broadcast back to every pixel of the block.
pub fn schmid_responses(img: &RgbImage, bank: &SchmidFilterBank, pool: usize) -> Array3<f64> {
    let luma = img.luminance();
    let (h, w) = luma.dim();
    let mut out = Array3::zeros((h, w, bank.len()));
    for (i, kernel) in bank.kernels().iter().enumerate() {
        let resp = schmid::convolve_reflect(&luma, kernel);
        let pooled = schmid::block_pool_broadcast(&resp, pool);
        for r in 0..h {
            for c in 0..w {
                out[[r, c, i]] = pooled[[r, c]];
            }
        }
    }
    out
}

/// Sobel gradients on luminance, hard-binned by orientation.
///
/// Orientation is atan2(gy, gx) folded to [0°, 180°), so a left-to-right
/// intensity increase (vertical edge) has orientation 0° and lands in bin 0.
/// The gradient magnitude goes to exactly one of the four bins
/// [0,45), [45,90), [90,135), [135,180); the other bins stay zero.
pub fn gradient_orientation(img: &RgbImage) -> Array3<f64> {
    let luma = img.luminance();
    let (h, w) = luma.dim();
    let mut out = Array3::zeros((h, w, 4));
    for r in 0..h {
        for c in 0..w {
            let at = |dr: isize, dc: isize| {
                let sr = schmid::reflect(r as isize + dr, h);
                let sc = schmid::reflect(c as isize + dc, w);
                luma[[sr, sc]]
            };
            // Difference of identically-formed column/row sums, so flat
            // neighborhoods cancel exactly instead of leaving rounding residue.
            let gx = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1))
                - (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1));
            let gy = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1))
                - (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1));
            let magnitude = (gx * gx + gy * gy).sqrt();
            if magnitude > 0.0 {
                let mut deg = gy.atan2(gx).to_degrees();
                deg = deg.rem_euclid(180.0);
                let bin = ((deg / 45.0) as usize).min(3);
                out[[r, c, bin]] = magnitude;
            }
        }
    }
    out
}

/// Hexcone HSV with all three channels scaled to [0, 1].
pub fn hsv_channels(img: &RgbImage) -> Array3<f64> {
    let (h, w, _) = img.data().dim();
    let mut out = Array3::zeros((h, w, 3));
    for r in 0..h {
        for c in 0..w {
            let (red, green, blue) = (
                img.data()[[r, c, 0]],
                img.data()[[r, c, 1]],
                img.data()[[r, c, 2]],
            );
            let (hh, ss, vv) = rgb_to_hsv(red, green, blue);
            out[[r, c, 0]] = hh;
            out[[r, c, 1]] = ss;
            out[[r, c, 2]] = vv;
        }
    }
    out
}

pub(crate) fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta).rem_euclid(6.0)) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, v)
}

pub(crate) fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor() as i64 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Chromaticity channels nR = R/(R+G+B), nG = G/(R+G+B); an all-zero pixel
/// maps to (1/3, 1/3).
pub fn nrng_channels(img: &RgbImage) -> Array3<f64> {
    let (h, w, _) = img.data().dim();
    let mut out = Array3::zeros((h, w, 2));
    for r in 0..h {
        for c in 0..w {
            let sum = img.data()[[r, c, 0]] + img.data()[[r, c, 1]] + img.data()[[r, c, 2]];
            if sum == 0.0 {
                out[[r, c, 0]] = 1.0 / 3.0;
                out[[r, c, 1]] = 1.0 / 3.0;
            } else {
                out[[r, c, 0]] = img.data()[[r, c, 0]] / sum;
                out[[r, c, 1]] = img.data()[[r, c, 1]] / sum;
            }
        }
    }
    out
}

fn y_value(row: usize, height: usize, mode: YChannelMode) -> f64 {
    match mode {
        YChannelMode::NormalizedRow => row as f64 / (height - 1) as f64,
        YChannelMode::AbsoluteRow => row as f64,
    }
}

/// Assembles the per-pixel channels for one feature set.
pub fn build_feature_map(
    img: &RgbImage,
    set: FeatureSet,
    cfg: &DescriptorConfig,
) -> PixelFeatureMap {
    let (h, w, _) = img.data().dim();
    let n = set.channel_count();
    let mut data = Array3::zeros((h, w, n));
    match set {
        FeatureSet::Ycm => {
            let moments = color_moments(img, cfg.patch_size);
            for r in 0..h {
                let y = y_value(r, h, cfg.y_mode);
                for c in 0..w {
                    data[[r, c, 0]] = y;
                    for ch in 0..6 {
                        data[[r, c, 1 + ch]] = moments[[r, c, ch]];
                    }
                }
            }
        }
        FeatureSet::Schmid => {
            let bank = SchmidFilterBank::build(cfg.schmid_variant);
            let resp = schmid_responses(img, &bank, cfg.schmid_pool);
            data.assign(&resp);
        }
        FeatureSet::Ygohsv => {
            let grad = gradient_orientation(img);
            let hsv = hsv_channels(img);
            for r in 0..h {
                let y = y_value(r, h, cfg.y_mode);
                for c in 0..w {
                    data[[r, c, 0]] = y;
                    for ch in 0..4 {
                        data[[r, c, 1 + ch]] = grad[[r, c, ch]];
                    }
                    for ch in 0..3 {
                        data[[r, c, 5 + ch]] = hsv[[r, c, ch]];
                    }
                }
            }
        }
        FeatureSet::Ygonrng => {
            let grad = gradient_orientation(img);
            let nrng = nrng_channels(img);
            for r in 0..h {
                let y = y_value(r, h, cfg.y_mode);
                for c in 0..w {
                    data[[r, c, 0]] = y;
                    for ch in 0..4 {
                        data[[r, c, 1 + ch]] = grad[[r, c, ch]];
                    }
                    for ch in 0..2 {
                        data[[r, c, 5 + ch]] = nrng[[r, c, ch]];
                    }
                }
            }
        }
    }
    PixelFeatureMap {
        block: DescriptorBlock::Set(set),
        data,
    }
}

/// 25-channel map for pixel-level fusion:
/// [y, 6 color moments, 13 Schmid, H, S, V, nR, nG].
pub fn build_fused_map(img: &RgbImage, cfg: &DescriptorConfig) -> PixelFeatureMap {
    let (h, w, _) = img.data().dim();
    let moments = color_moments(img, cfg.patch_size);
    let bank = SchmidFilterBank::build(cfg.schmid_variant);
    let resp = schmid_responses(img, &bank, cfg.schmid_pool);
    let hsv = hsv_channels(img);
    let nrng = nrng_channels(img);
    let mut data = Array3::zeros((h, w, 25));
    for r in 0..h {
        let y = y_value(r, h, cfg.y_mode);
        for c in 0..w {
            data[[r, c, 0]] = y;
            for ch in 0..6 {
                data[[r, c, 1 + ch]] = moments[[r, c, ch]];
            }
            for ch in 0..13 {
                data[[r, c, 7 + ch]] = resp[[r, c, ch]];
            }
            for ch in 0..3 {
                data[[r, c, 20 + ch]] = hsv[[r, c, ch]];
            }
            for ch in 0..2 {
                data[[r, c, 23 + ch]] = nrng[[r, c, ch]];
            }
        }
    }
    PixelFeatureMap {
        block: DescriptorBlock::FusedPixel,
        data,
    }
}
