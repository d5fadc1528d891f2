//! Two-level Gaussian encoding: patch Gaussians over pixel features are
//! flattened to tangent vectors, a second Gaussian is fitted over the patch
//! vectors of each horizontal region strip, and the flattened region vectors
//! are concatenated into the final descriptor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{DescriptorBlock, DescriptorConfig, FusionMode};
use crate::error::{Error, Result};
use crate::features::{build_feature_map, build_fused_map, PixelFeatureMap, RgbImage};
use crate::spd::{self, GaussianModel, TangentVector};

/// Regular grid of fully-inside patch origins (top-left corners).
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub size: usize,
    pub stride: usize,
    /// (x, y) origins in row-major order (y outer, x inner).
    pub origins: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, size: usize, stride: usize) -> Result<PatchGrid> {
        if size == 0 || stride == 0 {
            return Err(Error::Config("patch size and stride must be positive".into()));
        }
        if size > width || size > height {
            return Err(Error::Config(format!(
                "patch size {size} exceeds image dimensions {width}x{height}"
            )));
        }
        let mut origins = Vec::new();
        let mut y = 0;
        while y + size <= height {
            let mut x = 0;
            while x + size <= width {
                origins.push((x, y));
                x += stride;
            }
            y += stride;
        }
        Ok(PatchGrid {
            size,
            stride,
            origins,
        })
    }

    /// Center row of the patch at origin (x, y).
    pub fn center_row(&self, origin: (usize, usize)) -> usize {
        origin.1 + (self.size - 1) / 2
    }
}

/// Overlapping horizontal strips covering the image rows.
#[derive(Debug, Clone)]
pub struct RegionLayout {
    /// (row_start, row_end) half-open intervals.
    pub strips: Vec<(usize, usize)>,
}

impl RegionLayout {
    pub fn horizontal(height: usize, strip_height: usize, stride: usize) -> Result<RegionLayout> {
        if strip_height == 0 || stride == 0 || strip_height > height {
            return Err(Error::Config(format!(
                "invalid region layout: height {height}, strip {strip_height}, stride {stride}"
            )));
        }
        let mut strips = Vec::new();
        let mut start = 0;
        while start + strip_height <= height {
            strips.push((start, start + strip_height));
            start += stride;
        }
        Ok(RegionLayout { strips })
    }

    pub fn region_count(&self) -> usize {
        self.strips.len()
    }
}

/// Placement of one region vector inside the final descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutRecord {
    pub block: DescriptorBlock,
    pub region: usize,
    pub offset: usize,
    pub len: usize,
}

/// Final fused feature vector for one image.
#[derive(Debug, Clone)]
pub struct Descriptor {
    pub image_id: String,
    pub values: Vec<f64>,
    pub layout: Vec<LayoutRecord>,
}

/// First-level encoding: one Gaussian per patch, flattened to a tangent
/// vector of length (n² + 3n)/2 + 1. Output order follows the row-major
/// patch origin order.
pub fn patch_gaussians(
    fmap: &PixelFeatureMap,
    grid: &PatchGrid,
    eps_rel: f64,
) -> Result<Vec<TangentVector>> {
    if grid.size * grid.size < 2 {
        return Err(Error::Degenerate(format!(
            "patch of {}x{} pixels has fewer than 2 samples",
            grid.size, grid.size
        )));
    }
    let n = fmap.channels();
    let px = grid.size * grid.size;
    let mut samples = DMatrix::zeros(px, n);
    let mut out = Vec::with_capacity(grid.origins.len());
    for &(x0, y0) in &grid.origins {
        let mut k = 0;
        for dy in 0..grid.size {
            for dx in 0..grid.size {
                for ch in 0..n {
                    samples[(k, ch)] = fmap.data[[y0 + dy, x0 + dx, ch]];
                }
                k += 1;
            }
        }
        let g = GaussianModel::from_samples(&samples)?.regularized(eps_rel)?;
        out.push(spd::gaussian_to_vector(&g)?);
    }
    Ok(out)
}

/// Second-level encoding: Gaussian over the member patch vectors of one
/// region, flattened to a vector of length (m² + 3m)/2 + 1.
pub fn region_encode(members: &[&TangentVector], eps_rel: f64) -> Result<TangentVector> {
    if members.len() < 2 {
        return Err(Error::Degenerate(format!(
            "region has {} member patches; need at least 2",
            members.len()
        )));
    }
    let m = members[0].len();
    let mut samples = DMatrix::zeros(members.len(), m);
    for (i, v) in members.iter().enumerate() {
        if v.len() != m {
            return Err(Error::Contract(
                "member patch vectors have inconsistent lengths".into(),
            ));
        }
        for j in 0..m {
            samples[(i, j)] = v.values()[j];
        }
    }
    let g = GaussianModel::from_samples(&samples)?.regularized(eps_rel)?;
    spd::gaussian_to_vector(&g)
}

fn encode_block(
    fmap: &PixelFeatureMap,
    cfg: &DescriptorConfig,
    eps_region: f64,
    values: &mut Vec<f64>,
    layout: &mut Vec<LayoutRecord>,
) -> Result<()> {
    let grid = PatchGrid::new(fmap.width(), fmap.height(), cfg.patch_size, cfg.patch_stride)?;
    let regions = RegionLayout::horizontal(fmap.height(), cfg.region_height, cfg.region_stride)?;
    let patches = patch_gaussians(fmap, &grid, cfg.patch_eps_rel)?;
    for (ri, &(row_start, row_end)) in regions.strips.iter().enumerate() {
        let members: Vec<&TangentVector> = grid
            .origins
            .iter()
            .zip(&patches)
            .filter(|(&o, _)| {
                let center = grid.center_row(o);
                center >= row_start && center < row_end
            })
            .map(|(_, v)| v)
            .collect();
        let region_vec = region_encode(&members, eps_region)?;
        let offset = values.len();
        values.extend(region_vec.values().iter());
        layout.push(LayoutRecord {
            block: fmap.block,
            region: ri,
            offset,
            len: region_vec.len(),
        });
    }
    Ok(())
}

/// Full (unnormalized) descriptor for one standardized image: for each
/// feature set, regions are concatenated top-to-bottom; feature sets follow
/// the canonical order [YCM, SCHMID, YGOHSV, YGOnRnG].
pub fn extract_descriptor(
    img: &RgbImage,
    cfg: &DescriptorConfig,
    image_id: &str,
) -> Result<Descriptor> {
    cfg.validate()?;
    let mut values = Vec::with_capacity(descriptor_len(cfg));
    let mut layout = Vec::new();
    match cfg.fusion {
        FusionMode::DescriptorConcat => {
            for set in cfg.ordered_sets() {
                let fmap = build_feature_map(img, set, cfg);
                encode_block(&fmap, cfg, cfg.region_eps_for(set), &mut values, &mut layout)?;
            }
        }
        FusionMode::PixelConcat => {
            let fmap = build_fused_map(img, cfg);
            // The fused map contains the Schmid channels, so it takes the
            // stronger region-level ridge.
            encode_block(
                &fmap,
                cfg,
                cfg.schmid_region_eps_rel,
                &mut values,
                &mut layout,
            )?;
        }
    }
    debug_assert_eq!(values.len(), descriptor_len(cfg));
    Ok(Descriptor {
        image_id: image_id.to_string(),
        values,
        layout,
    })
}

/// Length of one region vector for a block with n pixel channels:
/// the tangent dimension of an m-dimensional Gaussian where m is the
/// tangent dimension of an n-dimensional one.
pub fn region_vector_len(channels: usize) -> usize {
    spd::tangent_dim(spd::tangent_dim(channels))
}

/// Total descriptor length for a configuration (pure function of the
/// feature-set list and region count).
pub fn descriptor_len(cfg: &DescriptorConfig) -> usize {
    let regions = (crate::features::STD_HEIGHT - cfg.region_height) / cfg.region_stride + 1;
    match cfg.fusion {
        FusionMode::DescriptorConcat => cfg
            .ordered_sets()
            .iter()
            .map(|s| regions * region_vector_len(s.channel_count()))
            .sum(),
        FusionMode::PixelConcat => regions * region_vector_len(25),
    }
}

/// Mean removal + L2 normalization: H ← (H − H̄)/‖H − H̄‖₂.
///
/// With `training_mean` = None the batch is a training batch and H̄ is its
/// mean (returned for persistence); test batches must pass the stored
/// training mean.
pub fn normalize_batch(
    descriptors: &mut [Descriptor],
    training_mean: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::Degenerate("empty descriptor batch".into()));
    }
    let d = descriptors[0].values.len();
    if descriptors.iter().any(|x| x.values.len() != d) {
        return Err(Error::Contract("descriptors have mixed lengths".into()));
    }
    let mean: Vec<f64> = match training_mean {
        Some(m) => {
            if m.len() != d {
                return Err(Error::Contract(format!(
                    "training mean length {} does not match descriptor length {d}",
                    m.len()
                )));
            }
            m.to_vec()
        }
        None => {
            let mut m = vec![0.0; d];
            for desc in descriptors.iter() {
                for (acc, v) in m.iter_mut().zip(&desc.values) {
                    *acc += v;
                }
            }
            let count = descriptors.len() as f64;
            for v in &mut m {
                *v /= count;
            }
            m
        }
    };
    for desc in descriptors.iter_mut() {
        normalize_with_mean(&mut desc.values, &mean)?;
    }
    Ok(mean)
}

/// In-place (H − H̄)/‖H − H̄‖₂ for a single vector.
pub fn normalize_with_mean(values: &mut [f64], mean: &[f64]) -> Result<()> {
    if values.len() != mean.len() {
        return Err(Error::Contract(format!(
            "vector length {} does not match mean length {}",
            values.len(),
            mean.len()
        )));
    }
    let mut norm_sq = 0.0;
    for (v, m) in values.iter_mut().zip(mean) {
        *v -= m;
        norm_sq += *v * *v;
    }
    if norm_sq == 0.0 {
        return Err(Error::Degenerate(
            "descriptor equals the mean exactly; zero norm".into(),
        ));
    }
    let inv = 1.0 / norm_sq.sqrt();
    for v in values.iter_mut() {
        *v *= inv;
    }
    Ok(())
}
