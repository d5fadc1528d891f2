//! Pipeline configuration: feature-set selection, patch/region geometry,
//! regularization strengths, metric hyperparameters, and the config hash that
//! ties persisted artifacts to the settings that produced them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The four per-pixel feature sets the descriptor is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    /// y distance + mean/std color moments of R, G, B (7 channels).
    Ycm,
    /// 13 Schmid filter responses (13 channels).
    Schmid,
    /// y distance + 4 gradient-orientation bins + H, S, V (8 channels).
    Ygohsv,
    /// y distance + 4 gradient-orientation bins + nR, nG (7 channels).
    Ygonrng,
}

impl FeatureSet {
    /// Number of per-pixel channels for this set.
    pub fn channel_count(self) -> usize {
        match self {
            FeatureSet::Ycm => 7,
            FeatureSet::Schmid => 13,
            FeatureSet::Ygohsv => 8,
            FeatureSet::Ygonrng => 7,
        }
    }

    /// Canonical concatenation order of the four sets.
    pub fn canonical_order() -> [FeatureSet; 4] {
        [
            FeatureSet::Ycm,
            FeatureSet::Schmid,
            FeatureSet::Ygohsv,
            FeatureSet::Ygonrng,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Ycm => "ycm",
            FeatureSet::Schmid => "schmid",
            FeatureSet::Ygohsv => "ygohsv",
            FeatureSet::Ygonrng => "ygonrng",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureSet> {
        match s.to_ascii_lowercase().as_str() {
            "ycm" => Ok(FeatureSet::Ycm),
            "schmid" => Ok(FeatureSet::Schmid),
            "ygohsv" => Ok(FeatureSet::Ygohsv),
            "ygonrng" => Ok(FeatureSet::Ygonrng),
            other => Err(Error::Config(format!("unknown feature set `{other}`"))),
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One block of the final descriptor: either a single feature set or the
/// fused 25-channel pixel feature (y, 6 color moments, 13 Schmid, H, S, V,
/// nR, nG) used by pixel-level fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DescriptorBlock {
    Set(FeatureSet),
    FusedPixel,
}

impl DescriptorBlock {
    pub fn channel_count(self) -> usize {
        match self {
            DescriptorBlock::Set(s) => s.channel_count(),
            DescriptorBlock::FusedPixel => 25,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            DescriptorBlock::Set(FeatureSet::Ycm) => 0,
            DescriptorBlock::Set(FeatureSet::Schmid) => 1,
            DescriptorBlock::Set(FeatureSet::Ygohsv) => 2,
            DescriptorBlock::Set(FeatureSet::Ygonrng) => 3,
            DescriptorBlock::FusedPixel => 255,
        }
    }

    pub fn from_tag(tag: u8) -> Result<DescriptorBlock> {
        match tag {
            0 => Ok(DescriptorBlock::Set(FeatureSet::Ycm)),
            1 => Ok(DescriptorBlock::Set(FeatureSet::Schmid)),
            2 => Ok(DescriptorBlock::Set(FeatureSet::Ygohsv)),
            3 => Ok(DescriptorBlock::Set(FeatureSet::Ygonrng)),
            255 => Ok(DescriptorBlock::FusedPixel),
            other => Err(Error::Format(format!("unknown descriptor block tag {other}"))),
        }
    }

    pub fn name(self) -> String {
        match self {
            DescriptorBlock::Set(s) => s.name().to_string(),
            DescriptorBlock::FusedPixel => "fused".to_string(),
        }
    }
}

/// Kernel formula variant for the Schmid bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidVariant {
    /// cos(2πrτ/σ) inside the Gaussian envelope (the default).
    TwoPi,
    /// cos(πrτ/σ), the classical Schmid filter, kept for comparison.
    Classical,
}

/// How multiple feature sets are fused into one descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Extract each set independently and concatenate the final vectors (default).
    DescriptorConcat,
    /// Concatenate channels into one 25-dim pixel feature before encoding.
    /// Only valid with all four feature sets selected.
    PixelConcat,
}

/// Vertical-position channel normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YChannelMode {
    /// row / (H - 1), in [0, 1] (default).
    NormalizedRow,
    /// Raw row index.
    AbsoluteRow,
}

/// The 13 (σ, τ) parameter pairs of the Schmid filter bank.
pub const SCHMID_PARAMS: [(f64, u32); 13] = [
    (2.0, 1),
    (4.0, 1),
    (4.0, 2),
    (6.0, 1),
    (6.0, 2),
    (6.0, 3),
    (8.0, 1),
    (8.0, 2),
    (8.0, 3),
    (10.0, 1),
    (10.0, 2),
    (10.0, 3),
    (10.0, 4),
];

/// Everything that affects descriptor bytes. Hashed into caches and models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorConfig {
    pub feature_sets: Vec<FeatureSet>,
    /// Patch side length k in pixels.
    pub patch_size: usize,
    /// Patch grid stride u in pixels.
    pub patch_stride: usize,
    /// Region strip height in rows.
    pub region_height: usize,
    /// Region strip stride in rows.
    pub region_stride: usize,
    /// Ridge strength for patch-level covariances.
    pub patch_eps_rel: f64,
    /// Ridge strength for region-level covariances.
    pub region_eps_rel: f64,
    /// Region-level ridge for the Schmid set (105-dim second-level Gaussians
    /// estimated from ~300 patches need a stronger ridge).
    pub schmid_region_eps_rel: f64,
    pub schmid_variant: SchmidVariant,
    /// Side of the non-overlapping pooling blocks for Schmid responses.
    pub schmid_pool: usize,
    pub fusion: FusionMode,
    pub y_mode: YChannelMode,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            feature_sets: FeatureSet::canonical_order().to_vec(),
            patch_size: 5,
            patch_stride: 2,
            region_height: 32,
            region_stride: 16,
            patch_eps_rel: 1e-3,
            region_eps_rel: 1e-3,
            schmid_region_eps_rel: 1e-2,
            schmid_variant: SchmidVariant::TwoPi,
            schmid_pool: 10,
            fusion: FusionMode::DescriptorConcat,
            y_mode: YChannelMode::NormalizedRow,
        }
    }
}

impl DescriptorConfig {
    /// Requested feature sets in canonical order, deduplicated.
    pub fn ordered_sets(&self) -> Vec<FeatureSet> {
        FeatureSet::canonical_order()
            .into_iter()
            .filter(|s| self.feature_sets.contains(s))
            .collect()
    }

    /// Region-level ridge strength for one feature set.
    pub fn region_eps_for(&self, set: FeatureSet) -> f64 {
        match set {
            FeatureSet::Schmid => self.schmid_region_eps_rel,
            _ => self.region_eps_rel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_sets.is_empty() {
            return Err(Error::Config("at least one feature set required".into()));
        }
        if self.patch_size < 2 {
            return Err(Error::Config("patch_size must be at least 2".into()));
        }
        if self.patch_stride == 0 || self.region_stride == 0 {
            return Err(Error::Config("strides must be positive".into()));
        }
        if self.schmid_pool == 0 {
            return Err(Error::Config("schmid_pool must be positive".into()));
        }
        if self.fusion == FusionMode::PixelConcat && self.ordered_sets().len() != 4 {
            return Err(Error::Config(
                "pixel-level fusion requires all four feature sets".into(),
            ));
        }
        Ok(())
    }
}

/// Distance-model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Xqda,
    Kissme,
    Lfda,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Xqda => "xqda",
            MetricKind::Kissme => "kissme",
            MetricKind::Lfda => "lfda",
        }
    }

    pub fn parse(s: &str) -> Result<MetricKind> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(MetricKind::Euclidean),
            "xqda" => Ok(MetricKind::Xqda),
            "kissme" => Ok(MetricKind::Kissme),
            "lfda" => Ok(MetricKind::Lfda),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            MetricKind::Euclidean => 0,
            MetricKind::Xqda => 1,
            MetricKind::Kissme => 2,
            MetricKind::Lfda => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<MetricKind> {
        match tag {
            0 => Ok(MetricKind::Euclidean),
            1 => Ok(MetricKind::Xqda),
            2 => Ok(MetricKind::Kissme),
            3 => Ok(MetricKind::Lfda),
            other => Err(Error::Format(format!("unknown metric tag {other}"))),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric-learning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// PCA pre-reduction before XQDA/KISSME/LFDA. Mandatory for KISSME/LFDA.
    pub pca_enabled: bool,
    /// Requested PCA dimension; None picks min(N-1, 631).
    pub pca_dim: Option<usize>,
    /// Ridge on the intrinsic covariance in XQDA, scaled by trace/dim.
    pub xqda_lambda: f64,
    /// Cap on the XQDA discriminant-subspace dimension.
    pub xqda_max_dim: usize,
    /// Clip negative eigenvalues of the learned kernel so scores form a
    /// pseudo-metric.
    pub psd_clip: bool,
    /// Dissimilar pairs sampled per similar pair.
    pub negative_ratio: usize,
    /// Neighbors for LFDA's local-scaling affinity.
    pub lfda_knn: usize,
    /// Target LFDA dimension; None picks min(p, 64).
    pub lfda_dim: Option<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            pca_enabled: true,
            pca_dim: None,
            xqda_lambda: 1e-3,
            xqda_max_dim: 64,
            psd_clip: true,
            negative_ratio: 10,
            lfda_knn: 7,
            lfda_dim: None,
        }
    }
}

/// Evaluation-protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub trials: usize,
    /// Training identities per split; None takes half the paired identities.
    pub train_count: Option<usize>,
    /// Reduce multi-shot galleries/probes to one random image per
    /// (identity, camera). Default credits the best-ranked correct image.
    pub single_shot: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            trials: 10,
            train_count: None,
            single_shot: false,
        }
    }
}

/// Full pipeline configuration as read from `--config`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub descriptor: DescriptorConfig,
    pub metric: MetricConfig,
    pub eval: EvalConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.descriptor.validate()?;
        Ok(cfg)
    }
}

/// SHA-256 over the canonical JSON serialization of the descriptor config.
/// Every persisted artifact embeds this hash; a mismatch on load is a hard error.
pub fn descriptor_config_hash(cfg: &DescriptorConfig) -> [u8; 32] {
    let json = serde_json::to_string(cfg).expect("descriptor config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

pub fn hash_hex(hash: &[u8; 32]) -> String {
    let mut s = String::with_capacity(64);
    for b in hash {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
