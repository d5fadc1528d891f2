//! Dataset protocol: identity-level train/test splits, descriptor
//! extraction over a manifest, metric fitting per trial, CMC computation,
//! and top-k retrieval.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{descriptor_config_hash, hash_hex, DescriptorBlock, MetricKind, PipelineConfig};
use crate::descriptor::{extract_descriptor, normalize_with_mean};
use crate::error::{Error, Result};
use crate::features::RgbImage;
use crate::metric::{fit_metric, MetricModel, PairSet};

/// Camera view label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Camera {
    A,
    B,
}

impl Camera {
    pub fn other(self) -> Camera {
        match self {
            Camera::A => Camera::B,
            Camera::B => Camera::A,
        }
    }

    pub fn parse(s: &str) -> Result<Camera> {
        match s.trim() {
            "A" | "a" => Ok(Camera::A),
            "B" | "b" => Ok(Camera::B),
            other => Err(Error::Format(format!("unknown camera value `{other}`"))),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Camera::A => 0,
            Camera::B => 1,
        }
    }

    pub fn from_tag(t: u8) -> Result<Camera> {
        match t {
            0 => Ok(Camera::A),
            1 => Ok(Camera::B),
            other => Err(Error::Format(format!("unknown camera tag {other}"))),
        }
    }
}

impl std::fmt::Display for Camera {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Camera::A => "A",
            Camera::B => "B",
        })
    }
}

/// One dataset image: where to read it and who it shows.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    /// Resolved path for reading the file.
    pub path: PathBuf,
    /// Stable identifier (the manifest's original path string).
    pub image_id: String,
    pub person_id: String,
    pub camera: Camera,
}

/// Dataset listing with identity and camera labels.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Identities present in both cameras, sorted.
    pub fn paired_ids(&self) -> Vec<String> {
        let mut by_cam: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
        for e in &self.entries {
            by_cam[e.camera.tag() as usize].insert(&e.person_id);
        }
        by_cam[0]
            .intersection(&by_cam[1])
            .map(|s| s.to_string())
            .collect()
    }

    /// Identities present in exactly one camera (gallery distractors).
    pub fn distractor_ids(&self) -> Vec<String> {
        let mut by_cam: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
        for e in &self.entries {
            by_cam[e.camera.tag() as usize].insert(&e.person_id);
        }
        let mut out: Vec<String> = by_cam[0]
            .symmetric_difference(&by_cam[1])
            .map(|s| s.to_string())
            .collect();
        out.sort();
        out
    }

    /// Camera that holds distractor entries, if any.
    fn distractor_camera(&self) -> Result<Option<Camera>> {
        let distractors: BTreeSet<String> = self.distractor_ids().into_iter().collect();
        if distractors.is_empty() {
            return Ok(None);
        }
        let mut cams = BTreeSet::new();
        for e in &self.entries {
            if distractors.contains(&e.person_id) {
                cams.insert(e.camera.tag());
            }
        }
        if cams.len() > 1 {
            return Err(Error::Protocol(
                "gallery-only identities appear in both cameras; cannot infer probe camera".into(),
            ));
        }
        Ok(Some(Camera::from_tag(*cams.iter().next().unwrap())?))
    }
}

/// Identity-level train/test partition for one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSplit {
    pub trial: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub probe_camera: Camera,
}

/// Seeded, reproducible identity partitions. Gallery-only identities are not
/// split; they join every test gallery as distractors. The probe camera is
/// flipped randomly per trial unless distractors pin it.
pub fn generate_splits(
    manifest: &DatasetManifest,
    trials: usize,
    seed: u64,
    train_count: Option<usize>,
) -> Result<Vec<EvalSplit>> {
    let ids = manifest.paired_ids();
    if ids.len() < 2 {
        return Err(Error::Protocol(format!(
            "need at least 2 paired identities, found {}",
            ids.len()
        )));
    }
    let train_n = train_count.unwrap_or(ids.len() / 2);
    if train_n == 0 || train_n >= ids.len() {
        return Err(Error::Protocol(format!(
            "train count {train_n} leaves no test identities (of {})",
            ids.len()
        )));
    }
    let pinned_probe = match manifest.distractor_camera()? {
        Some(cam) => Some(cam.other()),
        None => None,
    };
    let mut splits = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64, 0);
        let mut shuffled = ids.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        let mut train_ids: Vec<String> = shuffled[..train_n].to_vec();
        let mut test_ids: Vec<String> = shuffled[train_n..].to_vec();
        train_ids.sort();
        test_ids.sort();
        let probe_camera = pinned_probe.unwrap_or(if rng.random_bool(0.5) {
            Camera::A
        } else {
            Camera::B
        });
        splits.push(EvalSplit {
            trial,
            train_ids,
            test_ids,
            probe_camera,
        });
    }
    Ok(splits)
}

fn trial_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    // Distinct, stable streams per (seed, trial, purpose).
    ChaCha8Rng::seed_from_u64(
        seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03),
    )
}

/// Rank → recognition-rate curve averaged over trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmcCurve {
    /// rates[k-1] = fraction of probes whose match appears at rank ≤ k.
    pub rates: Vec<f64>,
    pub trials_averaged: usize,
}

impl CmcCurve {
    pub fn rank(&self, k: usize) -> f64 {
        if self.rates.is_empty() {
            return 0.0;
        }
        self.rates[(k.max(1) - 1).min(self.rates.len() - 1)]
    }
}

/// CMC from a P×G dissimilarity matrix. Gallery is sorted ascending per
/// probe with ties broken by stable gallery index; multi-shot galleries
/// credit the best-ranked correct image.
pub fn compute_cmc(
    scores: &DMatrix<f64>,
    probe_ids: &[u32],
    gallery_ids: &[u32],
) -> Result<CmcCurve> {
    let p = scores.nrows();
    let g = scores.ncols();
    if p != probe_ids.len() || g != gallery_ids.len() {
        return Err(Error::Contract("score matrix shape does not match id lists".into()));
    }
    if g == 0 {
        return Err(Error::Protocol("empty gallery".into()));
    }
    let gallery_set: BTreeSet<u32> = gallery_ids.iter().copied().collect();
    let mut hits_at_rank = vec![0usize; g];
    for (i, &pid) in probe_ids.iter().enumerate() {
        if !gallery_set.contains(&pid) {
            return Err(Error::Protocol(format!(
                "probe identity {pid} absent from gallery"
            )));
        }
        let mut order: Vec<usize> = (0..g).collect();
        order.sort_by(|&a, &b| {
            scores[(i, a)]
                .partial_cmp(&scores[(i, b)])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        let rank = order
            .iter()
            .position(|&j| gallery_ids[j] == pid)
            .expect("probe id present in gallery");
        hits_at_rank[rank] += 1;
    }
    let mut rates = Vec::with_capacity(g);
    let mut cum = 0usize;
    for hits in hits_at_rank {
        cum += hits;
        rates.push(cum as f64 / p as f64);
    }
    Ok(CmcCurve {
        rates,
        trials_averaged: 1,
    })
}

/// Extracted descriptors for a manifest, aligned with its entry order.
#[derive(Debug, Clone)]
pub struct DescriptorSet {
    pub descriptor_hash: [u8; 32],
    pub blocks: Vec<DescriptorBlock>,
    pub vec_len: usize,
    pub image_ids: Vec<String>,
    pub person_ids: Vec<String>,
    pub cameras: Vec<Camera>,
    pub vectors: Vec<Vec<f64>>,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn index_by_image_id(&self) -> HashMap<&str, usize> {
        self.image_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect()
    }
}

/// Extracts descriptors for every manifest entry (parallel over images).
pub fn extract_all(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<DescriptorSet> {
    let dcfg = &cfg.descriptor;
    dcfg.validate()?;
    let vectors: Vec<Vec<f64>> = manifest
        .entries
        .par_iter()
        .map(|e| -> Result<Vec<f64>> {
            let img = RgbImage::from_path(&e.path)?;
            Ok(extract_descriptor(&img, dcfg, &e.image_id)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks: Vec<DescriptorBlock> = match dcfg.fusion {
        crate::config::FusionMode::DescriptorConcat => dcfg
            .ordered_sets()
            .into_iter()
            .map(DescriptorBlock::Set)
            .collect(),
        crate::config::FusionMode::PixelConcat => vec![DescriptorBlock::FusedPixel],
    };
    let vec_len = vectors.first().map(|v| v.len()).unwrap_or(0);
    Ok(DescriptorSet {
        descriptor_hash: descriptor_config_hash(dcfg),
        blocks,
        vec_len,
        image_ids: manifest.entries.iter().map(|e| e.image_id.clone()).collect(),
        person_ids: manifest.entries.iter().map(|e| e.person_id.clone()).collect(),
        cameras: manifest.entries.iter().map(|e| e.camera).collect(),
        vectors,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RankSummary {
    fn over(values: &[f64]) -> RankSummary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let half = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        RankSummary {
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub probe_camera: Camera,
    pub probe_count: usize,
    pub gallery_size: usize,
    pub rank1: f64,
    pub rank10: f64,
    pub rank20: f64,
    pub cmc: Vec<f64>,
}

/// Wall-clock timings; reported on the console, never serialized, so that
/// report files are byte-reproducible.
#[derive(Debug, Clone, Default)]
pub struct TimingInfo {
    pub extract_secs: f64,
    pub trials_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub metric: String,
    pub trials: usize,
    pub seed: u64,
    pub descriptor_hash: String,
    pub descriptor_len: usize,
    pub rank1: RankSummary,
    pub rank10: RankSummary,
    pub rank20: RankSummary,
    pub mean_cmc: Vec<f64>,
    pub per_trial: Vec<TrialReport>,
    #[serde(skip)]
    pub timing: TimingInfo,
}

struct TrialData<'a> {
    manifest: &'a DatasetManifest,
    descriptors: &'a DescriptorSet,
    person_index: &'a BTreeMap<String, u32>,
    cfg: &'a PipelineConfig,
    metric: MetricKind,
}

/// Full protocol: per trial, normalize train descriptors, fit the metric,
/// score test probes against the test gallery (plus distractors), and
/// compute the CMC, then average across trials.
pub fn evaluate(
    manifest: &DatasetManifest,
    cfg: &PipelineConfig,
    metric: MetricKind,
    cached: Option<&DescriptorSet>,
) -> Result<EvalReport> {
    if manifest.entries.is_empty() {
        return Err(Error::Protocol("empty manifest".into()));
    }
    let t0 = Instant::now();
    let owned;
    let descriptors = match cached {
        Some(set) => {
            let expect = descriptor_config_hash(&cfg.descriptor);
            if set.descriptor_hash != expect {
                return Err(Error::Contract(
                    "descriptor cache was built with a different configuration".into(),
                ));
            }
            set
        }
        None => {
            owned = extract_all(manifest, cfg)?;
            &owned
        }
    };
    let extract_secs = t0.elapsed().as_secs_f64();

    let index = descriptors.index_by_image_id();
    for e in &manifest.entries {
        if !index.contains_key(e.image_id.as_str()) {
            return Err(Error::Contract(format!(
                "descriptor set does not cover manifest entry `{}`",
                e.image_id
            )));
        }
    }

    let person_index: BTreeMap<String, u32> = {
        let mut ids: Vec<String> = manifest.entries.iter().map(|e| e.person_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, s)| (s, i as u32)).collect()
    };

    let splits = generate_splits(manifest, cfg.eval.trials, cfg.seed, cfg.eval.train_count)?;
    let data = TrialData {
        manifest,
        descriptors,
        person_index: &person_index,
        cfg,
        metric,
    };

    let t1 = Instant::now();
    let per_trial: Vec<TrialReport> = splits
        .par_iter()
        .map(|split| run_trial(&data, split).map_err(|e| (split.trial, e)))
        .collect::<std::result::Result<Vec<_>, (usize, Error)>>()
        .map_err(|(trial, e)| Error::Protocol(format!("trial {trial} failed: {e}")))?;
    let trials_secs = t1.elapsed().as_secs_f64();

    let min_len = per_trial.iter().map(|t| t.cmc.len()).min().unwrap_or(0);
    let mut mean_cmc = vec![0.0; min_len];
    for t in &per_trial {
        for k in 0..min_len {
            mean_cmc[k] += t.cmc[k];
        }
    }
    for v in &mut mean_cmc {
        *v /= per_trial.len() as f64;
    }

    let collect = |f: fn(&TrialReport) -> f64| -> Vec<f64> { per_trial.iter().map(f).collect() };
    Ok(EvalReport {
        dataset: manifest.name.clone(),
        metric: metric.name().to_string(),
        trials: per_trial.len(),
        seed: cfg.seed,
        descriptor_hash: hash_hex(&descriptors.descriptor_hash),
        descriptor_len: descriptors.vec_len,
        rank1: RankSummary::over(&collect(|t| t.rank1)),
        rank10: RankSummary::over(&collect(|t| t.rank10)),
        rank20: RankSummary::over(&collect(|t| t.rank20)),
        mean_cmc,
        per_trial,
        timing: TimingInfo {
            extract_secs,
            trials_secs,
        },
    })
}

fn run_trial(data: &TrialData<'_>, split: &EvalSplit) -> Result<TrialReport> {
    let manifest = data.manifest;
    let descriptors = data.descriptors;
    let index = descriptors.index_by_image_id();
    let train_set: BTreeSet<&str> = split.train_ids.iter().map(|s| s.as_str()).collect();
    let test_set: BTreeSet<&str> = split.test_ids.iter().map(|s| s.as_str()).collect();
    let distractors: BTreeSet<String> = manifest.distractor_ids().into_iter().collect();
    let probe_cam = split.probe_camera;
    let gallery_cam = probe_cam.other();

    let entry_rows = |pred: &dyn Fn(&ManifestEntry) -> bool| -> Vec<usize> {
        manifest
            .entries
            .iter()
            .filter(|e| pred(e))
            .map(|e| index[e.image_id.as_str()])
            .collect()
    };

    let train_a = entry_rows(&|e| train_set.contains(e.person_id.as_str()) && e.camera == probe_cam);
    let train_b =
        entry_rows(&|e| train_set.contains(e.person_id.as_str()) && e.camera == gallery_cam);
    let mut probe_rows =
        entry_rows(&|e| test_set.contains(e.person_id.as_str()) && e.camera == probe_cam);
    let mut gallery_rows = entry_rows(&|e| {
        (test_set.contains(e.person_id.as_str()) && e.camera == gallery_cam)
            || distractors.contains(&e.person_id)
    });

    if data.cfg.eval.single_shot {
        let mut rng = trial_rng(data.cfg.seed, split.trial as u64, 1);
        probe_rows = pick_single_shot(descriptors, probe_rows, &mut rng);
        gallery_rows = pick_single_shot(descriptors, gallery_rows, &mut rng);
    }
    if probe_rows.is_empty() || gallery_rows.is_empty() {
        return Err(Error::Protocol("empty probe or gallery set".into()));
    }

    // Training batch: mean removal over all train images, then unit norm.
    let d = descriptors.vec_len;
    let mut mean = vec![0.0f64; d];
    let train_rows: Vec<usize> = train_a.iter().chain(&train_b).copied().collect();
    if train_rows.is_empty() {
        return Err(Error::InsufficientData("no training images in split".into()));
    }
    for &r in &train_rows {
        for (m, v) in mean.iter_mut().zip(&descriptors.vectors[r]) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= train_rows.len() as f64;
    }
    let normalized = |rows: &[usize]| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(rows.len(), d);
        for (i, &r) in rows.iter().enumerate() {
            let mut v = descriptors.vectors[r].clone();
            normalize_with_mean(&mut v, &mean)?;
            for (c, val) in v.iter().enumerate() {
                out[(i, c)] = *val;
            }
        }
        Ok(out)
    };
    let ids_of = |rows: &[usize]| -> Vec<u32> {
        rows.iter()
            .map(|&r| data.person_index[&descriptors.person_ids[r]])
            .collect()
    };

    let pairs = PairSet::new(
        normalized(&train_a)?,
        ids_of(&train_a),
        normalized(&train_b)?,
        ids_of(&train_b),
    )?;
    let model = fit_metric(
        data.metric,
        &pairs,
        mean,
        &data.cfg.metric,
        data.cfg.seed ^ split.trial as u64,
    )?;

    let embed_rows = |rows: &[usize]| -> Result<Vec<DVector<f64>>> {
        rows.par_iter()
            .map(|&r| {
                let prepared = model.prepare(&descriptors.vectors[r])?;
                model.embed(&prepared)
            })
            .collect()
    };
    let probe_vecs = embed_rows(&probe_rows)?;
    let gallery_vecs = embed_rows(&gallery_rows)?;

    let scores_rows: Vec<Vec<f64>> = probe_vecs
        .par_iter()
        .map(|p| gallery_vecs.iter().map(|g| model.score_embedded(p, g)).collect())
        .collect();
    let scores = DMatrix::from_fn(probe_rows.len(), gallery_rows.len(), |r, c| scores_rows[r][c]);

    let cmc = compute_cmc(&scores, &ids_of(&probe_rows), &ids_of(&gallery_rows))?;
    Ok(TrialReport {
        trial: split.trial,
        probe_camera: probe_cam,
        probe_count: probe_rows.len(),
        gallery_size: gallery_rows.len(),
        rank1: cmc.rank(1),
        rank10: cmc.rank(10),
        rank20: cmc.rank(20),
        cmc: cmc.rates,
    })
}

/// Keeps one random image per (person, camera), seeded.
fn pick_single_shot(
    descriptors: &DescriptorSet,
    rows: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut by_key: BTreeMap<(String, u8), Vec<usize>> = BTreeMap::new();
    for r in rows {
        by_key
            .entry((descriptors.person_ids[r].clone(), descriptors.cameras[r].tag()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<usize> = by_key
        .into_values()
        .map(|group| group[rng.random_range(0..group.len())])
        .collect();
    out.sort_unstable();
    out
}

/// One retrieval result row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub rank: usize,
    pub image_id: String,
    pub person_id: String,
    pub camera: Camera,
    pub score: f64,
}

/// Scores a query image against a gallery and returns the ascending top-k
/// (clamped to the gallery size) with stable tie-breaking.
pub fn retrieve(
    query: &RgbImage,
    gallery: &DatasetManifest,
    gallery_descriptors: &DescriptorSet,
    model: &MetricModel,
    cfg: &PipelineConfig,
    k: usize,
) -> Result<Vec<RetrievalHit>> {
    if gallery.entries.is_empty() {
        return Err(Error::Protocol("empty gallery".into()));
    }
    let expect = descriptor_config_hash(&cfg.descriptor);
    if gallery_descriptors.descriptor_hash != expect {
        return Err(Error::Contract(
            "gallery descriptors were built with a different configuration".into(),
        ));
    }
    let query_desc = extract_descriptor(query, &cfg.descriptor, "query")?;
    let q = model.embed(&model.prepare(&query_desc.values)?)?;

    let index = gallery_descriptors.index_by_image_id();
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(gallery.entries.len());
    for e in &gallery.entries {
        let row = *index.get(e.image_id.as_str()).ok_or_else(|| {
            Error::Contract(format!("gallery descriptors missing entry `{}`", e.image_id))
        })?;
        let g = model.embed(&model.prepare(&gallery_descriptors.vectors[row])?)?;
        scored.push((scored.len(), model.score_embedded(&q, &g)));
    }
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite scores").then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k.min(gallery.entries.len()))
        .enumerate()
        .map(|(rank, (idx, score))| {
            let e = &gallery.entries[idx];
            RetrievalHit {
                rank: rank + 1,
                image_id: e.image_id.clone(),
                person_id: e.person_id.clone(),
                camera: e.camera,
                score,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_manifest(ids: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        for i in 0..ids {
            for cam in [Camera::A, Camera::B] {
                entries.push(ManifestEntry {
                    path: PathBuf::from(format!("cam_{cam}/{i}.png")),
                    image_id: format!("cam_{cam}/{i}.png"),
                    person_id: format!("p{i:03}"),
                    camera: cam,
                });
            }
        }
        DatasetManifest {
            name: "toy".into(),
            entries,
        }
    }

    #[test]
    fn splits_partition_identities() {
        let manifest = toy_manifest(20);
        let splits = generate_splits(&manifest, 10, 7, None).unwrap();
        assert_eq!(splits.len(), 10);
        for s in &splits {
            assert_eq!(s.train_ids.len(), 10);
            assert_eq!(s.test_ids.len(), 10);
            let train: BTreeSet<_> = s.train_ids.iter().collect();
            let test: BTreeSet<_> = s.test_ids.iter().collect();
            assert!(train.is_disjoint(&test));
            assert_eq!(train.len() + test.len(), 20);
        }
    }

    #[test]
    fn splits_are_seed_deterministic() {
        let manifest = toy_manifest(16);
        let a = generate_splits(&manifest, 5, 42, None).unwrap();
        let b = generate_splits(&manifest, 5, 42, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.train_ids, y.train_ids);
            assert_eq!(x.test_ids, y.test_ids);
            assert_eq!(x.probe_camera, y.probe_camera);
        }
        let c = generate_splits(&manifest, 5, 43, None).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.train_ids != y.train_ids));
    }

    #[test]
    fn splits_reject_tiny_datasets() {
        let manifest = toy_manifest(1);
        assert!(matches!(
            generate_splits(&manifest, 5, 0, None),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn distractors_pin_probe_camera() {
        let mut manifest = toy_manifest(6);
        // Gallery-only identities live in camera B.
        for i in 0..3 {
            manifest.entries.push(ManifestEntry {
                path: PathBuf::from(format!("extra/{i}.png")),
                image_id: format!("extra/{i}.png"),
                person_id: format!("x{i}"),
                camera: Camera::B,
            });
        }
        let splits = generate_splits(&manifest, 8, 3, None).unwrap();
        assert!(splits.iter().all(|s| s.probe_camera == Camera::A));
        assert_eq!(manifest.distractor_ids().len(), 3);
    }

    #[test]
    fn cmc_perfect_diagonal() {
        let n = 5;
        let scores = DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { 1.0 });
        let ids: Vec<u32> = (0..n as u32).collect();
        let cmc = compute_cmc(&scores, &ids, &ids).unwrap();
        assert_eq!(cmc.rates[0], 1.0);
        assert_eq!(*cmc.rates.last().unwrap(), 1.0);
    }

    #[test]
    fn cmc_monotone_and_terminal_one() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (p, g) = (40, 25);
        let scores = DMatrix::from_fn(p, g, |_, _| rng.random_range(0.0..1.0));
        let probe_ids: Vec<u32> = (0..p as u32).map(|i| i % g as u32).collect();
        let gallery_ids: Vec<u32> = (0..g as u32).collect();
        let cmc = compute_cmc(&scores, &probe_ids, &gallery_ids).unwrap();
        for k in 1..cmc.rates.len() {
            assert!(cmc.rates[k] >= cmc.rates[k - 1]);
        }
        assert!((cmc.rates[g - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cmc_invariant_under_gallery_permutation() {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (p, g) = (30, 20);
        let scores = DMatrix::from_fn(p, g, |_, _| rng.random_range(0.0..1.0));
        let probe_ids: Vec<u32> = (0..p as u32).map(|i| i % g as u32).collect();
        let gallery_ids: Vec<u32> = (0..g as u32).collect();
        let base = compute_cmc(&scores, &probe_ids, &gallery_ids).unwrap();

        let mut perm: Vec<usize> = (0..g).collect();
        perm.shuffle(&mut rng);
        let scores_p = DMatrix::from_fn(p, g, |r, c| scores[(r, perm[c])]);
        let gallery_p: Vec<u32> = perm.iter().map(|&j| gallery_ids[j]).collect();
        let permuted = compute_cmc(&scores_p, &probe_ids, &gallery_p).unwrap();
        for (a, b) in base.rates.iter().zip(&permuted.rates) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cmc_multishot_credits_best_image() {
        // Two gallery images of identity 0: ranks 3 and 1 → credit rank 1.
        let scores = DMatrix::from_row_slice(1, 3, &[0.5, 0.1, 0.3]);
        let cmc = compute_cmc(&scores, &[0], &[0, 0, 1]).unwrap();
        assert_eq!(cmc.rates[0], 1.0);
    }

    #[test]
    fn cmc_rejects_missing_probe_identity() {
        let scores = DMatrix::zeros(1, 2);
        assert!(matches!(
            compute_cmc(&scores, &[9], &[0, 1]),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn cmc_random_scores_match_analytic_curve() {
        // Monte-Carlo oracle: with random scores and one match among G,
        // CMC(k) ≈ k/G.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = 100usize;
        let p = 10_000usize;
        let scores = DMatrix::from_fn(p, g, |_, _| rng.random_range(0.0..1.0));
        let probe_ids: Vec<u32> = (0..p).map(|i| (i % g) as u32).collect();
        let gallery_ids: Vec<u32> = (0..g as u32).collect();
        let cmc = compute_cmc(&scores, &probe_ids, &gallery_ids).unwrap();
        for k in 1..=g {
            let expect = k as f64 / g as f64;
            assert!(
                (cmc.rates[k - 1] - expect).abs() <= 0.02,
                "CMC({k}) = {} vs {expect}",
                cmc.rates[k - 1]
            );
        }
    }

    #[test]
    fn rank_summary_confidence_interval() {
        let s = RankSummary::over(&[0.4, 0.6]);
        assert!((s.mean - 0.5).abs() < 1e-12);
        assert!(s.ci_low < 0.5 && s.ci_high > 0.5);
        let single = RankSummary::over(&[0.7]);
        assert_eq!(single.ci_low, 0.7);
        assert_eq!(single.ci_high, 0.7);
    }
}
