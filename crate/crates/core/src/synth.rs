//! Synthetic two-camera dataset generator for desk-scale evaluation.
//!
//! Each identity is a stack of 3–5 colored horizontal bands with a
//! per-identity texture. Camera B re-renders the same identity under a
//! per-channel affine illumination shift, a small hue rotation, and stronger
//! pixel noise, so cross-view matching exercises the descriptor's chromatic
//! invariances and the learned metrics' view compensation.

use std::path::Path;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::{Camera, DatasetManifest, ManifestEntry};
use crate::features::{hsv_to_rgb, rgb_to_hsv, STD_HEIGHT, STD_WIDTH};
use crate::io::write_manifest;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub identities: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum Texture {
    HorizontalStripes {
        period: usize,
        duty: f64,
        color2: [f64; 3],
    },
    VerticalStripes {
        period: usize,
        duty: f64,
        color2: [f64; 3],
    },
    Speckle {
        amount: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
struct Band {
    color: [f64; 3],
    texture: Texture,
}

#[derive(Debug, Clone)]
struct Identity {
    bands: Vec<Band>,
    /// Band boundaries as row fractions in (0, 1), sorted.
    cuts: Vec<f64>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic pseudo-noise in [0, 1) for speckle textures.
fn speckle_value(seed: u64, r: usize, c: usize) -> f64 {
    // 2×2 cells so the texture survives mild resampling.
    let h = splitmix(seed ^ ((r as u64 / 2) << 32) ^ (c as u64 / 2));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Small quantized palette (clothing-like): different identities share
    // colors exactly, so raw distances confuse them and cross-view
    // compensation has to do real work.
    let h = rng.random_range(0..5u32) as f64 / 5.0;
    let s = [0.55, 0.9][rng.random_range(0..2usize)];
    let v = [0.4, 0.75][rng.random_range(0..2usize)];
    let (r, g, b) = hsv_to_rgb(h, s, v);
    [r, g, b]
}

fn identity_params(spec_seed: u64, id: usize) -> Identity {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(spec_seed ^ (id as u64) << 8));
    // Pedestrian-like shared layout: head/torso/legs, sometimes shoes.
    // Cut positions carry no identity signal (they are re-jittered per
    // image); colors and textures carry all of it.
    let mut cuts = vec![0.18, 0.52];
    if rng.random_bool(0.5) {
        cuts.push(0.82);
    }
    let n_bands = cuts.len() + 1;
    let bands = (0..n_bands)
        .map(|_b| {
            let color = random_color(&mut rng);
            // Quantized texture vocabulary shared across identities.
            let period = [4usize, 6, 8][rng.random_range(0..3usize)];
            let duty = [0.35, 0.5][rng.random_range(0..2usize)];
            let texture = match rng.random_range(0..4u8) {
                0 => Texture::HorizontalStripes {
                    period,
                    duty,
                    color2: random_color(&mut rng),
                },
                1 => Texture::VerticalStripes {
                    period,
                    duty,
                    color2: random_color(&mut rng),
                },
                2 => Texture::Speckle {
                    amount: [0.15, 0.25][rng.random_range(0..2usize)],
                    // Patterns come from a small shared pool, so speckle is
                    // a texture class, not a per-identity fingerprint.
                    seed: splitmix(spec_seed ^ rng.random_range(0..4u64)),
                },
                _ => Texture::Speckle {
                    // Near-plain band.
                    amount: 0.05,
                    seed: splitmix(spec_seed ^ rng.random_range(0..4u64)),
                },
            };
            Band { color, texture }
        })
        .collect();
    Identity { bands, cuts }
}

struct CameraShift {
    gain: [f64; 3],
    bias: [f64; 3],
    hue_shift: f64,
    noise_sigma: f64,
}

/// Per-image nuisance factors (viewpoint/pose/background analogues); drawn
/// independently for each rendering, in both cameras.
struct Nuisance {
    cut_jitter: Vec<i64>,
    /// Figure column range; outside is background.
    figure_cols: (usize, usize),
    bg_color: [f64; 3],
    bg_seed: u64,
    /// Per-image stripe phases and speckle re-instantiation offsets.
    phase_r: usize,
    phase_c: usize,
    speckle_off: (usize, usize),
    /// Optional occluding rectangle (row0, col0, height, width).
    occluder: Option<(usize, usize, usize, usize)>,
}

fn draw_nuisance(identity: &Identity, rng: &mut ChaCha8Rng) -> Nuisance {
    let ml = rng.random_range(2..9usize);
    let mr = rng.random_range(2..9usize);
    let bg_v: f64 = rng.random_range(0.15..0.85);
    let bg_tint: f64 = rng.random_range(-0.08..0.08);
    let occluder = if rng.random_bool(0.3) {
        let hgt = rng.random_range(16..40usize);
        let wid = rng.random_range(8..20usize);
        let r0 = rng.random_range(0..(STD_HEIGHT - hgt));
        let c0 = rng.random_range(0..(STD_WIDTH - wid));
        Some((r0, c0, hgt, wid))
    } else {
        None
    };
    Nuisance {
        cut_jitter: identity.cuts.iter().map(|_| rng.random_range(-5i64..=5)).collect(),
        figure_cols: (ml, STD_WIDTH - mr),
        bg_color: [
            (bg_v + bg_tint).clamp(0.0, 1.0),
            bg_v,
            (bg_v - bg_tint).clamp(0.0, 1.0),
        ],
        bg_seed: rng.random_range(0..u64::MAX),
        phase_r: rng.random_range(0..16usize),
        phase_c: rng.random_range(0..16usize),
        speckle_off: (rng.random_range(0..64usize), rng.random_range(0..64usize)),
        occluder: occluder.map(|(r0, c0, h, w)| (r0, c0, h, w)),
    }
}

fn render(identity: &Identity, shift: &CameraShift, rng: &mut ChaCha8Rng) -> Array3<f64> {
    let h = STD_HEIGHT;
    let w = STD_WIDTH;
    let nuisance = draw_nuisance(identity, rng);
    let cut_rows: Vec<usize> = identity
        .cuts
        .iter()
        .zip(&nuisance.cut_jitter)
        .map(|(f, j)| (((f * h as f64) as i64) + j).clamp(1, h as i64 - 1) as usize)
        .collect();
    let band_of = |row: usize| -> usize { cut_rows.iter().take_while(|&&c| row >= c).count() };
    let band_start = |band: usize| -> usize {
        if band == 0 {
            0
        } else {
            cut_rows[band - 1]
        }
    };

    let noise = Normal::new(0.0, shift.noise_sigma).expect("valid sigma");
    let mut img = Array3::zeros((h, w, 3));
    for r in 0..h {
        let bi = band_of(r);
        let band = &identity.bands[bi.min(identity.bands.len() - 1)];
        let local_r = r - band_start(bi);
        for c in 0..w {
            let in_figure = c >= nuisance.figure_cols.0 && c < nuisance.figure_cols.1;
            let occluded = nuisance
                .occluder
                .map(|(r0, c0, hh, ww)| r >= r0 && r < r0 + hh && c >= c0 && c < c0 + ww)
                .unwrap_or(false);
            let mut px = if occluded {
                // Matte gray occluder (bag/pole analogue).
                let s = speckle_value(nuisance.bg_seed ^ 0xACC1, r, c);
                [0.35 + 0.1 * s, 0.35 + 0.1 * s, 0.35 + 0.1 * s]
            } else if !in_figure {
                let s = speckle_value(nuisance.bg_seed, r, c);
                let mut bg = nuisance.bg_color;
                for ch in &mut bg {
                    *ch = (*ch * 0.8 + s * 0.2).clamp(0.0, 1.0);
                }
                bg
            } else {
                let mut px = band.color;
                match &band.texture {
                    Texture::HorizontalStripes { period, duty, color2 } => {
                        if ((local_r + nuisance.phase_r) % period) as f64 / *period as f64 > *duty {
                            px = *color2;
                        }
                    }
                    Texture::VerticalStripes { period, duty, color2 } => {
                        if ((c + nuisance.phase_c) % period) as f64 / *period as f64 > *duty {
                            px = *color2;
                        }
                    }
                    Texture::Speckle { amount, seed } => {
                        let s = speckle_value(
                            *seed,
                            local_r + nuisance.speckle_off.0,
                            c + nuisance.speckle_off.1,
                        );
                        for ch in &mut px {
                            *ch = (*ch * (1.0 - amount) + s * amount).clamp(0.0, 1.0);
                        }
                    }
                }
                px
            };
            // Per-channel affine illumination, then hue rotation.
            for ch in 0..3 {
                px[ch] = (px[ch] * shift.gain[ch] + shift.bias[ch]).clamp(0.0, 1.0);
            }
            if shift.hue_shift != 0.0 {
                let (hh, ss, vv) = rgb_to_hsv(px[0], px[1], px[2]);
                let (nr, ng, nb) = hsv_to_rgb(hh + shift.hue_shift, ss, vv);
                px = [nr, ng, nb];
            }
            for ch in 0..3 {
                img[[r, c, ch]] = (px[ch] + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
    }
    img
}

fn save_png(img: &Array3<f64>, path: &Path) -> Result<()> {
    let (h, w, _) = img.dim();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        for ch in 0..3 {
            px.0[ch] = (img[[y as usize, x as usize, ch]] * 255.0).round() as u8;
        }
    }
    buf.save(path)?;
    Ok(())
}

/// Generates the dataset under `out_dir` (cam_a/, cam_b/) and writes a CSV
/// manifest. Fully deterministic given the spec.
pub fn generate(spec: &SynthSpec, out_dir: &Path, manifest_out: &Path) -> Result<DatasetManifest> {
    if spec.identities < 2 {
        return Err(Error::Config(
            "synthetic dataset needs at least 2 identities".into(),
        ));
    }
    std::fs::create_dir_all(out_dir.join("cam_a"))?;
    std::fs::create_dir_all(out_dir.join("cam_b"))?;

    let mut entries = Vec::with_capacity(spec.identities * 2);
    for id in 0..spec.identities {
        let identity = identity_params(spec.seed, id);
        let person = format!("id_{id:04}");
        for cam in [Camera::A, Camera::B] {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
                spec.seed ^ ((id as u64) << 24) ^ (cam.tag() as u64 + 1) << 4,
            ));
            let shift = match cam {
                Camera::A => CameraShift {
                    gain: [1.0, 1.0, 1.0],
                    bias: [0.0, 0.0, 0.0],
                    hue_shift: 0.0,
                    noise_sigma: 0.025,
                },
                Camera::B => CameraShift {
                    gain: [
                        rng.random_range(0.45..1.55),
                        rng.random_range(0.45..1.55),
                        rng.random_range(0.45..1.55),
                    ],
                    bias: [
                        rng.random_range(-0.15..0.15),
                        rng.random_range(-0.15..0.15),
                        rng.random_range(-0.15..0.15),
                    ],
                    // ≤ 10° on the hue circle.
                    hue_shift: rng.random_range(-10.0..10.0) / 360.0,
                    noise_sigma: 0.05,
                },
            };
            let img = render(&identity, &shift, &mut rng);
            let sub = match cam {
                Camera::A => "cam_a",
                Camera::B => "cam_b",
            };
            let rel = format!("{sub}/{person}.png");
            let path = out_dir.join(&rel);
            save_png(&img, &path)?;
            entries.push(ManifestEntry {
                path,
                image_id: rel,
                person_id: person.clone(),
                camera: cam,
            });
        }
    }
    let name = out_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    let manifest = DatasetManifest { name, entries };
    write_manifest(&manifest, manifest_out)?;
    Ok(manifest)
}
