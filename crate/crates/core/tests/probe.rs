// Temporary pipeline probe (timing + quality); run with --ignored.

use std::time::Instant;

use mlgd::config::{MetricKind, PipelineConfig};
use mlgd::eval::{evaluate, extract_all};
use mlgd::io::load_manifest;
use mlgd::synth::{generate, SynthSpec};

#[test]
#[ignore]
fn probe_synthetic_e2e() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        identities: 50,
        seed: 424242,
    };
    let t0 = Instant::now();
    generate(&spec, dir.path(), &dir.path().join("manifest.csv")).unwrap();
    println!("synth: {:.2}s", t0.elapsed().as_secs_f64());

    let manifest = load_manifest(&dir.path().join("manifest.csv")).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.seed = 7;
    cfg.eval.trials = 5;

    let t1 = Instant::now();
    let descriptors = extract_all(&manifest, &cfg).unwrap();
    let ex = t1.elapsed().as_secs_f64();
    println!(
        "extract: {:.2}s total, {:.3}s/image, len {}",
        ex,
        ex / manifest.entries.len() as f64,
        descriptors.vec_len
    );

    let t2 = Instant::now();
    let xqda = evaluate(&manifest, &cfg, MetricKind::Xqda, Some(&descriptors)).unwrap();
    println!("xqda eval: {:.2}s", t2.elapsed().as_secs_f64());
    let t3 = Instant::now();
    let euc = evaluate(&manifest, &cfg, MetricKind::Euclidean, Some(&descriptors)).unwrap();
    println!("euclidean eval: {:.2}s", t3.elapsed().as_secs_f64());
    let kiss = evaluate(&manifest, &cfg, MetricKind::Kissme, Some(&descriptors)).unwrap();
    let lfda = evaluate(&manifest, &cfg, MetricKind::Lfda, Some(&descriptors)).unwrap();

    println!(
        "rank-1: xqda {:.3}  euclid {:.3}  kissme {:.3}  lfda {:.3}",
        xqda.rank1.mean, euc.rank1.mean, kiss.rank1.mean, lfda.rank1.mean
    );
    println!(
        "rank-10: xqda {:.3}  euclid {:.3}",
        xqda.rank10.mean, euc.rank10.mean
    );
    for t in &xqda.per_trial {
        println!("  xqda trial {}: r1 {:.3} cam {}", t.trial, t.rank1, t.probe_camera);
    }
}
