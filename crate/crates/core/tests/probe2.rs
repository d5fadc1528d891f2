// Diagnostic: Euclidean rank-1 per single feature set.
use mlgd::config::{FeatureSet, MetricKind, PipelineConfig};
use mlgd::eval::{evaluate, extract_all};
use mlgd::io::load_manifest;
use mlgd::synth::{generate, SynthSpec};

#[test]
#[ignore]
fn probe_per_set() {
    let dir = tempfile::tempdir().unwrap();
    generate(&SynthSpec { identities: 50, seed: 424242 }, dir.path(), &dir.path().join("m.csv")).unwrap();
    let manifest = load_manifest(&dir.path().join("m.csv")).unwrap();
    for sets in [
        vec![FeatureSet::Ycm],
        vec![FeatureSet::Schmid],
        vec![FeatureSet::Ygohsv],
        vec![FeatureSet::Ygonrng],
    ] {
        let mut cfg = PipelineConfig::default();
        cfg.seed = 7;
        cfg.eval.trials = 3;
        cfg.descriptor.feature_sets = sets.clone();
        let d = extract_all(&manifest, &cfg).unwrap();
        let euc = evaluate(&manifest, &cfg, MetricKind::Euclidean, Some(&d)).unwrap();
        let xq = evaluate(&manifest, &cfg, MetricKind::Xqda, Some(&d)).unwrap();
        println!("{:?}: euclid r1 {:.3}  xqda r1 {:.3}", sets[0], euc.rank1.mean, xq.rank1.mean);
    }
}
