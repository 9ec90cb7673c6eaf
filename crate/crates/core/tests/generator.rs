use driftbench::baseline::{BaselineConfig, BaselinePredictor};
use driftbench::data::{
    generate_drift_stream, load_dataset, split_blocks, write_dataset, ChronoDataset, DriftGenSpec, DriftProfile,
    KindCounts,
};
use driftbench::encoding::{encode_dataset, EncodingPlan};
use driftbench::metrics::auc;

fn spec(profile: DriftProfile, seed: u64) -> DriftGenSpec {
    DriftGenSpec {
        rows: 8000,
        counts: KindCounts {
            categorical: 4,
            numerical: 4,
            multi_valued: 1,
            time: 1,
        },
        blocks: 8,
        profile,
        magnitude: std::f64::consts::FRAC_PI_2,
        cardinality: 20,
        exponent: 1.0,
        seed,
    }
}

fn fixed_model(ds: &ChronoDataset, rows: std::ops::Range<usize>) -> BaselinePredictor {
    let config = BaselineConfig {
        initial_trees: 60,
        max_depth: 3,
        ..BaselineConfig::default()
    };
    let mut p = BaselinePredictor::new("fixed", config).unwrap();
    p.observe(0, &ds.rows()[rows.clone()], &ds.labels()[rows], ds.schema())
        .unwrap();
    p
}

fn auc_on(p: &mut BaselinePredictor, ds: &ChronoDataset, rows: std::ops::Range<usize>) -> f64 {
    let scores = p.score(&ds.rows()[rows.clone()]).unwrap();
    auc(&ds.labels()[rows], &scores).unwrap()
}

#[test]
fn no_drift_halves_score_alike() {
    let mut gaps = Vec::new();
    for seed in 0..10 {
        let ds = generate_drift_stream(&spec(DriftProfile::None, seed)).unwrap();
        let n = ds.len();
        // Fit on the first quarter; compare the rest of the first half with the second half.
        let mut p = fixed_model(&ds, 0..n / 4);
        let first = auc_on(&mut p, &ds, n / 4..n / 2);
        let second = auc_on(&mut p, &ds, n / 2..n);
        gaps.push(first - second);
    }
    let mean_abs_gap = gaps.iter().map(|g| g.abs()).sum::<f64>() / gaps.len() as f64;
    assert!(mean_abs_gap < 0.03, "gaps {gaps:?}");
}

#[test]
fn abrupt_drift_hurts_a_fixed_model() {
    let mut drops = Vec::new();
    for seed in 0..10 {
        let s = spec(DriftProfile::Abrupt, seed);
        let ds = generate_drift_stream(&s).unwrap();
        let plan = split_blocks(&ds, s.blocks).unwrap();
        let drift_row = plan.block(s.drift_block()).start;
        let held_out = plan.block(s.drift_block() - 1);
        let mut p = fixed_model(&ds, 0..held_out.start);
        let pre = auc_on(&mut p, &ds, held_out);
        let post = auc_on(&mut p, &ds, drift_row..ds.len());
        drops.push(pre - post);
    }
    let mean_drop = drops.iter().sum::<f64>() / drops.len() as f64;
    assert!(mean_drop >= 0.10, "drops {drops:?}");
}

#[test]
fn categorical_frequencies_follow_the_power_law() {
    let exponent = 1.2;
    let s = DriftGenSpec {
        rows: 100_000,
        counts: KindCounts {
            categorical: 1,
            numerical: 1,
            multi_valued: 0,
            time: 0,
        },
        blocks: 2,
        profile: DriftProfile::None,
        magnitude: 0.0,
        cardinality: 60,
        exponent,
        seed: 4,
    };
    let ds = generate_drift_stream(&s).unwrap();
    let mut counts = std::collections::HashMap::new();
    for v in ds.column(0, 0..ds.len()) {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    let mut freq: Vec<usize> = counts.into_values().collect();
    freq.sort_unstable_by(|a, b| b.cmp(a));
    let points: Vec<(f64, f64)> = freq[..20]
        .iter()
        .enumerate()
        .map(|(i, &f)| (((i + 1) as f64).ln(), (f as f64).ln()))
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope + exponent).abs() <= 0.3, "slope {slope}");
}

fn dataset_b_analog() -> DriftGenSpec {
    DriftGenSpec {
        rows: 3000,
        counts: KindCounts {
            categorical: 17,
            numerical: 7,
            multi_valued: 1,
            time: 0,
        },
        blocks: 10,
        profile: DriftProfile::Gradual,
        magnitude: 1.0,
        cardinality: 80,
        exponent: 1.1,
        seed: 2018,
    }
}

#[test]
fn dataset_b_analog_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_drift_stream(&dataset_b_analog()).unwrap();
    assert_eq!(ds.schema().width(), 25);
    let (d1, s1) = (dir.path().join("b.csv"), dir.path().join("b.schema"));
    write_dataset(&ds, &d1, &s1).unwrap();
    let back = load_dataset(&d1, &s1).unwrap();
    assert_eq!(back.rows(), ds.rows());
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.schema(), ds.schema());

    let (d2, s2) = (dir.path().join("b2.csv"), dir.path().join("b2.schema"));
    write_dataset(&back, &d2, &s2).unwrap();
    assert_eq!(std::fs::read(&d1).unwrap(), std::fs::read(&d2).unwrap());
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
}

#[test]
fn dataset_b_analog_encodes_to_width_25() {
    let ds = generate_drift_stream(&dataset_b_analog()).unwrap();
    for plan in [
        EncodingPlan::default(),
        EncodingPlan {
            categorical: driftbench::encoding::EncoderKind::TargetMean,
            multi_valued: driftbench::encoding::EncoderKind::Count,
            ..EncodingPlan::default()
        },
    ] {
        let (m, _) = encode_dataset(&ds, plan, 0..300).unwrap();
        assert_eq!(m.cols(), 25);
        assert_eq!(m.rows(), ds.len());
    }
}

#[test]
fn generation_is_deterministic() {
    let s = spec(DriftProfile::Gradual, 77);
    assert_eq!(generate_drift_stream(&s).unwrap(), generate_drift_stream(&s).unwrap());
}
