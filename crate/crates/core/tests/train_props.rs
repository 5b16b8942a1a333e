mod common;

use std::collections::BTreeSet;

use atbrg::data::{Dataset, Sample};
use atbrg::metrics::{auc, relative_improvement};
use atbrg::subgraph::{build, ExtractParams};
use atbrg::synth::{generate, SignalMode, SynthSpec};
use atbrg::train::{self, negative_sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        entities: 20,
        items: 20,
        users: 60,
        behaviors_per_user: [2, 6],
        train: 300,
        test: 120,
        seed,
        ..SynthSpec::default()
    }
}

fn small_cfg(epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig {
        epochs,
        batch_size: 32,
        depth: 1,
        desk_scale: true,
        ..TrainConfig::default()
    };
    cfg.model.layers = 3;
    cfg.model.lr = 0.05;
    cfg
}

fn dataset(spec: &SynthSpec) -> Dataset {
    generate(spec).unwrap().dataset
}

fn ckpt_json(t: &train::Trained) -> String {
    serde_json::to_string(&t.checkpoint()).unwrap()
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let ds = dataset(&small_spec(1));
    let cfg = small_cfg(0);
    let trained = train::train(&ds, &ds.train, &cfg).unwrap();
    let init = train::initialize(&ds, &cfg, &ds.train).unwrap();
    assert_eq!(ckpt_json(&trained), ckpt_json(&init));
    assert!(trained.epoch_loss.is_empty());
}

#[test]
fn repeated_single_sample_is_memorized() {
    let ds = dataset(&small_spec(2));
    let mut cfg = small_cfg(1);
    cfg.batch_size = 1;
    for label in [0u8, 1] {
        let sample = Sample {
            label,
            ..ds.train[0].clone()
        };
        let batch = vec![sample];
        let mut trained = train::initialize(&ds, &cfg, &batch).unwrap();
        let mut cache = trained.new_cache();
        train::train_more(&mut trained, &ds, &batch, &mut cache, 200).unwrap();
        let first = trained.epoch_loss[0];
        let last = *trained.epoch_loss.last().unwrap();
        assert!(last < 0.1 * first, "label {label}: {first} -> {last}");
        let p = trained.predict(&ds, &batch, &mut cache).unwrap()[0];
        assert!(if label == 1 { p > 0.9 } else { p < 0.1 }, "p = {p}");
    }
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let ds = dataset(&small_spec(3));
    let cfg = small_cfg(2);
    let a = train::train(&ds, &ds.train, &cfg).unwrap();
    let b = train::train(&ds, &ds.train, &cfg).unwrap();
    assert_eq!(ckpt_json(&a), ckpt_json(&b));
    let c = train::train(&ds, &ds.train, &cfg.with_seed(99)).unwrap();
    assert_ne!(ckpt_json(&a), ckpt_json(&c));
}

#[test]
fn resuming_equals_training_straight_through() {
    let ds = dataset(&small_spec(4));
    let straight = train::train(&ds, &ds.train, &small_cfg(3)).unwrap();
    let mut resumed = train::train(&ds, &ds.train, &small_cfg(1)).unwrap();
    resumed.config.epochs = 3;
    let mut cache = resumed.new_cache();
    train::train_more(&mut resumed, &ds, &ds.train, &mut cache, 2).unwrap();
    assert_eq!(ckpt_json(&straight), ckpt_json(&resumed));
}

#[test]
fn training_loss_keeps_falling() {
    let ds = dataset(&small_spec(5));
    let trained = train::train(&ds, &ds.train, &small_cfg(6)).unwrap();
    let l = &trained.epoch_loss;
    assert!(l[3] > l[4] && l[4] > l[5], "{l:?}");
    assert!(l[5] < l[0]);
}

#[test]
fn relative_improvement_ignores_common_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let (m, b): (f64, f64) = (rng.gen_range(0.3..1.0), rng.gen_range(0.3..1.0));
        let c: f64 = rng.gen_range(0.1..10.0);
        let ri = relative_improvement(m, b).unwrap();
        let scaled = relative_improvement(c * m, c * b).unwrap();
        assert!((ri - scaled).abs() <= 1e-9 * ri.max(1.0));
        assert!(ri >= 0.0);
    }
    assert!(relative_improvement(0.7, 0.0).is_err());
}

#[test]
fn negatives_never_hit_engaged_items() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let universe: Vec<usize> = (0..30).collect();
    for trial in 0..1000 {
        let positives: Vec<Sample> = (0..rng.gen_range(1..6))
            .map(|_| Sample {
                user: rng.gen_range(0..4),
                target: rng.gen_range(0..30),
                behaviors: (0..rng.gen_range(0..8)).map(|_| rng.gen_range(0..30)).collect(),
                label: 1,
            })
            .collect();
        let out = negative_sample(&positives, &universe, 3, trial).unwrap();
        assert_eq!(out.len(), positives.len() * 4);
        for neg in out.iter().filter(|s| s.label == 0) {
            let engaged: BTreeSet<usize> = positives
                .iter()
                .filter(|p| p.user == neg.user)
                .flat_map(|p| std::iter::once(p.target).chain(p.behaviors.iter().copied()))
                .collect();
            assert!(!engaged.contains(&neg.target), "trial {trial}");
        }
    }
}

/// Positive rate by node-count quartile, computed by sorting samples.
fn quartile_rates(ds: &Dataset) -> [f64; 4] {
    let mut rows: Vec<(usize, u8)> = ds
        .train
        .iter()
        .chain(&ds.test)
        .map(|s| {
            let sub = build(&ds.kg, s.target, &s.behaviors, ExtractParams::new(1, usize::MAX)).unwrap();
            (sub.node_count, s.label)
        })
        .collect();
    rows.sort();
    let q = rows.len() / 4;
    let mut out = [0.0; 4];
    for (k, r) in out.iter_mut().enumerate() {
        let chunk = &rows[k * q..(k + 1) * q];
        *r = chunk.iter().map(|&(_, y)| y as f64).sum::<f64>() / chunk.len() as f64;
    }
    out
}

#[test]
fn synthetic_clicks_rise_with_node_count() {
    let ds = dataset(&SynthSpec::default());
    let rates = quartile_rates(&ds);
    assert!(rates.windows(2).all(|w| w[0] < w[1]), "{rates:?}");
}

#[test]
fn zero_signal_is_unlearnable() {
    for mode in [SignalMode::Overlap, SignalMode::Relation] {
        let spec = SynthSpec {
            signal: 0.0,
            mode,
            ..SynthSpec::default()
        };
        let ds = dataset(&spec);
        let (_, report) = train::fit(&ds, &small_cfg(3)).unwrap();
        assert!((report.test_auc - 0.5).abs() < 0.03, "{mode:?}: {}", report.test_auc);
    }
}

#[test]
fn auc_is_the_pair_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let n = rng.gen_range(2..200);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // Coarse scores so that ties are common.
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..12) as f64 / 11.0).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), common::pair_count_auc(&scores, &labels));
    }
}
