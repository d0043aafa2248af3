//! Sampling checks against closed-form rates, plus training and fitting
//! invariants that need a real run.

use std::collections::HashMap;

use dynacor::corruption::{corrupt, pool, CorruptionConfig};
use dynacor::dataset::{
    expected_corrupted_noise_rate, inject_noise, make_blobs, measured_noise_rate, BlobConfig,
    LabeledDataset, NoiseKind, NoiseSpec, Provenance,
};
use dynacor::encoder::{fit, EncoderConfig};
use dynacor::trainer::{train_and_record, ClassifierConfig, SignalKind};

fn blobs(classes: usize, per_class: usize, dim: usize, seed: u64) -> LabeledDataset {
    let cfg = BlobConfig {
        classes,
        per_class,
        dim,
        ..Default::default()
    };
    make_blobs(&cfg, seed).unwrap()
}

fn symmetric(rate: f64, seed: u64) -> NoiseSpec {
    NoiseSpec {
        kind: NoiseKind::Symmetric,
        rate,
        seed,
    }
}

fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn symmetric_flips_spread_evenly() {
    let classes = 4;
    let eta = 0.3;
    let ds = blobs(classes, 5000, 2, 3);
    let noisy = inject_noise(&ds, &symmetric(eta, 4)).unwrap();
    let truth = noisy.true_labels().unwrap();
    let mut counts = vec![vec![0usize; classes]; classes];
    for (t, o) in truth.iter().zip(noisy.labels()) {
        counts[*t][*o] += 1;
    }
    let off = eta / (classes - 1) as f64;
    for (i, row) in counts.iter().enumerate() {
        let n: usize = row.iter().sum();
        for (j, c) in row.iter().enumerate() {
            let expected = if i == j { 1.0 - eta } else { off };
            let freq = *c as f64 / n as f64;
            let tol = 3.0 * binomial_sigma(expected, n);
            assert!(
                (freq - expected).abs() <= tol,
                "T[{i}][{j}] = {freq}, expected {expected} +- {tol}"
            );
        }
    }
}

#[test]
fn corrupted_labels_are_uniform_over_other_classes() {
    // Chi-square with C - 2 = 3 degrees of freedom; 0.1% critical value.
    const CRITICAL: f64 = 16.266;
    let classes = 5;
    let ds = blobs(classes, 4000, 2, 5);
    let corrupted = corrupt(&ds, &CorruptionConfig { rate: 1.0, jitter: 0.0, seed: 6 }).unwrap();
    let source: HashMap<u64, usize> = ds.ids().iter().copied().zip(ds.labels().iter().copied()).collect();
    let mut counts = vec![vec![0usize; classes]; classes];
    for (src, label) in corrupted.source_ids().iter().zip(corrupted.labels()) {
        counts[source[&src.unwrap()]][*label] += 1;
    }
    for (from, row) in counts.iter().enumerate() {
        assert_eq!(row[from], 0);
        let n: usize = row.iter().sum();
        let expected = n as f64 / (classes - 1) as f64;
        let chi2: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != from)
            .map(|(_, c)| (*c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < CRITICAL, "class {from}: chi2 {chi2}");
    }
}

#[test]
fn corrupted_noise_rate_matches_prediction_across_grid() {
    let n = 20_000;
    for classes in [2usize, 5, 10] {
        for eta in [0.0, 0.2, 0.4] {
            let ds = blobs(classes, n / classes, 2, classes as u64);
            let noisy = inject_noise(&ds, &symmetric(eta, 100 + classes as u64)).unwrap();
            let measured_eta = measured_noise_rate(&noisy).unwrap();
            let corrupted = corrupt(&noisy, &CorruptionConfig { rate: 1.0, jitter: 0.05, seed: 7 }).unwrap();
            let rate = measured_noise_rate(&corrupted).unwrap();
            let expected = expected_corrupted_noise_rate(measured_eta, classes).unwrap();
            let tol = 3.0 * binomial_sigma(expected, corrupted.len());
            assert!(
                (rate - expected).abs() <= tol,
                "C={classes} eta={eta}: {rate} vs {expected} +- {tol}"
            );
            assert!(rate >= 1.0 - 1.0 / classes as f64 - tol);
        }
    }
}

#[test]
fn same_seed_same_bits() {
    let a = blobs(3, 50, 4, 9);
    let b = blobs(3, 50, 4, 9);
    assert_eq!(a, b);
    let na = inject_noise(&a, &symmetric(0.2, 1)).unwrap();
    let ca = corrupt(&na, &CorruptionConfig { rate: 0.3, jitter: 0.2, seed: 2 }).unwrap();
    let cb = corrupt(&inject_noise(&b, &symmetric(0.2, 1)).unwrap(), &CorruptionConfig { rate: 0.3, jitter: 0.2, seed: 2 }).unwrap();
    assert_eq!(ca, cb);
    let other = corrupt(&na, &CorruptionConfig { rate: 0.3, jitter: 0.2, seed: 3 }).unwrap();
    assert_ne!(ca, other);
}

fn small_pool(seed: u64) -> LabeledDataset {
    let ds = blobs(3, 80, 4, seed);
    let noisy = inject_noise(&ds, &symmetric(0.2, seed + 1)).unwrap();
    let corrupted = corrupt(&noisy, &CorruptionConfig { rate: 0.5, jitter: 0.05, seed: seed + 2 }).unwrap();
    pool(&noisy, &corrupted).unwrap()
}

fn small_classifier() -> ClassifierConfig {
    ClassifierConfig {
        hidden: vec![16],
        epochs: 12,
        batch_size: 32,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn recorded_dynamics_are_well_formed() {
    let pooled = small_pool(21);
    let run = train_and_record(&pooled, &small_classifier()).unwrap();
    let d = &run.dynamics;
    assert_eq!(d.signal(), SignalKind::QuantizedLogitDifference);
    assert_eq!((d.len(), d.epochs()), (pooled.len(), 12));
    assert!(d.values().iter().all(|v| *v == 1.0 || *v == -1.0));
    for (i, row) in d.rows().iter().enumerate() {
        assert_eq!(row.id, pooled.ids()[i]);
        assert_eq!(row.provenance, pooled.provenance()[i]);
        assert_eq!(row.observed_label, pooled.labels()[i]);
        let truth = pooled.true_labels().unwrap()[i];
        assert_eq!(row.is_noisy, Some(pooled.labels()[i] != truth));
    }
    let again = train_and_record(&pooled, &small_classifier()).unwrap();
    assert_eq!(again.dynamics.values(), d.values());
    assert_eq!(again.epoch_loss, run.epoch_loss);
}

#[test]
fn loss_settles_on_clean_separable_data() {
    let ds = blobs(4, 250, 16, 31);
    let cfg = ClassifierConfig { seed: 5, ..Default::default() };
    let run = train_and_record(&ds, &cfg).unwrap();
    for (e, w) in run.epoch_loss.windows(2).enumerate() {
        assert!(w[1] <= 1.05 * w[0], "epoch {} -> {}: {} -> {}", e + 1, e + 2, w[0], w[1]);
    }
    assert!(run.epoch_loss.last().unwrap() < &0.1);
}

#[test]
fn encoder_fit_is_bit_reproducible_and_truth_blind() {
    let pooled = small_pool(41);
    let run = train_and_record(&pooled, &small_classifier()).unwrap();
    let cfg = EncoderConfig {
        epochs: 3,
        batch_size: 64,
        channels: [4, 4, 4],
        rep_dim: 4,
        seed: 8,
        ..Default::default()
    };
    let a = fit(&run.dynamics, &cfg).unwrap();
    let b = fit(&run.dynamics.without_truth(), &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.selected_epoch, b.selected_epoch);
    assert_eq!(a.model.mu_noisy.data(), b.model.mu_noisy.data());
    for m in a.history.metric.iter().flatten() {
        assert!((0.0..=0.25).contains(m));
    }
    let corrupted_rows = run.dynamics.count(Provenance::Corrupted);
    assert!(corrupted_rows > 0);
}
