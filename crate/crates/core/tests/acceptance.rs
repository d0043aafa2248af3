//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynacor::baselines::avg_encoder_detect;
use dynacor::config::RunConfig;
use dynacor::corruption::{corrupt, pool, CorruptionConfig};
use dynacor::dataset::{
    inject_noise, make_blobs, measured_noise_rate, BlobConfig, LabeledDataset, NoiseKind, NoiseSpec, Provenance,
};
use dynacor::encoder::clustering::{alignment_loss_with_grads, cluster_loss_row_grad};
use dynacor::encoder::{
    assign, build_encoder, cluster_loss, fit_and_detect, target_distribution, verdict, Assignment, EncoderConfig,
};
use dynacor::eval::{f1_flags, opt_epoch, supervised_probe, ProbeConfig, ProbeInput};
use dynacor::nn::{check_gradient, grad_check, GradCheckReport, kl_divergence, softmax_cross_entropy, Conv1d, Dense, Layer, Sequential, Tensor};
use dynacor::pipeline::{artifacts, run_pipeline};
use dynacor::trainer::{train_and_record_signals, DynamicsMatrix, RowMeta, SignalKind};

const GRAD_TOL: f64 = 1e-4;
const TRIALS: usize = 100;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}

/// Quadratic readout `sum r_i y_i + 0.5 sum y_i^2` with its output gradient.
fn quadratic(r: Vec<f64>) -> impl Fn(&Tensor) -> dynacor::Result<(f64, Tensor)> {
    move |out: &Tensor| {
        let y = out.data();
        let loss = y.iter().zip(&r).map(|(y, r)| r * y + 0.5 * y * y).sum();
        let g: Vec<f64> = y.iter().zip(&r).map(|(y, r)| r + y).collect();
        Ok((loss, Tensor::new(out.shape().to_vec(), g)?))
    }
}

fn ce(label: usize) -> impl Fn(&Tensor) -> dynacor::Result<(f64, Tensor)> {
    move |out: &Tensor| {
        let (l, g) = softmax_cross_entropy(out.data(), label)?;
        Ok((l, Tensor::vector(g)))
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 8];
    let mut failures = Vec::new();
    let (mut checked, mut skipped) = (0usize, 0usize);
    let mut record = |slot: usize, name: &str, trial: usize, r: GradCheckReport, worst: &mut [f64; 8]| {
        worst[slot] = worst[slot].max(r.max_rel_error);
        checked += r.checked;
        skipped += r.skipped;
        if !r.passed {
            failures.push(format!("{name}#{trial}={:.2e}", r.max_rel_error));
        }
    };
    for t in 0..TRIALS {
        // Dense layer under a quadratic readout.
        let (i, o) = (rng.random_range(1..8), rng.random_range(1..8));
        let mut net = Sequential::new(vec![Layer::Dense(Dense::new(i, o, &mut rng))]);
        let x = Tensor::vector(gaussian_vec(&mut rng, i));
        let r = grad_check(&mut net, &x, quadratic(gaussian_vec(&mut rng, o)), GRAD_TOL).unwrap();
        record(0, "dense", t, r, &mut worst);

        // Conv1d layer.
        let (ci, co, k) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..5));
        let len = k + rng.random_range(0..6);
        let mut net = Sequential::new(vec![Layer::Conv1d(Conv1d::new(ci, co, k, &mut rng))]);
        let x = Tensor::new(vec![ci, len], gaussian_vec(&mut rng, ci * len)).unwrap();
        let r = grad_check(&mut net, &x, quadratic(gaussian_vec(&mut rng, co * (len - k + 1))), GRAD_TOL).unwrap();
        record(1, "conv1d", t, r, &mut worst);

        // Rectifier and mean-pool between two parameterized layers.
        let mut net = Sequential::new(vec![
            Layer::Conv1d(Conv1d::new(1, 3, 3, &mut rng)),
            Layer::Relu,
            Layer::MeanPool,
            Layer::Dense(Dense::new(3, 2, &mut rng)),
        ]);
        let x = Tensor::new(vec![1, 8], gaussian_vec(&mut rng, 8)).unwrap();
        let r = grad_check(&mut net, &x, quadratic(gaussian_vec(&mut rng, 2)), GRAD_TOL).unwrap();
        record(2, "relu+pool", t, r, &mut worst);

        // Classifier MLP under softmax cross-entropy.
        let classes = rng.random_range(2..6);
        let mut net = Sequential::mlp(&[4, 6, classes], &mut rng);
        let x = Tensor::vector(gaussian_vec(&mut rng, 4));
        let r = grad_check(&mut net, &x, ce(rng.random_range(0..classes)), GRAD_TOL).unwrap();
        record(3, "mlp+ce", t, r, &mut worst);

        // Encoder under a quadratic readout of its representation.
        let cfg = EncoderConfig {
            channels: [2, 3, 3],
            rep_dim: 4,
            ..Default::default()
        };
        let mut net = build_encoder(&cfg, &mut rng);
        let x = Tensor::new(vec![1, 12], gaussian_vec(&mut rng, 12)).unwrap();
        let r = grad_check(&mut net, &x, quadratic(gaussian_vec(&mut rng, 4)), GRAD_TOL).unwrap();
        record(4, "encoder", t, r, &mut worst);

        // Clustering loss with respect to the representation.
        let target = Assignment::from_noisy(rng.random_range(0.05..0.95));
        let (mu_n, mu_c) = (gaussian_vec(&mut rng, 5), gaussian_vec(&mut rng, 5));
        let z = gaussian_vec(&mut rng, 5);
        let g = cluster_loss_row_grad(&z, &mu_n, &mu_c, target).unwrap();
        let f = |v: &[f64]| cluster_loss_row_grad(v, &mu_n, &mu_c, target).unwrap().loss;
        let r = check_gradient(f, &z, &g.z, GRAD_TOL);
        record(7, "cluster-z", t, r, &mut worst);

        // Clustering loss with respect to both centroids.
        let z = gaussian_vec(&mut rng, 5);
        let mus = gaussian_vec(&mut rng, 10);
        let g = cluster_loss_row_grad(&z, &mus[..5], &mus[5..], target).unwrap();
        let analytic: Vec<f64> = g.mu_noisy.iter().chain(&g.mu_clean).copied().collect();
        let f = |m: &[f64]| cluster_loss_row_grad(&z, &m[..5], &m[5..], target).unwrap().loss;
        let r = check_gradient(f, &mus, &analytic, GRAD_TOL);
        record(5, "centroids", t, r, &mut worst);

        // Alignment loss with respect to every representation.
        let n = 8;
        let flat = gaussian_vec(&mut rng, n * 3);
        let prov: Vec<Provenance> = (0..n)
            .map(|i| if i % 2 == 0 { Provenance::Original } else { Provenance::Corrupted })
            .collect();
        let verdicts: Vec<bool> = (0..n).map(|i| i % 4 < 2).collect();
        let reps = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(3).map(<[f64]>::to_vec).collect() };
        let align = |v: &[f64]| {
            let rs = reps(v);
            let refs: Vec<&[f64]> = rs.iter().map(Vec::as_slice).collect();
            alignment_loss_with_grads(&refs, &prov, &verdicts).unwrap()
        };
        let analytic: Vec<f64> = align(&flat).grads.concat();
        let r = check_gradient(|v| align(v).loss, &flat, &analytic, GRAD_TOL);
        record(6, "alignment", t, r, &mut worst);
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(30);
    outcome(
        failures.is_empty() && fast,
        format!(
            "{TRIALS} trials x 8 checks, {checked} coordinates ({skipped} skipped at rectifier kinks), worst rel error {:.2e}, {:.1}s{}",
            worst.iter().cloned().fold(0.0, f64::max),
            elapsed.as_secs_f64(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failures: {}", failures.join(" "))
            }
        ),
    )
}

fn blobs(classes: usize, per_class: usize, seed: u64) -> LabeledDataset {
    let cfg = BlobConfig {
        classes,
        per_class,
        dim: 2,
        ..Default::default()
    };
    make_blobs(&cfg, seed).unwrap()
}

fn corrupted_rate(ds: &LabeledDataset) -> f64 {
    measured_noise_rate(ds).unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (classes, eta) in [(2usize, 0.4), (5, 0.3), (10, 0.3)] {
        let n = 100_000;
        let clean = blobs(classes, n / classes, 20 + classes as u64);
        let noisy = inject_noise(
            &clean,
            &NoiseSpec {
                kind: NoiseKind::Symmetric,
                rate: eta,
                seed: 7,
            },
        )
        .unwrap();
        let corr = corrupt(
            &noisy,
            &CorruptionConfig {
                rate: 1.0,
                seed: 9,
                ..Default::default()
            },
        )
        .unwrap();
        let measured = corrupted_rate(&corr);
        let expected = 1.0 - eta / (classes as f64 - 1.0);
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        let bound = 1.0 - 1.0 / classes as f64;
        let good = measured > bound && (measured - expected).abs() <= 3.0 * sigma;
        ok &= good;
        parts.push(format!(
            "C={classes} eta={eta}: {measured:.4} vs {expected:.4} ({:.1} sigma, bound {bound:.3})",
            (measured - expected).abs() / sigma
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(10);
    outcome(ok, format!("{}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()))
}

fn criterion_3() -> Outcome {
    let (classes, eta, n) = (5usize, 0.3, 100_000usize);
    let clean = blobs(classes, n / classes, 31);
    let noisy = inject_noise(
        &clean,
        &NoiseSpec {
            kind: NoiseKind::Symmetric,
            rate: eta,
            seed: 4,
        },
    )
    .unwrap();
    let eta_gamma = 1.0 - eta / (classes as f64 - 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, gamma) in [0.1, 0.5, 1.0].into_iter().enumerate() {
        let corr = corrupt(
            &noisy,
            &CorruptionConfig {
                rate: gamma,
                seed: 50 + k as u64,
                ..Default::default()
            },
        )
        .unwrap();
        let pooled = pool(&noisy, &corr).unwrap();
        let measured = corrupted_rate(&pooled);
        let expected = (eta + gamma * eta_gamma) / (1.0 + gamma);
        let m = pooled.len() as f64;
        let sigma = (expected * (1.0 - expected) / m).sqrt();
        let good = (measured - expected).abs() <= 3.0 * sigma;
        ok &= good;
        parts.push(format!(
            "gamma={gamma}: {measured:.4} vs {expected:.4} ({:.1} sigma)",
            (measured - expected).abs() / sigma
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_sum: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let mut single_exact = true;
    let mut kl_ok = true;
    for _ in 0..1000 {
        let d = rng.random_range(2..10);
        let z = gaussian_vec(&mut rng, d);
        let mn = gaussian_vec(&mut rng, d);
        let mc = gaussian_vec(&mut rng, d);
        let q = assign(&z, &mn, &mc).unwrap();
        worst_sum = worst_sum.max((q.q_noisy + q.q_clean - 1.0).abs());
        for c in [0.5, 3.0] {
            let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
            let qc = assign(&zc, &mn, &mc).unwrap();
            worst_scale = worst_scale.max((qc.q_noisy - q.q_noisy).abs());
        }
        let p = target_distribution(&[q]).unwrap();
        single_exact &= p[0] == q;
        let other = Assignment::from_noisy(rng.random_range(0.0..1.0));
        kl_ok &= kl_divergence(&other.as_pair(), &q.as_pair()).unwrap() >= 0.0;
        kl_ok &= cluster_loss(&p, &[q]).unwrap() >= 0.0;
    }
    let tie_clean = !verdict(0.5);
    let ok = worst_sum <= 1e-12 && single_exact && kl_ok && tie_clean && worst_scale <= 1e-9;
    outcome(
        ok,
        format!(
            "sum err {worst_sum:.1e}, single-row p=q {single_exact}, KL>=0 {kl_ok}, tie->clean {tie_clean}, scale err {worst_scale:.1e}"
        ),
    )
}

/// Clean rows constant +1, noisy rows constant -1.
fn separable_dynamics() -> DynamicsMatrix {
    let (n, epochs) = (2000usize, 30usize);
    let n_corr = n / 10;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut push = |id: u64, provenance, noisy: bool| {
        rows.push(RowMeta {
            id,
            provenance,
            observed_label: 0,
            is_noisy: Some(noisy),
        });
        values.extend(std::iter::repeat_n(if noisy { -1.0 } else { 1.0 }, epochs));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut flags: Vec<bool> = (0..n).map(|i| i < n * 3 / 10).collect();
    rand::seq::SliceRandom::shuffle(flags.as_mut_slice(), &mut rng);
    for (i, &noisy) in flags.iter().enumerate() {
        push(i as u64, Provenance::Original, noisy);
    }
    // Companions copy random originals with flipped labels: a clean source
    // becomes noisy; a noisy source is repaired with chance 1/(C-1), C = 4.
    for k in 0..n_corr {
        let src = rng.random_range(0..n);
        let noisy = !flags[src] || rng.random_range(0..3) != 0;
        push((n + k) as u64, Provenance::Corrupted, noisy);
    }
    DynamicsMatrix::new(rows, values, epochs, SignalKind::QuantizedLogitDifference).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let dynamics = separable_dynamics();
    let truth: Vec<bool> = dynamics
        .rows()
        .iter()
        .filter(|r| r.provenance == Provenance::Original)
        .map(|r| r.is_noisy.unwrap())
        .collect();
    let cfg = EncoderConfig {
        seed: 5,
        ..Default::default()
    };
    let (fit, det) = fit_and_detect(&dynamics.without_truth(), &cfg).unwrap();
    let pred: Vec<bool> = det.report.verdicts.iter().map(|v| v.noisy).collect();
    let f1 = f1_flags(&pred, &truth).f1;
    let metric = fit.history.metric[fit.selected_epoch - 1].unwrap_or(f64::NEG_INFINITY);
    let elapsed = start.elapsed();
    let ok = f1 == 1.0 && metric >= 0.9 && elapsed < Duration::from_secs(60);
    outcome(
        ok,
        format!(
            "F1 {f1:.4} (target 1.0), metric at epoch {} = {metric:.4} (target >= 0.9; cosine kernel caps it at 0.25), {:.1}s",
            fit.selected_epoch,
            elapsed.as_secs_f64()
        ),
    )
}

struct BlobRun {
    seed: u64,
    dynacor: f64,
    avg_encoder: f64,
    probe: f64,
    opt_epoch_f1: f64,
    max_epoch_f1: f64,
    seconds: f64,
}

const SUITE_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn original_truth(d: &DynamicsMatrix) -> Vec<bool> {
    d.rows()
        .iter()
        .filter(|r| r.provenance == Provenance::Original)
        .map(|r| r.is_noisy.unwrap())
        .collect()
}

fn pooled_for(cfg: &RunConfig) -> LabeledDataset {
    let clean = make_blobs(&cfg.data, cfg.synth_seed()).unwrap();
    let noisy = inject_noise(&clean, &cfg.noise).unwrap();
    let corr = corrupt(&noisy, &cfg.corruption).unwrap();
    pool(&noisy, &corr).unwrap()
}

fn blob_suite() -> &'static [BlobRun] {
    static SUITE: OnceLock<Vec<BlobRun>> = OnceLock::new();
    SUITE.get_or_init(|| {
        SUITE_SEEDS
            .iter()
            .map(|&seed| {
                let start = Instant::now();
                let cfg = RunConfig::default().with_seed(seed);
                let pooled = pooled_for(&cfg);
                let run = train_and_record_signals(&pooled, &cfg.classifier, &[SignalKind::LogitDifference]).unwrap();
                let truth = original_truth(&run.dynamics);
                let (fit, det) = fit_and_detect(&run.dynamics.without_truth(), &cfg.encoder).unwrap();
                let pred: Vec<bool> = det.report.verdicts.iter().map(|v| v.noisy).collect();
                let margin = run.dynamics_for(SignalKind::LogitDifference).unwrap();
                let avg = avg_encoder_detect(&margin.without_truth()).unwrap();
                let avg_pred: Vec<bool> = avg.verdicts.iter().map(|v| v.noisy).collect();
                let probe = supervised_probe(
                    &run.dynamics,
                    &ProbeConfig {
                        seed,
                        ..Default::default()
                    },
                )
                .unwrap();
                let (_, opt_f1) = opt_epoch(&fit.history.verdicts, &truth).unwrap();
                let max_epoch_f1 = f1_flags(fit.history.verdicts.last().unwrap(), &truth).f1;
                BlobRun {
                    seed,
                    dynacor: f1_flags(&pred, &truth).f1,
                    avg_encoder: f1_flags(&avg_pred, &truth).f1,
                    probe: probe.test_f1,
                    opt_epoch_f1: opt_f1,
                    max_epoch_f1,
                    seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    })
}

fn criterion_6() -> Outcome {
    let runs = blob_suite();
    let col = |f: fn(&BlobRun) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let (dm, ds) = mean_std(&col(|r| r.dynacor));
    let (am, asd) = mean_std(&col(|r| r.avg_encoder));
    let (pm, psd) = mean_std(&col(|r| r.probe));
    let floor = 2.0 * 0.3 / 1.3;
    let slowest = col(|r| r.seconds).into_iter().fold(0.0, f64::max);
    let ok = dm >= floor + 0.25 && dm >= am - 0.02 && dm >= pm - 0.15 && slowest < 300.0;
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| format!("s{}={:.3}/{:.3}/{:.3}", r.seed, r.dynacor, r.avg_encoder, r.probe))
        .collect();
    outcome(
        ok,
        format!(
            "DynaCor {dm:.4}±{ds:.4} (floor {:.4}), Avg.Encoder {am:.4}±{asd:.4}, probe {pm:.4}±{psd:.4}, slowest seed {slowest:.0}s [{}]",
            floor + 0.25,
            per_seed.join(" ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let runs = blob_suite();
    let col = |f: fn(&BlobRun) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let (sel, _) = mean_std(&col(|r| r.dynacor));
    let (opt, _) = mean_std(&col(|r| r.opt_epoch_f1));
    let (last, _) = mean_std(&col(|r| r.max_epoch_f1));
    let ok = (opt - sel).abs() <= 0.03 && sel >= last - 0.03;
    outcome(
        ok,
        format!("metric-selected {sel:.4}, opt-epoch {opt:.4}, max-epoch {last:.4} (means over {} seeds)", runs.len()),
    )
}

fn criterion_8() -> Outcome {
    let mut traj = Vec::new();
    let mut summ = Vec::new();
    for &seed in &SUITE_SEEDS {
        let mut cfg = RunConfig::default().with_seed(seed);
        cfg.noise.kind = NoiseKind::AsymmetricNext;
        cfg.noise.rate = 0.3;
        let pooled = pooled_for(&cfg);
        let run = train_and_record_signals(&pooled, &cfg.classifier, &[]).unwrap();
        let probe = |input| {
            supervised_probe(
                &run.dynamics,
                &ProbeConfig {
                    input,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap()
            .test_f1
        };
        traj.push(probe(ProbeInput::Trajectory));
        summ.push(probe(ProbeInput::Summary));
    }
    let (tm, tsd) = mean_std(&traj);
    let (sm, ssd) = mean_std(&summ);
    outcome(
        tm >= sm,
        format!("trajectory probe {tm:.4}±{tsd:.4} vs row-mean probe {sm:.4}±{ssd:.4} (asymmetric-next, 5 paired seeds)"),
    )
}

fn criterion_9() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let mut cfg = RunConfig::default().with_seed(11);
        cfg.out_dir = d.path().to_path_buf();
        run_pipeline(&cfg).unwrap();
    }
    let mut files = vec![artifacts::DYNAMICS.to_string(), artifacts::MARGIN_DYNAMICS.to_string()];
    files.extend(RunConfig::default().eval.methods.iter().map(|m| artifacts::report(*m)));
    let mut differing = Vec::new();
    for f in &files {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        if a != b {
            differing.push(f.clone());
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        ("1", "gradient suite", criterion_1),
        ("2", "corrupted-set noise rate", criterion_2),
        ("3", "overall noise-rate identity", criterion_3),
        ("4", "assignment algebra", criterion_4),
        ("5", "constructed-separable oracle", criterion_5),
        ("6", "end-to-end blobs", criterion_6),
        ("7", "validation-metric epoch selection", criterion_7),
        ("8", "trajectory vs row-mean probe", criterion_8),
        ("9", "pipeline determinism", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let key = format!("criterion_{id}");
        if !filter.is_empty() && !filter.iter().any(|f| key.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failed += 1;
        }
        println!(
            "criterion {id} ({name}): {} - {}",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
