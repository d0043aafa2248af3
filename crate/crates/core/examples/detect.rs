//! Fits the dynamics encoder on blind trajectories, detects mislabeled rows,
//! and reloads the checkpoint to show the verdicts survive a round trip.
//!
//! `cargo run --release --example detect`

use dynacor::config::RunConfig;
use dynacor::corruption::{corrupt, pool};
use dynacor::dataset::{inject_noise, make_blobs, Provenance};
use dynacor::encoder::{detect, fit_and_detect, load_checkpoint, save_checkpoint, CheckpointMeta};
use dynacor::eval::f1_flags;
use dynacor::trainer::train_and_record;

fn main() -> dynacor::Result<()> {
    let cfg = RunConfig::default().with_seed(1);
    let clean = make_blobs(&cfg.data, cfg.synth_seed())?;
    let noisy = inject_noise(&clean, &cfg.noise)?;
    let pooled = pool(&noisy, &corrupt(&noisy, &cfg.corruption)?)?;
    let run = train_and_record(&pooled, &cfg.classifier)?;

    // The detector never sees the truth column.
    let (outcome, detection) = fit_and_detect(&run.dynamics.without_truth(), &cfg.encoder)?;
    let metric: Vec<String> = outcome
        .history
        .metric
        .iter()
        .map(|m| m.map_or("-".into(), |v| format!("{v:.4}")))
        .collect();
    println!("validation metric per epoch: {}", metric.join(" "));
    println!("selected epoch {}", outcome.selected_epoch);

    let truth: Vec<bool> = run
        .dynamics
        .rows()
        .iter()
        .filter(|r| r.provenance == Provenance::Original)
        .map(|r| r.is_noisy.expect("synthetic data keeps truth"))
        .collect();
    let predicted: Vec<bool> = detection.report.verdicts.iter().map(|v| v.noisy).collect();
    let score = f1_flags(&predicted, &truth);
    println!(
        "flagged {} of {}: precision {:.4} recall {:.4} f1 {:.4}",
        detection.report.flagged(),
        predicted.len(),
        score.precision,
        score.recall,
        score.f1
    );

    let dir = std::env::temp_dir().join("dynacor-detect-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.dync");
    let meta = CheckpointMeta {
        format: "DYNC1".into(),
        config: cfg.encoder.clone(),
        selected_epoch: outcome.selected_epoch,
    };
    save_checkpoint(&outcome.model, &meta, &path)?;
    let (model, _) = load_checkpoint(&path)?;
    let again = detect(&run.dynamics.without_truth(), &model)?;
    println!(
        "reloaded checkpoint reproduces verdicts: {}",
        again.report.verdicts == detection.report.verdicts
    );
    Ok(())
}
