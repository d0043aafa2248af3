//! Supervised probes on the recorded dynamics: the whole trajectory through
//! the encoder architecture versus only the row mean through an MLP, under
//! asymmetric noise.
//!
//! `cargo run --release --example supervised_probe`

use dynacor::config::RunConfig;
use dynacor::corruption::{corrupt, pool};
use dynacor::dataset::{inject_noise, make_blobs, NoiseKind};
use dynacor::eval::{supervised_probe, ProbeConfig, ProbeInput};
use dynacor::trainer::train_and_record;

fn main() -> dynacor::Result<()> {
    let mut cfg = RunConfig::default().with_seed(3);
    cfg.noise.kind = NoiseKind::AsymmetricNext;
    let clean = make_blobs(&cfg.data, cfg.synth_seed())?;
    let noisy = inject_noise(&clean, &cfg.noise)?;
    let pooled = pool(&noisy, &corrupt(&noisy, &cfg.corruption)?)?;
    let run = train_and_record(&pooled, &cfg.classifier)?;

    for input in [ProbeInput::Trajectory, ProbeInput::Summary] {
        let outcome = supervised_probe(
            &run.dynamics,
            &ProbeConfig {
                input,
                seed: 3,
                ..Default::default()
            },
        )?;
        println!(
            "{input:?}: test f1 {:.4} (best validation epoch {}, split {:?})",
            outcome.test_f1, outcome.best_epoch, outcome.split_sizes
        );
    }
    Ok(())
}
