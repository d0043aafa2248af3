//! Trains the classifier on original plus corrupted data and shows how the
//! recorded trajectories of clean, mislabeled, and corrupted rows differ.
//!
//! `cargo run --release --example training_dynamics`

use dynacor::config::RunConfig;
use dynacor::corruption::{corrupt, pool};
use dynacor::dataset::{inject_noise, make_blobs, Provenance};
use dynacor::trainer::{summarize, train_and_record_signals, SignalKind};

fn main() -> dynacor::Result<()> {
    let cfg = RunConfig::default().with_seed(1);
    let clean = make_blobs(&cfg.data, cfg.synth_seed())?;
    let noisy = inject_noise(&clean, &cfg.noise)?;
    let pooled = pool(&noisy, &corrupt(&noisy, &cfg.corruption)?)?;
    let run = train_and_record_signals(&pooled, &cfg.classifier, &[SignalKind::LogitDifference])?;

    let losses: Vec<String> = run.epoch_loss.iter().map(|l| format!("{l:.3}")).collect();
    println!("epoch loss: {}", losses.join(" "));

    let margin = run.dynamics_for(SignalKind::LogitDifference).expect("requested above");
    let means = summarize(margin);
    let groups = [
        ("original, clean", Provenance::Original, Some(false)),
        ("original, mislabeled", Provenance::Original, Some(true)),
        ("corrupted", Provenance::Corrupted, None),
    ];
    for (name, provenance, noisy) in groups {
        let rows: Vec<usize> = (0..margin.len())
            .filter(|&i| {
                let r = &margin.rows()[i];
                r.provenance == provenance && noisy.is_none_or(|n| r.is_noisy == Some(n))
            })
            .collect();
        let mean = rows.iter().map(|&i| means[i]).sum::<f64>() / rows.len() as f64;
        println!("{name:<22} rows {:>5}  mean logit difference {mean:>7.3}", rows.len());
        let example = rows[0];
        let signs: String = run
            .dynamics
            .row(example)
            .iter()
            .map(|v| if *v > 0.0 { '+' } else { '-' })
            .collect();
        println!("{:<22} id {:>5}  quantized {signs}", "", margin.rows()[example].id);
    }
    Ok(())
}
