//! Compares three ways of picking the encoder epoch: the label-free
//! validation metric, the lowest Davies-Bouldin index, and the epoch with the
//! best F1 in hindsight.
//!
//! `cargo run --release --example stopping_rules`

use dynacor::config::RunConfig;
use dynacor::corruption::{corrupt, pool};
use dynacor::dataset::{inject_noise, make_blobs, Provenance};
use dynacor::encoder::fit;
use dynacor::eval::{f1_flags, min_dbi_epoch, opt_epoch};
use dynacor::trainer::train_and_record;

fn main() -> dynacor::Result<()> {
    let cfg = RunConfig::default().with_seed(4);
    let clean = make_blobs(&cfg.data, cfg.synth_seed())?;
    let noisy = inject_noise(&clean, &cfg.noise)?;
    let pooled = pool(&noisy, &corrupt(&noisy, &cfg.corruption)?)?;
    let run = train_and_record(&pooled, &cfg.classifier)?;
    let truth: Vec<bool> = run
        .dynamics
        .rows()
        .iter()
        .filter(|r| r.provenance == Provenance::Original)
        .map(|r| r.is_noisy == Some(true))
        .collect();

    let outcome = fit(&run.dynamics.without_truth(), &cfg.encoder)?;
    let h = &outcome.history;
    println!("{:>5} {:>9} {:>8} {:>7}", "epoch", "metric", "dbi", "f1");
    for e in 0..h.verdicts.len() {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:>5} {:>9} {:>8} {:>7.4}",
            e + 1,
            fmt(h.metric[e]),
            fmt(h.dbi[e]),
            f1_flags(&h.verdicts[e], &truth).f1
        );
    }
    let at = |epoch: usize| f1_flags(&h.verdicts[epoch - 1], &truth).f1;
    println!("validation metric picks epoch {} (f1 {:.4})", outcome.selected_epoch, at(outcome.selected_epoch));
    match min_dbi_epoch(&h.dbi) {
        Some(e) => println!("lowest DBI picks epoch {e} (f1 {:.4})", at(e)),
        None => println!("DBI undefined at every epoch"),
    }
    let (best, best_f1) = opt_epoch(&h.verdicts, &truth)?;
    println!("hindsight best is epoch {best} (f1 {best_f1:.4})");
    Ok(())
}
