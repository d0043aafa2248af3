//! Mixture-model baselines on logit-difference trajectories: row means
//! (Avg.Encoder) and row sums (area under the margin).
//!
//! `cargo run --release --example baselines`

use dynacor::baselines::{aum_detect, avg_encoder_detect, aum_scores, gmm1d_em};
use dynacor::config::RunConfig;
use dynacor::corruption::{corrupt, pool};
use dynacor::dataset::{inject_noise, make_blobs, Provenance};
use dynacor::eval::{f1_flags, DetectionReport};
use dynacor::trainer::{train_and_record_signals, SignalKind};

fn main() -> dynacor::Result<()> {
    let cfg = RunConfig::default().with_seed(2);
    let clean = make_blobs(&cfg.data, cfg.synth_seed())?;
    let noisy = inject_noise(&clean, &cfg.noise)?;
    let pooled = pool(&noisy, &corrupt(&noisy, &cfg.corruption)?)?;
    let run = train_and_record_signals(&pooled, &cfg.classifier, &[SignalKind::LogitDifference])?;
    let margin = run.dynamics_for(SignalKind::LogitDifference).expect("requested above");

    let originals = margin.indices(Provenance::Original);
    let truth: Vec<bool> = originals.iter().map(|&i| margin.rows()[i].is_noisy == Some(true)).collect();

    let sums = aum_scores(margin);
    let values: Vec<f64> = originals.iter().map(|&i| sums[i]).collect();
    let gmm = gmm1d_em(&values, 500, 1e-10)?;
    println!(
        "area-under-margin mixture: means {:.2} / {:.2}, weights {:.3} / {:.3}, {} EM rounds",
        gmm.means[0],
        gmm.means[1],
        gmm.weights[0],
        gmm.weights[1],
        gmm.log_likelihood.len() - 1
    );

    let blind = margin.without_truth();
    let show = |report: &DetectionReport| {
        let predicted: Vec<bool> = report.verdicts.iter().map(|v| v.noisy).collect();
        let s = f1_flags(&predicted, &truth);
        println!(
            "{:<12} flagged {:>4}  precision {:.4} recall {:.4} f1 {:.4}",
            report.method.name(),
            report.flagged(),
            s.precision,
            s.recall,
            s.f1
        );
    };
    show(&avg_encoder_detect(&blind)?);
    show(&aum_detect(&blind)?);
    Ok(())
}
