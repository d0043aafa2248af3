//! Label corruption: copy part of the training set, jitter it, and give each
//! copy a different label. Prints the measured noise rate of the copies next
//! to the closed-form prediction.
//!
//! `cargo run --release --example corruption`

use dynacor::corruption::{corrupt, pool, CorruptionConfig};
use dynacor::dataset::{
    inject_noise, make_blobs, measured_noise_rate, BlobConfig, NoiseKind, NoiseRateReport, NoiseSpec,
};

fn main() -> dynacor::Result<()> {
    println!("{:>3} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10}", "C", "eta", "gamma", "corrupted", "predicted", "pooled", "predicted");
    for classes in [2, 5, 10] {
        let blobs = BlobConfig {
            classes,
            per_class: 20_000 / classes,
            dim: 4,
            ..Default::default()
        };
        let clean = make_blobs(&blobs, classes as u64)?;
        for eta in [0.0, 0.2, 0.4] {
            let noisy = inject_noise(&clean, &NoiseSpec { kind: NoiseKind::Symmetric, rate: eta, seed: 3 })?;
            for gamma in [0.1, 1.0] {
                let corrupted = corrupt(&noisy, &CorruptionConfig { rate: gamma, jitter: 0.05, seed: 4 })?;
                let pooled = pool(&noisy, &corrupted)?;
                let predicted = NoiseRateReport::compute(&noisy, gamma)?;
                println!(
                    "{classes:>3} {eta:>5.1} {gamma:>6.1} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    measured_noise_rate(&corrupted)?,
                    predicted.expected_corrupted,
                    measured_noise_rate(&pooled)?,
                    predicted.overall,
                );
            }
        }
    }
    Ok(())
}
