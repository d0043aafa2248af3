//! The three label-noise processes on Gaussian blobs, with the empirical
//! transition matrix of each.
//!
//! `cargo run --release --example noise_injection`

use dynacor::dataset::{inject_noise, make_blobs, measured_noise_rate, BlobConfig, NoiseKind, NoiseSpec};

fn main() -> dynacor::Result<()> {
    let blobs = BlobConfig {
        classes: 4,
        per_class: 2500,
        dim: 8,
        ..Default::default()
    };
    let clean = make_blobs(&blobs, 1)?;
    for kind in [NoiseKind::Symmetric, NoiseKind::AsymmetricNext, NoiseKind::InstanceDependent] {
        let noisy = inject_noise(&clean, &NoiseSpec { kind, rate: 0.3, seed: 2 })?;
        println!("{kind:?}: measured rate {:.4}", measured_noise_rate(&noisy)?);

        let truth = noisy.true_labels().expect("synthetic data keeps truth");
        let mut counts = vec![vec![0usize; blobs.classes]; blobs.classes];
        for (t, o) in truth.iter().zip(noisy.labels()) {
            counts[*t][*o] += 1;
        }
        for row in &counts {
            let n: usize = row.iter().sum();
            let cells: Vec<String> = row.iter().map(|c| format!("{:.3}", *c as f64 / n as f64)).collect();
            println!("  {}", cells.join("  "));
        }
    }
    Ok(())
}
