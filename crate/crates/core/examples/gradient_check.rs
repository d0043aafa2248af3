//! Finite-difference check of the hand-written backward passes.
//!
//! `cargo run --release --example gradient_check`

use dynacor::encoder::{build_encoder, EncoderConfig};
use dynacor::nn::{grad_check, softmax_cross_entropy, Sequential, Tensor};
use dynacor::seeded_rng;
use rand::Rng;

const TOLERANCE: f64 = 1e-4;

fn main() -> dynacor::Result<()> {
    let mut rng = seeded_rng(7);

    let mut mlp = Sequential::mlp(&[6, 12, 12, 4], &mut rng);
    let x = Tensor::vector((0..6).map(|_| rng.random_range(-1.5..1.5)).collect());
    let ce = |out: &Tensor| {
        let (loss, grad) = softmax_cross_entropy(out.data(), 2)?;
        Ok((loss, Tensor::vector(grad)))
    };
    let report = grad_check(&mut mlp, &x, ce, TOLERANCE)?;
    println!("mlp + cross-entropy: {report:?}");

    // The encoder reads a trajectory as a single-channel sequence.
    let cfg = EncoderConfig {
        channels: [4, 6, 6],
        rep_dim: 5,
        ..Default::default()
    };
    let mut encoder = build_encoder(&cfg, &mut rng);
    let epochs = 16;
    let row: Vec<f64> = (0..epochs)
        .map(|_| if rng.random_bool(0.7) { 1.0 } else { -1.0 })
        .collect();
    let input = Tensor::new(vec![1, epochs], row)?;
    let target: Vec<f64> = (0..cfg.rep_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let quadratic = |out: &Tensor| {
        let diff: Vec<f64> = out.data().iter().zip(&target).map(|(o, t)| o - t).collect();
        let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>();
        Ok((loss, Tensor::vector(diff)))
    };
    let report = grad_check(&mut encoder, &input, quadratic, TOLERANCE)?;
    println!("encoder + quadratic readout: {report:?}");
    Ok(())
}
