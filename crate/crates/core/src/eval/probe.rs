//! Supervised upper-bound probe: a binary classifier trained on trajectories
//! (or their row means) with ground-truth noisy/clean labels.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::f1_flags;
use crate::dataset::Provenance;
use crate::encoder::{build_encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, Dense, Layer, Optimizer, Sequential, Tensor};
use crate::seeded_rng;
use crate::trainer::{summarize, DynamicsMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeInput {
    /// Full trajectory through the dynamics-encoder architecture.
    Trajectory,
    /// Row mean through a two-hidden-layer MLP.
    Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub input: ProbeInput,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Architecture of the trajectory encoder (training fields unused).
    pub encoder: EncoderConfig,
    pub summary_hidden: Vec<usize>,
    /// Seed for the split and the initialization.
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            input: ProbeInput::Trajectory,
            epochs: 20,
            batch_size: 128,
            learning_rate: 1e-3,
            encoder: EncoderConfig::default(),
            summary_hidden: vec![32, 32],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub test_f1: f64,
    /// 1-based epoch with the best validation F1.
    pub best_epoch: usize,
    pub validation_f1: Vec<f64>,
    /// Noise rate of the test split.
    pub test_noise_rate: f64,
    pub split_sizes: [usize; 3],
}

struct Split {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn split(rows: &[usize], truth: &[bool], seed: u64) -> Option<Split> {
    let mut order = rows.to_vec();
    order.shuffle(&mut seeded_rng(seed));
    let n = order.len();
    let n_train = n * 70 / 100;
    let n_val = n * 15 / 100;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    let s = Split {
        train: order,
        val,
        test,
    };
    let both = |idx: &[usize]| idx.iter().any(|&i| truth[i]) && idx.iter().any(|&i| !truth[i]);
    (both(&s.train) && both(&s.val) && both(&s.test)).then_some(s)
}

fn predict(net: &Sequential, inputs: &[Tensor], idx: &[usize]) -> Result<Vec<bool>> {
    idx.iter()
        .map(|&i| {
            let out = net.forward(&inputs[i])?;
            Ok(out.data()[1] > out.data()[0])
        })
        .collect()
}

/// Trains on 70% of the original rows, picks the epoch with the best F1 on
/// 15%, and reports F1 on the remaining 15%. The cross-entropy is class
/// balanced over the training split.
pub fn supervised_probe(dynamics: &DynamicsMatrix, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    if !dynamics.has_truth() {
        return Err(Error::MissingTruth);
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("probe epochs and batch size must be >= 1".into()));
    }
    let truth: Vec<bool> = dynamics.rows().iter().map(|r| r.is_noisy == Some(true)).collect();
    let rows = dynamics.indices(Provenance::Original);
    let s = split(&rows, &truth, cfg.seed)
        .or_else(|| split(&rows, &truth, cfg.seed.wrapping_add(1)))
        .ok_or_else(|| Error::SplitDegenerate("a split lacks noisy or clean rows after one re-split".into()))?;

    let mut rng = seeded_rng(cfg.seed ^ 0x05EE_D0F9_B0BE);
    let (mut net, inputs) = match cfg.input {
        ProbeInput::Trajectory => {
            cfg.encoder.validate()?;
            if dynamics.epochs() < cfg.encoder.min_length() {
                return Err(Error::InvalidLength {
                    length: dynamics.epochs(),
                    required: cfg.encoder.min_length(),
                });
            }
            let mut net = build_encoder(&cfg.encoder, &mut rng);
            net.layers.push(Layer::Relu);
            net.layers
                .push(Layer::Dense(Dense::new(cfg.encoder.rep_dim, 2, &mut rng)));
            let inputs = (0..dynamics.len())
                .map(|i| Tensor::new(vec![1, dynamics.epochs()], dynamics.row(i).to_vec()))
                .collect::<Result<Vec<_>>>()?;
            (net, inputs)
        }
        ProbeInput::Summary => {
            let mut sizes = vec![1];
            sizes.extend(&cfg.summary_hidden);
            sizes.push(2);
            let net = Sequential::mlp(&sizes, &mut rng);
            let inputs = summarize(dynamics).into_iter().map(|m| Tensor::vector(vec![m])).collect();
            (net, inputs)
        }
    };

    let n_train = s.train.len() as f64;
    let n_noisy = s.train.iter().filter(|&&i| truth[i]).count() as f64;
    let class_weight = [n_train / (2.0 * (n_train - n_noisy)), n_train / (2.0 * n_noisy)];

    let mut opt = Optimizer::adam(cfg.learning_rate, 0.0)?;
    let mut order = s.train.clone();
    let val_truth: Vec<bool> = s.val.iter().map(|&i| truth[i]).collect();
    let test_truth: Vec<bool> = s.test.iter().map(|&i| truth[i]).collect();
    let mut validation_f1 = Vec::with_capacity(cfg.epochs);
    let mut best = (0usize, f64::NEG_INFINITY, 0.0);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            net.zero_grad();
            let b = batch.len() as f64;
            for &i in batch {
                let tape = net.forward_tape(&inputs[i])?;
                let label = usize::from(truth[i]);
                let (_, mut grad) = softmax_cross_entropy(tape.output().data(), label)?;
                let w = class_weight[label] / b;
                grad.iter_mut().for_each(|g| *g *= w);
                net.backward(&tape, &Tensor::vector(grad))?;
            }
            opt.step(&mut net.params_mut())?;
        }
        let val = f1_flags(&predict(&net, &inputs, &s.val)?, &val_truth).f1;
        validation_f1.push(val);
        if val > best.1 {
            let test = f1_flags(&predict(&net, &inputs, &s.test)?, &test_truth).f1;
            best = (epoch, val, test);
        }
    }

    Ok(ProbeOutcome {
        test_f1: best.2,
        best_epoch: best.0 + 1,
        validation_f1,
        test_noise_rate: test_truth.iter().filter(|t| **t).count() as f64 / test_truth.len() as f64,
        split_sizes: [s.train.len(), s.val.len(), s.test.len()],
    })
}
