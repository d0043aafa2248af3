//! Classifier training on the pooled original + corrupted set, recording a
//! per-instance training-signal trajectory at the end of every epoch.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::nn::{softmax, softmax_cross_entropy, Optimizer, Sequential, Tensor};
use crate::seeded_rng;

/// Scalar transforms of a logit vector against the observed label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Cross-entropy loss.
    Loss,
    /// Softmax probability of the label.
    Probability,
    /// `max_c p_c - p_label`.
    ProbabilityDifference,
    /// `f_label - max_{c != label} f_c`.
    LogitDifference,
    /// Sign of the logit difference, with `sign(0) = +1`.
    QuantizedLogitDifference,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Loss => "loss",
            SignalKind::Probability => "probability",
            SignalKind::ProbabilityDifference => "probability_difference",
            SignalKind::LogitDifference => "logit_difference",
            SignalKind::QuantizedLogitDifference => "quantized_logit_difference",
        }
    }
}

fn logit_margin(logits: &[f64], label: usize) -> f64 {
    let other = logits
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != label)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    logits[label] - other
}

pub fn signal(logits: &[f64], label: usize, kind: SignalKind) -> Result<f64> {
    let classes = logits.len();
    if classes < 2 {
        return Err(Error::InvalidClassCount(classes));
    }
    if label >= classes {
        return Err(Error::InvalidLabel { label, classes });
    }
    Ok(match kind {
        SignalKind::Loss => softmax_cross_entropy(logits, label)?.0,
        SignalKind::Probability => softmax(logits)[label],
        SignalKind::ProbabilityDifference => {
            let p = softmax(logits);
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max) - p[label]
        }
        SignalKind::LogitDifference => logit_margin(logits, label),
        SignalKind::QuantizedLogitDifference => {
            if logit_margin(logits, label) >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub signal: SignalKind,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 0.03,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 30,
            batch_size: 128,
            seed: 0,
            signal: SignalKind::QuantizedLogitDifference,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidConfig(
                "classifier epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("classifier learning rate must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer of width 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("momentum must be in [0, 1), weight decay >= 0".into()));
        }
        Ok(())
    }
}

/// Per-row metadata of a [`DynamicsMatrix`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub id: u64,
    pub provenance: Provenance,
    pub observed_label: usize,
    /// Ground truth (evaluation only).
    pub is_noisy: Option<bool>,
}

/// Training-signal trajectories: one row per instance, one column per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsMatrix {
    rows: Vec<RowMeta>,
    values: Vec<f64>,
    epochs: usize,
    signal: SignalKind,
}

impl DynamicsMatrix {
    pub fn new(rows: Vec<RowMeta>, values: Vec<f64>, epochs: usize, signal: SignalKind) -> Result<Self> {
        if epochs == 0 || rows.is_empty() {
            return Err(Error::InvalidShape("dynamics need at least one row and epoch".into()));
        }
        if values.len() != rows.len() * epochs {
            return Err(Error::InvalidShape(format!(
                "{} rows x {epochs} epochs needs {} values, got {}",
                rows.len(),
                rows.len() * epochs,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFault("non-finite dynamics entry".into()));
        }
        if signal == SignalKind::QuantizedLogitDifference
            && values.iter().any(|v| *v != 1.0 && *v != -1.0)
        {
            return Err(Error::InvalidDataset(
                "quantized dynamics must contain only +1 and -1".into(),
            ));
        }
        Ok(Self {
            rows,
            values,
            epochs,
            signal,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn signal(&self) -> SignalKind {
        self.signal
    }

    pub fn rows(&self) -> &[RowMeta] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.epochs..(i + 1) * self.epochs]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_truth(&self) -> bool {
        self.rows.iter().all(|r| r.is_noisy.is_some())
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.rows.iter().filter(|r| r.provenance == provenance).count()
    }

    /// Indices of rows with the given provenance, in row order.
    pub fn indices(&self, provenance: Provenance) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.rows[i].provenance == provenance)
            .collect()
    }

    /// Copy with the truth column cleared.
    pub fn without_truth(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| RowMeta {
                is_noisy: None,
                ..r.clone()
            })
            .collect();
        Self {
            rows,
            ..self.clone()
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let values = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self::new(rows, values, self.epochs, self.signal)
    }
}

/// Row means `(1/E) sum_e t^(e)`.
pub fn summarize(dynamics: &DynamicsMatrix) -> Vec<f64> {
    (0..dynamics.len())
        .map(|i| dynamics.row(i).iter().sum::<f64>() / dynamics.epochs() as f64)
        .collect()
}

/// Result of [`train_and_record`].
#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub dynamics: DynamicsMatrix,
    /// Extra recordings of the same run, one per kind requested through
    /// [`train_and_record_signals`].
    pub extra: Vec<DynamicsMatrix>,
    pub classifier: Sequential,
    /// Unweighted mean cross-entropy over the pooled set after each epoch.
    pub epoch_loss: Vec<f64>,
}

impl TrainingRun {
    pub fn dynamics_for(&self, kind: SignalKind) -> Option<&DynamicsMatrix> {
        std::iter::once(&self.dynamics)
            .chain(&self.extra)
            .find(|d| d.signal() == kind)
    }
}

pub fn train_and_record(pooled: &LabeledDataset, cfg: &ClassifierConfig) -> Result<TrainingRun> {
    train_and_record_signals(pooled, cfg, &[])
}

/// Like [`train_and_record`], additionally recording `extra_signals` from the
/// same end-of-epoch passes.
pub fn train_and_record_signals(
    pooled: &LabeledDataset,
    cfg: &ClassifierConfig,
    extra_signals: &[SignalKind],
) -> Result<TrainingRun> {
    cfg.validate()?;
    if pooled.is_empty() {
        return Err(Error::InvalidDataset("cannot train on an empty dataset".into()));
    }
    let m = pooled.len();
    let classes = pooled.classes();
    let mut rng = seeded_rng(cfg.seed);

    let mut sizes = vec![pooled.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(classes);
    let mut net = Sequential::mlp(&sizes, &mut rng);
    let mut opt = Optimizer::sgd(cfg.learning_rate, cfg.momentum, cfg.weight_decay)?;

    // Each provenance group contributes its own mean loss to the objective.
    let n_orig = pooled
        .provenance()
        .iter()
        .filter(|p| **p == Provenance::Original)
        .count();
    let n_corr = m - n_orig;
    let group_size = |p: Provenance| match p {
        Provenance::Original => n_orig,
        Provenance::Corrupted => n_corr,
    } as f64;

    let inputs: Vec<Tensor> = (0..m)
        .map(|i| Tensor::vector(pooled.features(i).to_vec()))
        .collect();

    let mut kinds = vec![cfg.signal];
    kinds.extend(extra_signals.iter().filter(|k| **k != cfg.signal));
    let mut recorded: Vec<Vec<f64>> = vec![vec![0.0; m * cfg.epochs]; kinds.len()];
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..m).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            net.zero_grad();
            let b = batch.len() as f64;
            for &i in batch {
                let tape = net.forward_tape(&inputs[i])?;
                let (loss, mut grad) = softmax_cross_entropy(tape.output().data(), pooled.labels()[i])?;
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                let weight = m as f64 / (group_size(pooled.provenance()[i]) * b);
                grad.iter_mut().for_each(|g| *g *= weight);
                net.backward(&tape, &Tensor::vector(grad))?;
            }
            opt.step(&mut net.params_mut())
                .map_err(|_| Error::TrainingDiverged { epoch })?;
        }

        let logits: Vec<Vec<f64>> = inputs
            .par_iter()
            .map(|x| net.forward(x).map(Tensor::into_vec))
            .collect::<Result<_>>()
            .map_err(|_| Error::TrainingDiverged { epoch })?;
        let mut total_loss = 0.0;
        for (i, row) in logits.iter().enumerate() {
            let label = pooled.labels()[i];
            total_loss += softmax_cross_entropy(row, label)?.0;
            for (k, kind) in kinds.iter().enumerate() {
                let v = signal(row, label, *kind)?;
                if !v.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                recorded[k][i * cfg.epochs + epoch - 1] = v;
            }
        }
        let mean_loss = total_loss / m as f64;
        if !mean_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        epoch_loss.push(mean_loss);
    }

    let rows: Vec<RowMeta> = (0..m)
        .map(|i| RowMeta {
            id: pooled.ids()[i],
            provenance: pooled.provenance()[i],
            observed_label: pooled.labels()[i],
            is_noisy: pooled.is_noisy(i),
        })
        .collect();
    let mut matrices = kinds
        .iter()
        .zip(recorded)
        .map(|(kind, values)| DynamicsMatrix::new(rows.clone(), values, cfg.epochs, *kind))
        .collect::<Result<Vec<_>>>()?;
    let dynamics = matrices.remove(0);
    Ok(TrainingRun {
        dynamics,
        extra: matrices,
        classifier: net,
        epoch_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_signal_signs() {
        let q = SignalKind::QuantizedLogitDifference;
        assert_eq!(signal(&[2.0, 1.5], 0, q).unwrap(), 1.0);
        assert_eq!(signal(&[2.0, 1.5], 1, q).unwrap(), -1.0);
        assert_eq!(signal(&[1.0, 1.0, 0.0], 0, q).unwrap(), 1.0);
    }

    #[test]
    fn other_signals() {
        assert_eq!(signal(&[0.0, 0.0], 0, SignalKind::Probability).unwrap(), 0.5);
        assert_eq!(signal(&[2.0, 1.5], 1, SignalKind::LogitDifference).unwrap(), -0.5);
        let pd = signal(&[0.0, 0.0], 1, SignalKind::ProbabilityDifference).unwrap();
        assert_eq!(pd, 0.0);
        let loss = signal(&[0.0, 0.0], 1, SignalKind::Loss).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            signal(&[1.0], 0, SignalKind::Loss),
            Err(Error::InvalidClassCount(1))
        ));
    }

    fn meta(n: usize) -> Vec<RowMeta> {
        (0..n)
            .map(|i| RowMeta {
                id: i as u64,
                provenance: Provenance::Original,
                observed_label: 0,
                is_noisy: None,
            })
            .collect()
    }

    #[test]
    fn summarize_rows() {
        let d = DynamicsMatrix::new(
            meta(2),
            vec![1.0, 1.0, -1.0, -1.0, 0.7, 0.7, 0.7, 0.7],
            4,
            SignalKind::LogitDifference,
        )
        .unwrap();
        let s = summarize(&d);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn quantized_matrix_rejects_other_values() {
        let err = DynamicsMatrix::new(meta(1), vec![0.5], 1, SignalKind::QuantizedLogitDifference);
        assert!(err.is_err());
        let nan = DynamicsMatrix::new(meta(1), vec![f64::NAN], 1, SignalKind::Loss);
        assert!(nan.is_err());
    }
}
