use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::clustering::{
    alignment_loss_with_grads, assign, cluster_loss_row_grad, target_distribution, validation_metric,
    verdict, Assignment,
};
use super::model::{init_centroids, ClusterModel, EncoderConfig};
use crate::dataset::Provenance;
use crate::error::{Error, Result};
use crate::eval::{dbi, DetectionReport, Method, Verdict};
use crate::nn::{Optimizer, Tensor};
use crate::seeded_rng;
use crate::trainer::DynamicsMatrix;

/// Per-epoch record of an encoder fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitHistory {
    /// Validation metric at the end of each epoch; `None` when undefined.
    pub metric: Vec<Option<f64>>,
    /// Mean batch objective during each epoch.
    pub loss: Vec<f64>,
    /// Davies-Bouldin index of the verdict partition; `None` when undefined.
    pub dbi: Vec<Option<f64>>,
    /// Verdicts for original rows (in row order) at the end of each epoch.
    pub verdicts: Vec<Vec<bool>>,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Snapshot from the selected epoch.
    pub model: ClusterModel,
    /// 1-based epoch with the largest validation metric.
    pub selected_epoch: usize,
    pub history: FitHistory,
}

/// 1-based argmax of the metric trajectory; undefined entries rank below
/// everything and ties go to the earliest epoch.
pub fn select_epoch(metric: &[Option<f64>]) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (e, m) in metric.iter().enumerate() {
        let v = m.unwrap_or(f64::NEG_INFINITY);
        if v > best_value {
            best = e;
            best_value = v;
        }
    }
    best + 1
}

fn assign_all(reps: &[Vec<f64>], model: &ClusterModel) -> Result<Vec<Assignment>> {
    reps.iter()
        .map(|z| assign(z, model.mu_noisy.data(), model.mu_clean.data()))
        .collect()
}

/// Trains the encoder and centroids on `dynamics` and keeps the snapshot with
/// the best validation metric. Reads only trajectories and provenance.
pub fn fit(dynamics: &DynamicsMatrix, cfg: &EncoderConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if dynamics.epochs() < cfg.min_length() {
        return Err(Error::InvalidLength {
            length: dynamics.epochs(),
            required: cfg.min_length(),
        });
    }
    let provenance: Vec<Provenance> = dynamics.rows().iter().map(|r| r.provenance).collect();
    let original_rows = dynamics.indices(Provenance::Original);
    if original_rows.is_empty() || original_rows.len() == dynamics.len() {
        return Err(Error::InvalidDataset(
            "dynamics must contain both original and corrupted rows".into(),
        ));
    }

    let mut rng = seeded_rng(cfg.seed);
    let mut model = ClusterModel::new(cfg, &mut rng);
    let reps = model.encode_all(dynamics)?;
    let (orig, corr): (Vec<_>, Vec<_>) = reps
        .into_iter()
        .zip(&provenance)
        .partition(|(_, p)| **p == Provenance::Original);
    let orig: Vec<Vec<f64>> = orig.into_iter().map(|(z, _)| z).collect();
    let corr: Vec<Vec<f64>> = corr.into_iter().map(|(z, _)| z).collect();
    let (mu_clean, mu_noisy) = init_centroids(&orig, &corr)?;
    model.set_centroids(mu_clean, mu_noisy)?;

    let mut opt = Optimizer::adam(cfg.learning_rate, cfg.weight_decay)?;
    let mut order: Vec<usize> = (0..dynamics.len()).collect();
    let mut history = FitHistory::default();
    let mut best: Option<(f64, ClusterModel)> = None;

    for epoch in 1..=cfg.epochs {
        let reps = model.encode_all(dynamics)?;
        let targets = target_distribution(&assign_all(&reps, &model)?)?;

        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut aligned_batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let tapes = batch
                .iter()
                .map(|&i| model.encoder.forward_tape(&model.input(dynamics.row(i))?))
                .collect::<Result<Vec<_>>>()?;
            let zs: Vec<&[f64]> = tapes.iter().map(|t| t.output().data()).collect();
            let n = batch.len() as f64;
            let dim = model.rep_dim();

            let mut grad_z = Vec::with_capacity(batch.len());
            let mut grad_mu_noisy = vec![0.0; dim];
            let mut grad_mu_clean = vec![0.0; dim];
            let mut verdicts = Vec::with_capacity(batch.len());
            let mut loss = 0.0;
            for (r, &i) in batch.iter().enumerate() {
                let g = cluster_loss_row_grad(zs[r], model.mu_noisy.data(), model.mu_clean.data(), targets[i])?;
                loss += g.loss / n;
                grad_z.push(g.z.iter().map(|v| v / n).collect::<Vec<f64>>());
                for k in 0..dim {
                    grad_mu_noisy[k] += g.mu_noisy[k] / n;
                    grad_mu_clean[k] += g.mu_clean[k] / n;
                }
                verdicts.push(verdict(g.q.q_noisy));
            }

            if cfg.alpha != 0.0 {
                let batch_prov: Vec<Provenance> = batch.iter().map(|&i| provenance[i]).collect();
                match alignment_loss_with_grads(&zs, &batch_prov, &verdicts) {
                    Ok(term) => {
                        aligned_batches += 1;
                        loss += cfg.alpha * term.loss;
                        for (gz, ga) in grad_z.iter_mut().zip(&term.grads) {
                            for (a, b) in gz.iter_mut().zip(ga) {
                                *a += cfg.alpha * b;
                            }
                        }
                    }
                    Err(Error::DegenerateCluster(_)) => {}
                    Err(e) => return Err(e),
                }
            }

            model.zero_grad();
            for (tape, gz) in tapes.iter().zip(grad_z) {
                model.encoder.backward(tape, &Tensor::vector(gz))?;
            }
            model
                .mu_noisy
                .grad_mut()
                .iter_mut()
                .zip(&grad_mu_noisy)
                .for_each(|(a, b)| *a += b);
            model
                .mu_clean
                .grad_mut()
                .iter_mut()
                .zip(&grad_mu_clean)
                .for_each(|(a, b)| *a += b);
            opt.step(&mut model.params_mut())?;
            epoch_loss += loss;
            batches += 1;
        }
        if cfg.alpha != 0.0 && aligned_batches == 0 {
            return Err(Error::DegenerateCluster(format!(
                "alignment loss undefined for all of epoch {epoch}"
            )));
        }

        let reps = model.encode_all(dynamics)?;
        let q = assign_all(&reps, &model)?;
        let verdicts: Vec<bool> = q.iter().map(|a| verdict(a.q_noisy)).collect();
        let metric = validation_metric(&q, &provenance);
        let labels: Vec<usize> = verdicts.iter().map(|v| usize::from(*v)).collect();
        history.metric.push(metric);
        history.loss.push(epoch_loss / batches as f64);
        history.dbi.push(dbi(&reps, &labels).ok());
        history
            .verdicts
            .push(original_rows.iter().map(|&i| verdicts[i]).collect());

        let score = metric.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, model.clone()));
        }
    }

    let selected_epoch = select_epoch(&history.metric);
    let (_, model) = best.expect("at least one encoder epoch");
    Ok(FitOutcome {
        model,
        selected_epoch,
        history,
    })
}

/// Assignment of one row, kept for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowAssignment {
    pub id: u64,
    pub provenance: Provenance,
    pub q_noisy: f64,
    pub noisy: bool,
}

#[derive(Clone, Debug)]
pub struct Detection {
    /// Verdicts for original rows only.
    pub report: DetectionReport,
    /// Every row, corrupted ones included.
    pub assignments: Vec<RowAssignment>,
}

/// Verdicts of a fitted model for the original rows of `dynamics`.
pub fn detect(dynamics: &DynamicsMatrix, model: &ClusterModel) -> Result<Detection> {
    let reps = model.encode_all(dynamics)?;
    let q = assign_all(&reps, model)?;
    let assignments: Vec<RowAssignment> = dynamics
        .rows()
        .iter()
        .zip(&q)
        .map(|(row, a)| RowAssignment {
            id: row.id,
            provenance: row.provenance,
            q_noisy: a.q_noisy,
            noisy: verdict(a.q_noisy),
        })
        .collect();
    let verdicts = assignments
        .iter()
        .filter(|a| a.provenance == Provenance::Original)
        .map(|a| Verdict {
            id: a.id,
            noisy: a.noisy,
        })
        .collect();
    Ok(Detection {
        report: DetectionReport::new(Method::Dynacor, verdicts),
        assignments,
    })
}

/// Fit followed by detection, with the fit's selection recorded in the report.
pub fn fit_and_detect(dynamics: &DynamicsMatrix, cfg: &EncoderConfig) -> Result<(FitOutcome, Detection)> {
    let outcome = fit(dynamics, cfg)?;
    let mut detection = detect(dynamics, &outcome.model)?;
    detection.report.seed = cfg.seed;
    detection.report.selected_epoch = Some(outcome.selected_epoch);
    detection.report.metric_trajectory = outcome.history.metric.clone();
    Ok((outcome, detection))
}
