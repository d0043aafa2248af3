//! Detection metrics, stopping-rule comparisons and the supervised probe.

mod probe;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use probe::{supervised_probe, ProbeConfig, ProbeInput, ProbeOutcome};

use crate::error::{Error, Result};

/// Detector that produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dynacor,
    AvgEncoder,
    Aum,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dynacor => "dynacor",
            Method::AvgEncoder => "avg_encoder",
            Method::Aum => "aum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dynacor" => Some(Method::Dynacor),
            "avg_encoder" => Some(Method::AvgEncoder),
            "aum" => Some(Method::Aum),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdict {
    pub id: u64,
    pub noisy: bool,
}

/// Output of a detector, optionally scored against ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: Method,
    pub seed: u64,
    pub selected_epoch: Option<usize>,
    pub metric_trajectory: Vec<Option<f64>>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

impl DetectionReport {
    pub fn new(method: Method, verdicts: Vec<Verdict>) -> Self {
        Self {
            method,
            seed: 0,
            selected_epoch: None,
            metric_trajectory: Vec::new(),
            precision: None,
            recall: None,
            f1: None,
            verdicts,
        }
    }

    pub fn flagged(&self) -> usize {
        self.verdicts.iter().filter(|v| v.noisy).count()
    }

    /// Fills precision, recall and F1 from `truth`.
    pub fn score(&mut self, truth: &[Verdict]) -> Result<F1Score> {
        let s = f1(&self.verdicts, truth)?;
        self.precision = Some(s.precision);
        self.recall = Some(s.recall);
        self.f1 = Some(s.f1);
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Binary F1 over aligned flags, noisy = positive.
///
/// With no predicted and no true positives the score is a perfect 1; with no
/// predicted positives but some true ones it is 0.
pub fn f1_flags(predicted: &[bool], truth: &[bool]) -> F1Score {
    assert_eq!(predicted.len(), truth.len(), "flag vectors differ in length");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (p, t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 && tp + fn_ == 0 {
        return F1Score {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    F1Score {
        precision,
        recall,
        f1,
    }
}

/// F1 of `verdicts` against `truth`, matched by id.
pub fn f1(verdicts: &[Verdict], truth: &[Verdict]) -> Result<F1Score> {
    let truth_map: HashMap<u64, bool> = truth.iter().map(|v| (v.id, v.noisy)).collect();
    if truth_map.len() != truth.len() || verdicts.len() != truth.len() {
        return Err(Error::IdMismatch(format!(
            "{} verdicts vs {} truth entries",
            verdicts.len(),
            truth.len()
        )));
    }
    let mut predicted = Vec::with_capacity(verdicts.len());
    let mut actual = Vec::with_capacity(verdicts.len());
    let mut seen = std::collections::HashSet::with_capacity(verdicts.len());
    for v in verdicts {
        let t = truth_map
            .get(&v.id)
            .ok_or_else(|| Error::IdMismatch(format!("id {} has no truth", v.id)))?;
        if !seen.insert(v.id) {
            return Err(Error::IdMismatch(format!("id {} repeated", v.id)));
        }
        predicted.push(v.noisy);
        actual.push(*t);
    }
    Ok(f1_flags(&predicted, &actual))
}

/// F1 of flagging everything at noise rate `eta`: `2 eta / (1 + eta)`.
pub fn flag_all_baseline(eta: f64) -> Result<f64> {
    if eta <= 0.0 || eta > 1.0 || !eta.is_finite() {
        return Err(Error::UndefinedBaseline);
    }
    Ok(2.0 * eta / (1.0 + eta))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Davies-Bouldin index with Euclidean centroid dispersion. Cluster labels are
/// arbitrary `usize`s; empty labels are ignored, at least two must be present.
pub fn dbi(reps: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if reps.len() != labels.len() || reps.is_empty() {
        return Err(Error::InvalidShape("dbi needs one label per representation".into()));
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::DegenerateCluster("dbi needs two nonempty clusters".into()));
    }
    let dim = reps[0].len();
    let mut centroids = Vec::with_capacity(ids.len());
    let mut spreads = Vec::with_capacity(ids.len());
    for &c in &ids {
        let members: Vec<&Vec<f64>> = reps
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == c)
            .map(|(r, _)| r)
            .collect();
        let mut centroid = vec![0.0; dim];
        for m in &members {
            for (a, b) in centroid.iter_mut().zip(m.iter()) {
                *a += b;
            }
        }
        centroid.iter_mut().for_each(|v| *v /= members.len() as f64);
        let spread = members.iter().map(|m| euclidean(m, &centroid)).sum::<f64>() / members.len() as f64;
        centroids.push(centroid);
        spreads.push(spread);
    }
    let k = ids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = euclidean(&centroids[i], &centroids[j]);
            if sep <= 0.0 {
                return Err(Error::DegenerateSeparation);
            }
            worst = worst.max((spreads[i] + spreads[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// 1-based epoch of the best F1 against `truth`, ties to the earliest.
pub fn opt_epoch(per_epoch: &[Vec<bool>], truth: &[bool]) -> Result<(usize, f64)> {
    if per_epoch.is_empty() {
        return Err(Error::InvalidShape("empty verdict trajectory".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (e, verdicts) in per_epoch.iter().enumerate() {
        if verdicts.len() != truth.len() {
            return Err(Error::IdMismatch("epoch verdicts differ in length from truth".into()));
        }
        let score = f1_flags(verdicts, truth).f1;
        if score > best.1 {
            best = (e, score);
        }
    }
    Ok((best.0 + 1, best.1))
}

/// 1-based epoch minimizing the Davies-Bouldin index; `None` if no epoch has
/// a defined index.
pub fn min_dbi_epoch(dbi: &[Option<f64>]) -> Option<usize> {
    dbi.iter()
        .enumerate()
        .filter_map(|(e, v)| v.map(|v| (e, v)))
        .fold(None, |best: Option<(usize, f64)>, (e, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((e, v)),
        })
        .map(|(e, _)| e + 1)
}
