//! Construction of the corrupted companion set: copy a random subset, jitter
//! its features and flip every label to a different class.

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{other_class, DatasetParts, LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    /// Fraction of the original set to copy, in `(0, 1]`.
    pub rate: f64,
    /// Feature jitter as a multiple of each feature's standard deviation.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            rate: 0.1,
            jitter: 0.05,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidCorruptionConfig(format!(
                "corruption rate {} outside (0, 1]",
                self.rate
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidCorruptionConfig(format!(
                "jitter {} must be finite and non-negative",
                self.jitter
            )));
        }
        Ok(())
    }
}

/// Builds the corrupted set from `ds`. Output rows follow source order; new
/// ids start after the largest source id.
pub fn corrupt(ds: &LabeledDataset, cfg: &CorruptionConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    if ds.classes() < 2 {
        return Err(Error::InvalidClassCount(ds.classes()));
    }
    if !ds.all_original() {
        return Err(Error::InvalidDataset(
            "only original instances can be corrupted".into(),
        ));
    }
    let n = ds.len();
    let count = (cfg.rate * n as f64).round() as usize;
    if count == 0 {
        return Err(Error::EmptyCorruption(n));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();

    let std = ds.feature_std();
    let next_id = ds.ids().iter().max().map_or(0, |m| m + 1);
    let mut parts = DatasetParts {
        classes: ds.classes(),
        true_labels: ds.true_labels().map(|_| Vec::with_capacity(count)),
        ..Default::default()
    };
    for (k, &src) in picked.iter().enumerate() {
        let features = ds
            .features(src)
            .iter()
            .zip(&std)
            .map(|(x, s)| {
                if cfg.jitter == 0.0 {
                    *x
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + cfg.jitter * s * z
                }
            })
            .collect();
        parts.ids.push(next_id + k as u64);
        parts.features.push(features);
        parts
            .labels
            .push(other_class(&mut rng, ds.classes(), ds.labels()[src]));
        if let (Some(t), Some(src_truth)) = (parts.true_labels.as_mut(), ds.true_labels()) {
            t.push(src_truth[src]);
        }
        parts.provenance.push(Provenance::Corrupted);
        parts.source_ids.push(Some(ds.ids()[src]));
    }
    LabeledDataset::from_parts(parts)
}

/// Concatenates the original and corrupted sets, originals first.
pub fn pool(original: &LabeledDataset, corrupted: &LabeledDataset) -> Result<LabeledDataset> {
    if corrupted.is_empty() {
        return Ok(original.clone());
    }
    if original.dim() != corrupted.dim() || original.classes() != corrupted.classes() {
        return Err(Error::IncompatibleDatasets(format!(
            "dim/classes {}/{} vs {}/{}",
            original.dim(),
            original.classes(),
            corrupted.dim(),
            corrupted.classes()
        )));
    }
    let seen: std::collections::HashSet<u64> = original.ids().iter().copied().collect();
    if let Some(id) = corrupted.ids().iter().find(|id| seen.contains(id)) {
        return Err(Error::IncompatibleDatasets(format!("id {id} appears in both sets")));
    }
    let a = original.clone().into_parts();
    let b = corrupted.clone().into_parts();
    let true_labels = match (a.true_labels, b.true_labels) {
        (Some(mut x), Some(y)) => {
            x.extend(y);
            Some(x)
        }
        _ => None,
    };
    LabeledDataset::from_parts(DatasetParts {
        ids: a.ids.into_iter().chain(b.ids).collect(),
        features: a.features.into_iter().chain(b.features).collect(),
        labels: a.labels.into_iter().chain(b.labels).collect(),
        true_labels,
        provenance: a.provenance.into_iter().chain(b.provenance).collect(),
        source_ids: a.source_ids.into_iter().chain(b.source_ids).collect(),
        classes: a.classes,
    })
}
