//! Synthetic labeled data, label-noise injection and noise-rate bookkeeping.

use rand::seq::index::sample;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::seeded_rng;

/// Where an instance came from: the given dataset or the corrupted companion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Corrupted,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "orig",
            Provenance::Corrupted => "corr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "orig" => Some(Provenance::Original),
            "corr" => Some(Provenance::Corrupted),
            _ => None,
        }
    }
}

/// Feature matrix with observed labels, optional true labels and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    ids: Vec<u64>,
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    true_labels: Option<Vec<usize>>,
    provenance: Vec<Provenance>,
    source_ids: Vec<Option<u64>>,
    classes: usize,
}

/// Column-wise parts of a dataset, used to build one through validation.
#[derive(Clone, Debug, Default)]
pub struct DatasetParts {
    pub ids: Vec<u64>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub true_labels: Option<Vec<usize>>,
    pub provenance: Vec<Provenance>,
    pub source_ids: Vec<Option<u64>>,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn from_parts(parts: DatasetParts) -> Result<Self> {
        let n = parts.ids.len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no instances".into()));
        }
        if parts.classes < 2 {
            return Err(Error::InvalidClassCount(parts.classes));
        }
        let dim = parts.features.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidDataset("feature dimension is zero".into()));
        }
        let lengths_ok = parts.features.len() == n
            && parts.labels.len() == n
            && parts.provenance.len() == n
            && (parts.source_ids.is_empty() || parts.source_ids.len() == n)
            && parts.true_labels.as_ref().is_none_or(|t| t.len() == n);
        if !lengths_ok {
            return Err(Error::InvalidDataset("column lengths differ".into()));
        }
        if parts.features.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidDataset("ragged feature rows".into()));
        }
        if parts.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        let all_labels = parts
            .labels
            .iter()
            .chain(parts.true_labels.iter().flatten());
        for &label in all_labels {
            if label >= parts.classes {
                return Err(Error::InvalidLabel {
                    label,
                    classes: parts.classes,
                });
            }
        }
        let mut sorted = parts.ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset("duplicate instance ids".into()));
        }
        let source_ids = if parts.source_ids.is_empty() {
            vec![None; n]
        } else {
            parts.source_ids
        };
        Ok(Self {
            ids: parts.ids,
            features: parts.features.into_iter().flatten().collect(),
            dim,
            labels: parts.labels,
            true_labels: parts.true_labels,
            provenance: parts.provenance,
            source_ids,
            classes: parts.classes,
        })
    }

    /// A dataset with no rows; only useful as the identity for [`crate::corruption::pool`].
    pub fn empty(dim: usize, classes: usize) -> Self {
        Self {
            ids: Vec::new(),
            features: Vec::new(),
            dim,
            labels: Vec::new(),
            true_labels: Some(Vec::new()),
            provenance: Vec::new(),
            source_ids: Vec::new(),
            classes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn feature_matrix(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn source_ids(&self) -> &[Option<u64>] {
        &self.source_ids
    }

    pub fn has_source_ids(&self) -> bool {
        self.source_ids.iter().any(Option::is_some)
    }

    /// Whether instance `i` carries a wrong observed label, if truth is known.
    pub fn is_noisy(&self, i: usize) -> Option<bool> {
        self.true_labels.as_ref().map(|t| t[i] != self.labels[i])
    }

    pub fn all_original(&self) -> bool {
        self.provenance.iter().all(|p| *p == Provenance::Original)
    }

    /// Same instances with replaced observed labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidDataset("label count mismatch".into()));
        }
        if let Some(&label) = labels.iter().find(|l| **l >= self.classes) {
            return Err(Error::InvalidLabel {
                label,
                classes: self.classes,
            });
        }
        Ok(Self {
            labels,
            ..self.clone()
        })
    }

    /// Drops the true labels, leaving only what a detector may see.
    pub fn without_truth(&self) -> Self {
        Self {
            true_labels: None,
            ..self.clone()
        }
    }

    pub fn into_parts(self) -> DatasetParts {
        let features = if self.dim == 0 {
            Vec::new()
        } else {
            self.features.chunks(self.dim).map(<[f64]>::to_vec).collect()
        };
        DatasetParts {
            ids: self.ids,
            features,
            labels: self.labels,
            true_labels: self.true_labels,
            provenance: self.provenance,
            source_ids: self.source_ids,
            classes: self.classes,
        }
    }

    /// Population standard deviation of every feature column.
    pub fn feature_std(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|j| {
                let mean = (0..self.len()).map(|i| self.features(i)[j]).sum::<f64>() / n;
                let var = (0..self.len())
                    .map(|i| (self.features(i)[j] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                var.sqrt()
            })
            .collect()
    }
}

/// Parameters for [`make_blobs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Standard deviation of each isotropic cluster.
    pub spread: f64,
    /// Minimum distance between any two cluster centers.
    pub separation: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            per_class: 1000,
            dim: 16,
            spread: 1.0,
            separation: 4.0,
        }
    }
}

impl BlobConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidClassCount(self.classes));
        }
        if self.per_class < 1 || self.dim < 2 {
            return Err(Error::InvalidConfig(
                "blobs need per_class >= 1 and dim >= 2".into(),
            ));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidConfig("spread must be positive".into()));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidConfig("separation must be positive".into()));
        }
        Ok(())
    }
}

const CENTER_ATTEMPTS: usize = 10_000;

/// Isotropic Gaussian clusters, one per class, with centers pairwise at least
/// `separation` apart. Observed labels start equal to the true labels.
pub fn make_blobs(cfg: &BlobConfig, seed: u64) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    let half_width =
        cfg.separation * (cfg.classes as f64).powf(1.0 / cfg.dim as f64).max(1.0);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(cfg.classes);
    let mut attempts = 0;
    while centers.len() < cfg.classes {
        attempts += 1;
        if attempts > CENTER_ATTEMPTS {
            return Err(Error::Generation(format!(
                "could not place {} centers {} apart",
                cfg.classes, cfg.separation
            )));
        }
        let candidate: Vec<f64> = (0..cfg.dim)
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect();
        let far_enough = centers.iter().all(|c| {
            c.iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= cfg.separation
        });
        if far_enough {
            centers.push(candidate);
        }
    }

    let n = cfg.classes * cfg.per_class;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let row = center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + cfg.spread * z
                })
                .collect();
            features.push(row);
            labels.push(class);
        }
    }
    LabeledDataset::from_parts(DatasetParts {
        ids: (0..n as u64).collect(),
        features,
        true_labels: Some(labels.clone()),
        labels,
        provenance: vec![Provenance::Original; n],
        source_ids: Vec::new(),
        classes: cfg.classes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Uniform flip to any other class.
    Symmetric,
    /// Flip `y -> (y + 1) mod C`.
    AsymmetricNext,
    /// Feature-dependent flips through random class projections.
    InstanceDependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Symmetric,
            rate: 0.3,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// Checks the rate against the diagonal-dominance condition for `classes`.
    pub fn validate(&self, classes: usize) -> Result<()> {
        if classes < 2 {
            return Err(Error::InvalidClassCount(classes));
        }
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::InvalidNoiseSpec(format!(
                "rate {} outside [0, 1)",
                self.rate
            )));
        }
        let bound = match self.kind {
            NoiseKind::Symmetric | NoiseKind::InstanceDependent => 1.0 - 1.0 / classes as f64,
            NoiseKind::AsymmetricNext => 0.5,
        };
        if self.rate >= bound {
            return Err(Error::InvalidNoiseSpec(format!(
                "rate {} violates diagonal dominance (must be < {bound})",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Uniform draw from `0..classes` excluding `avoid`.
pub(crate) fn other_class(rng: &mut impl Rng, classes: usize, avoid: usize) -> usize {
    let r = rng.random_range(0..classes - 1);
    if r >= avoid {
        r + 1
    } else {
        r
    }
}

/// Truncated normal on `[0, 1]` by rejection.
fn truncated_normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let v = mean + sd * z;
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
}

/// Replaces observed labels according to `spec`; everything else is kept.
pub fn inject_noise(ds: &LabeledDataset, spec: &NoiseSpec) -> Result<LabeledDataset> {
    spec.validate(ds.classes())?;
    if !ds.all_original() {
        return Err(Error::InvalidDataset(
            "noise can only be injected into original instances".into(),
        ));
    }
    let truth = ds.true_labels().ok_or(Error::MissingTruth)?;
    let classes = ds.classes();
    let n = ds.len();
    let mut rng = seeded_rng(spec.seed);
    let mut labels = truth.to_vec();

    match spec.kind {
        NoiseKind::Symmetric | NoiseKind::AsymmetricNext => {
            let flips = (spec.rate * n as f64).round() as usize;
            let mut chosen = sample(&mut rng, n, flips).into_vec();
            chosen.sort_unstable();
            for i in chosen {
                labels[i] = match spec.kind {
                    NoiseKind::Symmetric => other_class(&mut rng, classes, truth[i]),
                    _ => (truth[i] + 1) % classes,
                };
            }
        }
        NoiseKind::InstanceDependent => {
            let dim = ds.dim();
            // One d x C projection per class.
            let projections: Vec<Vec<f64>> = (0..classes)
                .map(|_| {
                    (0..dim * classes)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect()
                })
                .collect();
            for (i, label) in labels.iter_mut().enumerate() {
                let y = truth[i];
                let q = truncated_normal(&mut rng, spec.rate, 0.1);
                let x = ds.features(i);
                let w = &projections[y];
                let mut scores: Vec<f64> = (0..classes)
                    .map(|c| (0..dim).map(|k| x[k] * w[k * classes + c]).sum())
                    .collect();
                scores[y] = f64::NEG_INFINITY;
                let mut p = softmax(&scores);
                p.iter_mut().for_each(|v| *v *= q);
                p[y] = 1.0 - q;
                let dist = WeightedIndex::new(&p)
                    .map_err(|e| Error::NumericFault(format!("flip distribution: {e}")))?;
                *label = dist.sample(&mut rng);
            }
        }
    }
    ds.with_labels(labels)
}

/// Fraction of instances whose observed label differs from the true label.
pub fn measured_noise_rate(ds: &LabeledDataset) -> Result<f64> {
    let truth = ds.true_labels().ok_or(Error::MissingTruth)?;
    if ds.is_empty() {
        return Ok(0.0);
    }
    let wrong = ds
        .labels()
        .iter()
        .zip(truth)
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / ds.len() as f64)
}

/// Expected noise rate of the corrupted companion set, `1 - eta / (C - 1)`.
pub fn expected_corrupted_noise_rate(eta: f64, classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::InvalidNoiseSpec(format!(
            "need at least two classes, got {classes}"
        )));
    }
    if !(0.0..1.0 - 1.0 / classes as f64).contains(&eta) {
        return Err(Error::InvalidNoiseSpec(format!(
            "rate {eta} outside [0, 1 - 1/C)"
        )));
    }
    Ok(1.0 - eta / (classes - 1) as f64)
}

/// Noise rate of the pooled original plus corrupted set,
/// `(eta + gamma * eta_gamma) / (1 + gamma)`.
pub fn overall_noise_rate(eta: f64, eta_gamma: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidCorruptionConfig(format!(
            "corruption rate {gamma} outside (0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&eta_gamma) {
        return Err(Error::InvalidNoiseSpec("rates must lie in [0, 1]".into()));
    }
    Ok((eta + gamma * eta_gamma) / (1.0 + gamma))
}

/// Measured and predicted noise rates around one corruption run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRateReport {
    pub measured: f64,
    pub expected_corrupted: f64,
    pub lower_bound: f64,
    pub overall: f64,
    pub gamma: f64,
}

impl NoiseRateReport {
    pub fn compute(original: &LabeledDataset, gamma: f64) -> Result<Self> {
        let measured = measured_noise_rate(original)?;
        let expected_corrupted = expected_corrupted_noise_rate(measured, original.classes())?;
        Ok(Self {
            measured,
            expected_corrupted,
            lower_bound: 1.0 - 1.0 / original.classes() as f64,
            overall: overall_noise_rate(measured, expected_corrupted, gamma)?,
            gamma,
        })
    }
}
