use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv1d, Dense, Layer, Sequential, Tensor};
use crate::trainer::DynamicsMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub channels: [usize; 3],
    pub kernels: [usize; 3],
    /// Representation dimension.
    pub rep_dim: usize,
    /// Weight of the alignment loss.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            channels: [16, 32, 32],
            kernels: [5, 3, 3],
            rep_dim: 32,
            alpha: 0.5,
            epochs: 10,
            batch_size: 1024,
            learning_rate: 1e-5,
            weight_decay: 5e-4,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rep_dim < 2 {
            return Err(Error::InvalidConfig("representation dimension must be >= 2".into()));
        }
        if self.channels.contains(&0) || self.kernels.contains(&0) {
            return Err(Error::InvalidConfig("channels and kernels must be positive".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be finite".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidConfig("encoder epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("invalid encoder optimizer settings".into()));
        }
        Ok(())
    }

    /// Shortest trajectory the convolution stack accepts.
    pub fn min_length(&self) -> usize {
        self.kernels.iter().map(|k| k - 1).sum::<usize>() + 1
    }
}

/// Three conv1d + rectifier stages, mean-pool over positions, dense head.
pub fn build_encoder(cfg: &EncoderConfig, rng: &mut impl Rng) -> Sequential {
    let [c1, c2, c3] = cfg.channels;
    let [k1, k2, k3] = cfg.kernels;
    Sequential::new(vec![
        Layer::Conv1d(Conv1d::new(1, c1, k1, rng)),
        Layer::Relu,
        Layer::Conv1d(Conv1d::new(c1, c2, k2, rng)),
        Layer::Relu,
        Layer::Conv1d(Conv1d::new(c2, c3, k3, rng)),
        Layer::Relu,
        Layer::MeanPool,
        Layer::Dense(Dense::new(c3, cfg.rep_dim, rng)),
    ])
}

/// Dynamics encoder plus the two trainable centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub encoder: Sequential,
    pub mu_noisy: Tensor,
    pub mu_clean: Tensor,
    min_length: usize,
}

impl ClusterModel {
    /// Fresh encoder with zero centroids; call [`ClusterModel::set_centroids`]
    /// before assigning.
    pub fn new(cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        Self {
            encoder: build_encoder(cfg, rng),
            mu_noisy: Tensor::param(vec![cfg.rep_dim], vec![0.0; cfg.rep_dim]).unwrap(),
            mu_clean: Tensor::param(vec![cfg.rep_dim], vec![0.0; cfg.rep_dim]).unwrap(),
            min_length: cfg.min_length(),
        }
    }

    pub fn from_parts(cfg: &EncoderConfig, encoder: Sequential, mu_noisy: Tensor, mu_clean: Tensor) -> Result<Self> {
        if mu_noisy.shape() != [cfg.rep_dim] || mu_clean.shape() != [cfg.rep_dim] {
            return Err(Error::InvalidShape("centroid dimension does not match config".into()));
        }
        Ok(Self {
            encoder,
            mu_noisy,
            mu_clean,
            min_length: cfg.min_length(),
        })
    }

    pub fn rep_dim(&self) -> usize {
        self.mu_noisy.len()
    }

    pub fn set_centroids(&mut self, mu_clean: Vec<f64>, mu_noisy: Vec<f64>) -> Result<()> {
        if mu_clean.len() != self.rep_dim() || mu_noisy.len() != self.rep_dim() {
            return Err(Error::InvalidShape("centroid dimension mismatch".into()));
        }
        self.mu_clean = Tensor::param(vec![mu_clean.len()], mu_clean)?;
        self.mu_noisy = Tensor::param(vec![mu_noisy.len()], mu_noisy)?;
        Ok(())
    }

    pub(crate) fn input(&self, row: &[f64]) -> Result<Tensor> {
        if row.len() < self.min_length {
            return Err(Error::InvalidLength {
                length: row.len(),
                required: self.min_length,
            });
        }
        Tensor::new(vec![1, row.len()], row.to_vec())
    }

    /// Representation of one trajectory.
    pub fn encode(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encoder.forward(&self.input(row)?)?.into_vec())
    }

    /// Representations of every row, in row order.
    pub fn encode_all(&self, dynamics: &DynamicsMatrix) -> Result<Vec<Vec<f64>>> {
        (0..dynamics.len())
            .into_par_iter()
            .map(|i| self.encode(dynamics.row(i)))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut params = self.encoder.params_mut();
        params.push(&mut self.mu_noisy);
        params.push(&mut self.mu_clean);
        params
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Coordinate-wise means: `(mu_clean, mu_noisy)` from the original and
/// corrupted representations.
pub fn init_centroids(original: &[Vec<f64>], corrupted: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    fn mean(set: &[Vec<f64>], name: &'static str) -> Result<Vec<f64>> {
        let first = set.first().ok_or(Error::EmptyClusterInit(name))?;
        let mut m = vec![0.0; first.len()];
        for z in set {
            for (a, b) in m.iter_mut().zip(z) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= set.len() as f64);
        Ok(m)
    }
    Ok((mean(original, "original")?, mean(corrupted, "corrupted")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use crate::trainer::{RowMeta, SignalKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn centroid_means() {
        let (clean, noisy) = init_centroids(&[vec![0.0, 1.0]], &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(clean, vec![0.0, 1.0]);
        assert_eq!(noisy, vec![1.0, 0.0]);
        let (_, noisy) = init_centroids(&[vec![0.0, 1.0]], &[vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(noisy, vec![2.0, 0.0]);
        assert!(matches!(
            init_centroids(&[], &[vec![1.0]]),
            Err(Error::EmptyClusterInit("original"))
        ));
    }

    #[test]
    fn encode_shape_and_determinism() {
        let cfg = EncoderConfig::default();
        let model = ClusterModel::new(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let row = vec![1.0; 20];
        let z = model.encode(&row).unwrap();
        assert_eq!(z.len(), cfg.rep_dim);
        assert_eq!(z, model.encode(&row).unwrap());
        assert!(matches!(
            model.encode(&[1.0; 8]),
            Err(Error::InvalidLength { length: 8, required: 9 })
        ));

        let rows = vec![
            RowMeta {
                id: 0,
                provenance: Provenance::Original,
                observed_label: 0,
                is_noisy: None,
            };
            2
        ];
        let dynm = DynamicsMatrix::new(rows, vec![1.0; 40], 20, SignalKind::QuantizedLogitDifference).unwrap();
        let all = model.encode_all(&dynm).unwrap();
        assert_eq!(all[0], all[1]);
    }
}
