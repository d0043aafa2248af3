//! Training-signal baselines: a two-component 1-D Gaussian mixture on row
//! means (Avg.Encoder) and on row sums (area under the margin). The component
//! with the lower mean is the noisy one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dataset::Provenance;
use crate::error::{Error, Result};
use crate::eval::{DetectionReport, Method, Verdict};
use crate::trainer::{summarize, DynamicsMatrix, SignalKind};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gmm1dParams {
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub weights: [f64; 2],
    /// Responsibility of each component for each input value.
    pub responsibilities: Vec<[f64; 2]>,
    /// Log-likelihood after initialization and after every iteration.
    pub log_likelihood: Vec<f64>,
}

impl Gmm1dParams {
    /// Index of the component with the lower mean.
    pub fn lower(&self) -> usize {
        if self.means[0] <= self.means[1] {
            0
        } else {
            1
        }
    }
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// E-step: responsibilities and the log-likelihood of the current parameters.
fn expectation(values: &[f64], means: [f64; 2], vars: [f64; 2], weights: [f64; 2]) -> (Vec<[f64; 2]>, f64) {
    let mut ll = 0.0;
    let resp = values
        .iter()
        .map(|&x| {
            let l0 = weights[0].ln() + log_normal(x, means[0], vars[0]);
            let l1 = weights[1].ln() + log_normal(x, means[1], vars[1]);
            let m = l0.max(l1);
            let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
            ll += lse;
            [(l0 - lse).exp(), (l1 - lse).exp()]
        })
        .collect();
    (resp, ll)
}

/// EM for a two-component 1-D Gaussian mixture, initialized at the 25th and
/// 75th percentiles with the pooled variance. Stops when the log-likelihood
/// gains less than `tolerance` or after `iterations` rounds.
pub fn gmm1d_em(values: &[f64], iterations: usize, tolerance: f64) -> Result<Gmm1dParams> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < 2 || sorted.first() == sorted.last() {
        return Err(Error::DegenerateData("need at least two distinct values".into()));
    }
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite value".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let pooled = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(VARIANCE_FLOOR);

    let mut means = [quantile(&sorted, 0.25), quantile(&sorted, 0.75)];
    let mut vars = [pooled; 2];
    let mut weights = [0.5; 2];
    let (mut resp, mut ll) = expectation(values, means, vars, weights);
    let mut log_likelihood = vec![ll];

    for _ in 0..iterations {
        for k in 0..2 {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= 0.0 {
                // A component with no mass keeps its parameters.
                continue;
            }
            means[k] = resp.iter().zip(values).map(|(r, x)| r[k] * x).sum::<f64>() / nk;
            vars[k] = (resp
                .iter()
                .zip(values)
                .map(|(r, x)| r[k] * (x - means[k]).powi(2))
                .sum::<f64>()
                / nk)
                .max(VARIANCE_FLOOR);
            weights[k] = nk / n;
        }
        let total = weights[0] + weights[1];
        weights = [weights[0] / total, weights[1] / total];
        let (r, new_ll) = expectation(values, means, vars, weights);
        resp = r;
        log_likelihood.push(new_ll);
        let gain = new_ll - ll;
        ll = new_ll;
        if gain < tolerance {
            break;
        }
    }
    Ok(Gmm1dParams {
        means,
        variances: vars,
        weights,
        responsibilities: resp,
        log_likelihood,
    })
}

const EM_ITERATIONS: usize = 500;
const EM_TOLERANCE: f64 = 1e-10;

fn split_lower_component(dynamics: &DynamicsMatrix, scores: &[f64], method: Method) -> Result<DetectionReport> {
    let rows = dynamics.indices(Provenance::Original);
    let values: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
    let gmm = gmm1d_em(&values, EM_ITERATIONS, EM_TOLERANCE)?;
    let low = gmm.lower();
    let verdicts = rows
        .iter()
        .zip(&gmm.responsibilities)
        .map(|(&i, r)| Verdict {
            id: dynamics.rows()[i].id,
            noisy: r[low] > 0.5,
        })
        .collect();
    Ok(DetectionReport::new(method, verdicts))
}

fn require_margin_signal(dynamics: &DynamicsMatrix) -> Result<()> {
    if dynamics.signal() != SignalKind::LogitDifference {
        return Err(Error::InvalidConfig(format!(
            "baselines need logit-difference dynamics, got {}",
            dynamics.signal().name()
        )));
    }
    Ok(())
}

/// Avg.Encoder: mixture split of the row-mean signal over original rows.
pub fn avg_encoder_detect(dynamics: &DynamicsMatrix) -> Result<DetectionReport> {
    require_margin_signal(dynamics)?;
    split_lower_component(dynamics, &summarize(dynamics), Method::AvgEncoder)
}

/// Area under the margin: summed signal per row.
pub fn aum_scores(dynamics: &DynamicsMatrix) -> Vec<f64> {
    (0..dynamics.len())
        .map(|i| dynamics.row(i).iter().sum())
        .collect()
}

/// AUM scores split by the same mixture rule as [`avg_encoder_detect`].
pub fn aum_detect(dynamics: &DynamicsMatrix) -> Result<DetectionReport> {
    require_margin_signal(dynamics)?;
    split_lower_component(dynamics, &aum_scores(dynamics), Method::Aum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::RowMeta;

    #[test]
    fn separated_clusters() {
        let g = gmm1d_em(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], 200, 1e-12).unwrap();
        let (lo, hi) = (g.means[g.lower()], g.means[1 - g.lower()]);
        assert!(lo.abs() < 0.1 && (hi - 10.0).abs() < 0.1);
        assert!(g.responsibilities.iter().all(|r| r[0] > 0.99 || r[1] > 0.99));
    }

    #[test]
    fn identical_values_are_degenerate() {
        assert!(matches!(
            gmm1d_em(&[2.0, 2.0, 2.0], 10, 1e-9),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], 0.75), 10.0);
    }

    fn margin_dynamics(rows: &[f64], epochs: usize) -> DynamicsMatrix {
        let meta = (0..rows.len())
            .map(|i| RowMeta {
                id: i as u64,
                provenance: Provenance::Original,
                observed_label: 0,
                is_noisy: None,
            })
            .collect();
        let values = rows.iter().flat_map(|v| std::iter::repeat_n(*v, epochs)).collect();
        DynamicsMatrix::new(meta, values, epochs, SignalKind::LogitDifference).unwrap()
    }

    #[test]
    fn constant_rows_lower_flagged() {
        let d = margin_dynamics(&[1.0, 1.0, -1.0, 1.0, -1.0], 4);
        let r = avg_encoder_detect(&d).unwrap();
        let flagged: Vec<u64> = r.verdicts.iter().filter(|v| v.noisy).map(|v| v.id).collect();
        assert_eq!(flagged, vec![2, 4]);
        let same = margin_dynamics(&[1.0, 1.0], 4);
        assert!(matches!(avg_encoder_detect(&same), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn aum_sums() {
        let d = margin_dynamics(&[2.0, -2.0, 2.0], 10);
        let s = aum_scores(&d);
        assert_eq!(s[0], 20.0);
        let means = summarize(&d);
        for (a, m) in s.iter().zip(&means) {
            assert!((a - 10.0 * m).abs() < 1e-12);
        }
        let r = aum_detect(&d).unwrap();
        assert_eq!(r.verdicts.iter().filter(|v| v.noisy).count(), 1);
        assert!(r.verdicts[1].noisy);
    }

    #[test]
    fn rejects_wrong_signal() {
        let meta = vec![
            RowMeta {
                id: 0,
                provenance: Provenance::Original,
                observed_label: 0,
                is_noisy: None,
            };
            1
        ];
        let d = DynamicsMatrix::new(meta, vec![1.0], 1, SignalKind::QuantizedLogitDifference).unwrap();
        assert!(avg_encoder_detect(&d).is_err());
    }
}
