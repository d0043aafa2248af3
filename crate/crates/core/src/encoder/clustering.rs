//! Two-cluster soft assignment on cosine distance, the sharpened target
//! distribution, the clustering and alignment losses, and the label-free
//! validation metric. Gradients are hand-derived and checked against finite
//! differences in the tests.

use serde::{Deserialize, Serialize};

use crate::dataset::Provenance;
use crate::error::{Error, Result};
use crate::nn::kl_divergence;

/// Norm below which a vector has no direction.
pub const NORM_EPS: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `1 - <a, b> / (|a| |b|)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidShape(format!(
            "cosine distance of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na <= NORM_EPS || nb <= NORM_EPS {
        return Err(Error::DegenerateVector);
    }
    Ok((1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0))
}

/// Cosine similarity with its gradients with respect to both arguments.
pub(crate) fn cosine_with_grads(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (na, nb) = (norm(a), norm(b));
    if na <= NORM_EPS || nb <= NORM_EPS {
        return Err(Error::DegenerateVector);
    }
    let cos = dot(a, b) / (na * nb);
    let ga = a
        .iter()
        .zip(b)
        .map(|(x, y)| y / (na * nb) - cos * x / (na * na))
        .collect();
    let gb = a
        .iter()
        .zip(b)
        .map(|(x, y)| x / (na * nb) - cos * y / (nb * nb))
        .collect();
    Ok((cos, ga, gb))
}

/// Soft membership of one representation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub q_noisy: f64,
    pub q_clean: f64,
}

impl Assignment {
    pub fn from_noisy(q_noisy: f64) -> Self {
        Self {
            q_noisy,
            q_clean: 1.0 - q_noisy,
        }
    }

    pub fn as_pair(&self) -> [f64; 2] {
        [self.q_noisy, self.q_clean]
    }
}

fn kernel_share(d_noisy: f64, d_clean: f64) -> f64 {
    let a = 1.0 / (1.0 + d_noisy);
    let b = 1.0 / (1.0 + d_clean);
    a / (a + b)
}

/// Student-t (one degree of freedom) assignment on cosine distance.
pub fn assign(z: &[f64], mu_noisy: &[f64], mu_clean: &[f64]) -> Result<Assignment> {
    let dn = cosine_distance(z, mu_noisy)?;
    let dc = cosine_distance(z, mu_clean)?;
    Ok(Assignment::from_noisy(kernel_share(dn, dc)))
}

/// Noisy iff `q_noisy > q_clean`; a tie counts as clean.
pub fn verdict(q_noisy: f64) -> bool {
    q_noisy > 1.0 - q_noisy
}

/// Sharpened, frequency-normalized targets over the full set.
pub fn target_distribution(q: &[Assignment]) -> Result<Vec<Assignment>> {
    if q.is_empty() {
        return Err(Error::DegenerateCluster("no rows for target distribution".into()));
    }
    let s_noisy: f64 = q.iter().map(|a| a.q_noisy).sum();
    let s_clean: f64 = q.iter().map(|a| a.q_clean).sum();
    if s_noisy <= 0.0 || s_clean <= 0.0 {
        return Err(Error::DegenerateCluster(
            "one cluster has zero total assignment".into(),
        ));
    }
    Ok(q.iter()
        .map(|a| {
            let n = a.q_noisy * (a.q_noisy / s_noisy);
            let c = a.q_clean * (a.q_clean / s_clean);
            Assignment::from_noisy(n / (n + c))
        })
        .collect())
}

/// `sum_rows KL(p || q)`.
pub fn cluster_loss(p: &[Assignment], q: &[Assignment]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidShape(format!(
            "{} targets for {} assignments",
            p.len(),
            q.len()
        )));
    }
    p.iter()
        .zip(q)
        .map(|(pi, qi)| kl_divergence(&pi.as_pair(), &qi.as_pair()))
        .sum()
}

/// The four verdict x provenance groups used by the alignment loss and the
/// validation metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    OrigNoisy,
    OrigClean,
    CorrNoisy,
    CorrClean,
}

fn group(provenance: Provenance, noisy: bool) -> Group {
    match (provenance, noisy) {
        (Provenance::Original, true) => Group::OrigNoisy,
        (Provenance::Original, false) => Group::OrigClean,
        (Provenance::Corrupted, true) => Group::CorrNoisy,
        (Provenance::Corrupted, false) => Group::CorrClean,
    }
}

/// Alignment loss with gradients with respect to every representation.
#[derive(Clone, Debug)]
pub struct AlignmentTerm {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Mean cosine distance between original and corrupted group means within
/// each predicted cluster, halved. A term whose groups are empty is dropped;
/// the surviving term keeps its one-half weight. Verdicts are constants.
pub fn alignment_loss_with_grads(
    reps: &[&[f64]],
    provenance: &[Provenance],
    verdicts: &[bool],
) -> Result<AlignmentTerm> {
    if reps.is_empty() {
        return Err(Error::DegenerateCluster("no representations".into()));
    }
    let dim = reps[0].len();
    let groups: Vec<Group> = provenance
        .iter()
        .zip(verdicts)
        .map(|(p, v)| group(*p, *v))
        .collect();
    let mean_of = |g: Group| -> Option<(Vec<f64>, usize)> {
        let members: Vec<&[f64]> = reps
            .iter()
            .zip(&groups)
            .filter(|(_, gg)| **gg == g)
            .map(|(r, _)| *r)
            .collect();
        if members.is_empty() {
            return None;
        }
        let mut mean = vec![0.0; dim];
        for r in &members {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        let n = members.len();
        mean.iter_mut().for_each(|m| *m /= n as f64);
        Some((mean, n))
    };

    let mut loss = 0.0;
    let mut grads = vec![vec![0.0; dim]; reps.len()];
    let mut defined = 0;
    for (orig, corr) in [
        (Group::OrigNoisy, Group::CorrNoisy),
        (Group::OrigClean, Group::CorrClean),
    ] {
        let (Some((mo, no)), Some((mc, nc))) = (mean_of(orig), mean_of(corr)) else {
            continue;
        };
        defined += 1;
        let (cos, g_orig, g_corr) = cosine_with_grads(&mo, &mc)?;
        loss += 0.5 * (1.0 - cos);
        for (i, g) in groups.iter().enumerate() {
            let (src, n) = if *g == orig {
                (&g_orig, no)
            } else if *g == corr {
                (&g_corr, nc)
            } else {
                continue;
            };
            for (out, s) in grads[i].iter_mut().zip(src) {
                *out -= 0.5 * s / n as f64;
            }
        }
    }
    if defined == 0 {
        return Err(Error::DegenerateCluster(
            "no predicted cluster holds both original and corrupted rows".into(),
        ));
    }
    Ok(AlignmentTerm { loss, grads })
}

pub fn alignment_loss(reps: &[&[f64]], provenance: &[Provenance], verdicts: &[bool]) -> Result<f64> {
    alignment_loss_with_grads(reps, provenance, verdicts).map(|t| t.loss)
}

/// Squared gap between the mean noisy-assignment of corrupted rows predicted
/// noisy and of original rows predicted clean. `None` when either group is
/// empty.
pub fn validation_metric(q: &[Assignment], provenance: &[Provenance]) -> Option<f64> {
    let (mut corr_noisy, mut n_cn) = (0.0, 0usize);
    let (mut orig_clean, mut n_oc) = (0.0, 0usize);
    for (a, p) in q.iter().zip(provenance) {
        match group(*p, verdict(a.q_noisy)) {
            Group::CorrNoisy => {
                corr_noisy += a.q_noisy;
                n_cn += 1;
            }
            Group::OrigClean => {
                orig_clean += a.q_noisy;
                n_oc += 1;
            }
            _ => {}
        }
    }
    if n_cn == 0 || n_oc == 0 {
        return None;
    }
    Some((corr_noisy / n_cn as f64 - orig_clean / n_oc as f64).powi(2))
}

/// Gradient of `KL(p || q(z))` for one row with respect to the row's
/// representation and both centroids.
#[derive(Clone, Debug)]
pub struct ClusterGrad {
    pub loss: f64,
    pub q: Assignment,
    pub z: Vec<f64>,
    pub mu_noisy: Vec<f64>,
    pub mu_clean: Vec<f64>,
}

pub fn cluster_loss_row_grad(
    z: &[f64],
    mu_noisy: &[f64],
    mu_clean: &[f64],
    target: Assignment,
) -> Result<ClusterGrad> {
    let (cos_n, gz_n, gmu_n) = cosine_with_grads(z, mu_noisy)?;
    let (cos_c, gz_c, gmu_c) = cosine_with_grads(z, mu_clean)?;
    let a = 1.0 / (2.0 - cos_n);
    let b = 1.0 / (2.0 - cos_c);
    let q = Assignment::from_noisy(a / (a + b));
    let loss = kl_divergence(&target.as_pair(), &q.as_pair())?;

    // dKL/dq_noisy, then through q = a / (a + b) and a = 1 / (1 + d), d = 1 - cos.
    let dl_dq = -target.q_noisy / q.q_noisy + target.q_clean / q.q_clean;
    let s2 = (a + b) * (a + b);
    let dq_dcos_n = (b / s2) * a * a;
    let dq_dcos_c = -(a / s2) * b * b;
    let kn = dl_dq * dq_dcos_n;
    let kc = dl_dq * dq_dcos_c;
    Ok(ClusterGrad {
        loss,
        q,
        z: gz_n.iter().zip(&gz_c).map(|(n, c)| kn * n + kc * c).collect(),
        mu_noisy: gmu_n.iter().map(|g| kn * g).collect(),
        mu_clean: gmu_c.iter().map(|g| kc * g).collect(),
    })
}
