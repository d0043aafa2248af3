use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer with per-parameter moment buffers.
///
/// SGD: `v <- m v + g + wd theta; theta <- theta - lr v`.
/// Adam: decoupled decay `theta <- theta - lr wd theta`, then the usual
/// bias-corrected adaptive step.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {lr}")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be non-negative, got {weight_decay}"
            )));
        }
        Ok(Self {
            kind,
            lr,
            weight_decay,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        })
    }

    pub fn sgd(lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        Self::new(OptimizerKind::SgdMomentum { momentum }, lr, weight_decay)
    }

    pub fn adam(lr: f64, weight_decay: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), lr, weight_decay)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update using each parameter's accumulated gradient.
    /// Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.second = self.first.clone();
            }
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(b, p)| b.len() != p.len())
        {
            return Err(Error::InvalidShape(
                "parameter list does not match optimizer buffers".into(),
            ));
        }
        for p in params.iter() {
            if let Some(g) = p.grad() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericFault("non-finite gradient".into()));
                }
            }
        }
        self.steps += 1;
        let (lr, wd) = (self.lr, self.weight_decay);
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                for (p, vel) in params.iter_mut().zip(self.first.iter_mut()) {
                    let (theta, grad) = p.value_and_grad_mut();
                    for i in 0..theta.len() {
                        vel[i] = momentum * vel[i] + grad[i] + wd * theta[i];
                        theta[i] -= lr * vel[i];
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((p, m), v) in params
                    .iter_mut()
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    let (theta, grad) = p.value_and_grad_mut();
                    for i in 0..theta.len() {
                        theta[i] -= lr * wd * theta[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                        theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        if params.iter().any(|p| !p.all_finite()) {
            return Err(Error::NumericFault("parameters became non-finite".into()));
        }
        Ok(())
    }
}
