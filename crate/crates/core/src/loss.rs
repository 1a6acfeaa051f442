//! Exact evaluators of the training objective: binary cross entropy on the
//! per-cell foreground logits plus an L1 regression term on `(V, u)` over
//! foreground cells.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::GridLabels;

/// Logits are clamped to this magnitude before the logistic function.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LossError {
    #[error("loss over an empty grid")]
    EmptyGrid,
    #[error("length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

fn check_len(expected: usize, got: usize) -> Result<(), LossError> {
    if expected == got {
        Ok(())
    } else {
        Err(LossError::ShapeMismatch { expected, got })
    }
}

/// `log S(x)` and `log(1 − S(x))` without cancellation.
fn log_sigmoids(x: f64) -> (f64, f64) {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    // log S(x) = −log(1 + e^{−x}); log(1 − S(x)) = log S(−x)
    let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    (-softplus(-x), -softplus(x))
}

/// Mean binary cross entropy, nonnegative.
pub fn seg_loss(logits: &[f64], y: &[u8]) -> Result<f64, LossError> {
    check_len(logits.len(), y.len())?;
    if logits.is_empty() {
        return Err(LossError::EmptyGrid);
    }
    let sum: f64 = logits
        .iter()
        .zip(y)
        .map(|(&x, &y)| {
            let (log_p, log_q) = log_sigmoids(x);
            if y != 0 {
                log_p
            } else {
                log_q
            }
        })
        .sum();
    Ok(-sum / logits.len() as f64)
}

/// `(1/N_pos) Σ y (|V − V̂| + ‖u − û‖₁ / 6)`; zero when no cell is foreground.
pub fn ctrl_loss(
    v_hat: &[f64],
    u_hat: &[Vector6<f64>],
    v: &[f64],
    u: &[Vector6<f64>],
    y: &[u8],
) -> Result<f64, LossError> {
    let n = y.len();
    for len in [v_hat.len(), u_hat.len(), v.len(), u.len()] {
        check_len(n, len)?;
    }
    let mut n_pos = 0usize;
    let mut sum = 0.0;
    for i in (0..n).filter(|&i| y[i] != 0) {
        n_pos += 1;
        sum += (v[i] - v_hat[i]).abs() + (u[i] - u_hat[i]).abs().sum() / 6.0;
    }
    Ok(if n_pos == 0 { 0.0 } else { sum / n_pos as f64 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub seg_loss: f64,
    pub ctrl_loss: f64,
    pub total: f64,
}

/// Row-major per-cell network outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DensePrediction {
    pub logits: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub u_hat: Vec<Vector6<f64>>,
}

/// Row-major per-cell targets; background cells hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTargets {
    pub y: Vec<u8>,
    pub v: Vec<f64>,
    pub u: Vec<Vector6<f64>>,
}

impl DenseTargets {
    pub fn from_labels(labels: &GridLabels) -> Self {
        let n = labels.grid.len();
        let mut t = Self { y: vec![0; n], v: vec![0.0; n], u: vec![Vector6::zeros(); n] };
        for c in &labels.cells {
            let i = labels.grid.index(c.row, c.col);
            t.y[i] = c.y;
            t.v[i] = c.value;
            t.u[i] = c.control;
        }
        t
    }
}

pub fn loss_report(pred: &DensePrediction, target: &DenseTargets) -> Result<LossReport, LossError> {
    let seg = seg_loss(&pred.logits, &target.y)?;
    let ctrl = ctrl_loss(&pred.v_hat, &pred.u_hat, &target.v, &target.u, &target.y)?;
    Ok(LossReport { seg_loss: seg, ctrl_loss: ctrl, total: seg + ctrl })
}
