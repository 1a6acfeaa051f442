//! Non-optimal suppression and momentum filtering of the selected control.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::ProposalGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArbitrationError {
    #[error("eta must lie in [0, 1], got {0}")]
    BadEta(f64),
    #[error("score threshold must lie in (0, 1), got {0}")]
    BadScoreThreshold(f64),
    #[error("grasp threshold must be > 0, got {0}")]
    BadGraspThreshold(f64),
}

/// Filter state and thresholds owned by one control loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbitratorState {
    #[serde(skip)]
    pub u_bar: Option<Vector6<f64>>,
    pub eta: f64,
    pub score_threshold: f64,
    pub grasp_threshold: f64,
}

impl Default for ArbitratorState {
    fn default() -> Self {
        Self { u_bar: None, eta: 0.5, score_threshold: 0.5, grasp_threshold: 0.005 }
    }
}

impl ArbitratorState {
    pub fn validate(&self) -> Result<(), ArbitrationError> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(ArbitrationError::BadEta(self.eta));
        }
        if !(self.score_threshold > 0.0 && self.score_threshold < 1.0) {
            return Err(ArbitrationError::BadScoreThreshold(self.score_threshold));
        }
        if !(self.grasp_threshold > 0.0 && self.grasp_threshold.is_finite()) {
            return Err(ArbitrationError::BadGraspThreshold(self.grasp_threshold));
        }
        Ok(())
    }

    /// Fresh filter with the same parameters.
    pub fn reset(&self) -> Self {
        Self { u_bar: None, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub cell: (u32, u32),
    pub v_hat: f64,
    pub u_hat: Vector6<f64>,
}

/// Minimal-`V̂` cell among those scoring at least `score_threshold`; ties go
/// to the lexicographically smallest `(row, col)`.
pub fn select(props: &ProposalGrid, score_threshold: f64) -> Option<Selection> {
    let mut best: Option<Selection> = None;
    for p in props.cells.iter().filter(|p| p.score >= score_threshold) {
        let cand = Selection { cell: (p.row, p.col), v_hat: p.v_hat, u_hat: p.u_hat };
        best = match best {
            None => Some(cand),
            Some(b) if p.v_hat < b.v_hat || (p.v_hat == b.v_hat && cand.cell < b.cell) => Some(cand),
            keep => keep,
        };
    }
    best
}

/// `ū_t = η ū_{t−1} + (1 − η) û_t`, seeded with the first observation.
pub fn momentum_update(state: &ArbitratorState, u_hat: &Vector6<f64>) -> (ArbitratorState, Vector6<f64>) {
    let u_bar = match state.u_bar {
        None => *u_hat,
        Some(prev) => prev * state.eta + u_hat * (1.0 - state.eta),
    };
    (ArbitratorState { u_bar: Some(u_bar), ..*state }, u_bar)
}

/// Close the gripper once the selected Lyapunov value drops below threshold.
pub fn should_grasp(v_hat_min: f64, grasp_threshold: f64) -> bool {
    v_hat_min < grasp_threshold
}
