//! Suppression down to the minimal-V cell and momentum smoothing of the
//! selected control.

use clfreach::arbitration::{momentum_update, select, ArbitratorState};
use clfreach::perception::{GridSpec, Proposal, ProposalGrid};
use nalgebra::Vector6;

fn main() {
    let cell = |row, col, score, v_hat, u0| Proposal {
        row,
        col,
        score,
        v_hat,
        u_hat: Vector6::new(u0, 0.0, 0.0, 0.0, 0.0, 0.0),
    };
    let props = ProposalGrid {
        grid: GridSpec::default(),
        cells: vec![
            cell(10, 12, 0.9, 0.42, 0.3),
            cell(10, 13, 0.8, 0.40, 0.3),
            cell(30, 40, 0.95, 0.71, -0.2),
            cell(5, 5, 0.2, 0.01, 1.0),
        ],
    };
    let state = ArbitratorState::default();
    let sel = select(&props, state.score_threshold).unwrap();
    println!("selected cell {:?} with V_hat {}", sel.cell, sel.v_hat);

    let mut state = state;
    for (t, u0) in [1.0, 1.0, 0.0, 0.0, 0.0].into_iter().enumerate() {
        let (next, u_bar) = momentum_update(&state, &Vector6::new(u0, 0.0, 0.0, 0.0, 0.0, 0.0));
        println!("t={t}: u_hat {u0:.3} -> u_bar {:.4}", u_bar[0]);
        state = next;
    }
}
