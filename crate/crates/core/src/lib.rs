//! Multi-instance reaching with control Lyapunov functions.
//!
//! A manipulator is driven toward the nearest grasp pose of the nearest
//! object instance by following the negative gradient of a weighted
//! SE(3) distance. Per-pixel proposals of `(V, u)` over an image grid are
//! suppressed down to the minimal-`V` cell and smoothed with momentum.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitration;
pub mod clf;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod geometry;
pub mod kinematics;
pub mod loss;
pub mod perception;
pub mod plot;
pub mod scene;
pub mod simulator;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d4_9bb4_6331_11eb);
    x ^ (x >> 31)
}

/// Mixes `path` into `master`; distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Independent generator for the sub-task named by `path`.
pub fn derive_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
