//! Training losses against the labels of a generated sample, for a perfect
//! predictor and for a noisy one.

use clfreach::config::Config;
use clfreach::dataset::generate_sample;
use clfreach::loss::{loss_report, DensePrediction, DenseTargets};
use nalgebra::Vector6;
use rand::Rng;

fn main() {
    let cfg = Config::default();
    let sample = generate_sample(&cfg, 5, 0).unwrap();
    let target = DenseTargets::from_labels(&sample.labels());

    let perfect = DensePrediction {
        logits: target.y.iter().map(|&y| if y == 1 { 20.0 } else { -20.0 }).collect(),
        v_hat: target.v.clone(),
        u_hat: target.u.clone(),
    };
    println!("perfect: {:?}", loss_report(&perfect, &target).unwrap());

    let mut rng = clfreach::derive_rng(5, &[1]);
    let noisy = DensePrediction {
        logits: perfect.logits.iter().map(|x| x * 0.1 + rng.random_range(-1.0..1.0)).collect(),
        v_hat: target.v.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect(),
        u_hat: target.u.iter().map(|u| u + Vector6::from_fn(|_, _| rng.random_range(-0.1..0.1))).collect(),
    };
    println!("noisy:   {:?}", loss_report(&noisy, &target).unwrap());
}
