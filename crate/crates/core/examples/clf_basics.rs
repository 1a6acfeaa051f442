//! Value, gradient and predicted decrease of the Lyapunov function for a
//! pose a few centimetres and a few degrees off its goal.

use clfreach::clf::{clf_gradient, clf_value, predicted_decrease_rate};
use clfreach::geometry::{NormWeight, Pose, Rotation};
use nalgebra::Vector3;

fn main() {
    let k = NormWeight::default();
    let goal = Pose::new(Rotation::about_x(std::f64::consts::PI), Vector3::new(0.1, 0.45, 0.05));
    let tool = goal.compose(&Pose::new(Rotation::about_z(0.2), Vector3::new(0.03, -0.02, -0.05)));

    let v = clf_value(&tool, &goal, k);
    let grad = clf_gradient(&tool, &goal, k);
    println!("V          = {v:.6}");
    println!("grad omega = {:.5?}", grad.omega.as_slice());
    println!("grad v     = {:.5?}", grad.vel.as_slice());
    println!("dV/dt      = {:.6} under xi = -grad", predicted_decrease_rate(&grad));
}
