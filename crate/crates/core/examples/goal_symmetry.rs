//! Goal families: a mug grasp is free about its vertical axis, a box has
//! two flipped grasps. The closest member is resolved from the tool pose.

use clfreach::clf::{axial_argmin_angle, clf_value, resolve_goal, GoalSet};
use clfreach::geometry::{NormWeight, Pose, Rotation};
use nalgebra::Vector3;
use std::f64::consts::PI;

fn main() {
    let k = NormWeight::default();
    let base = Pose::new(Rotation::about_x(PI), Vector3::new(0.0, 0.5, 0.08));
    let tool = Pose::new(Rotation::about_x(PI).compose(&Rotation::about_z(1.1)), Vector3::new(0.05, 0.45, 0.2));

    let axis = Vector3::z();
    let phi = axial_argmin_angle(&tool, &base, &axis);
    let axial = GoalSet::axial(base, axis).unwrap();
    let g = resolve_goal(&tool, &axial, k).unwrap();
    println!(
        "axial: phi* = {phi:.4} rad, V = {:.5} (base member V = {:.5})",
        clf_value(&tool, &g, k),
        clf_value(&tool, &base, k)
    );

    let flipped = base.compose(&Pose::from_rotation(Rotation::about_z(PI)));
    let pair = GoalSet::discrete(vec![base, flipped]).unwrap();
    let g = resolve_goal(&tool, &pair, k).unwrap();
    let pick = if g == base { "base" } else { "flipped" };
    println!("discrete: picked {pick}, V = {:.5}", clf_value(&tool, &g, k));
}
