//! UR5 forward kinematics, the body Jacobian and a damped solve near a
//! wrist singularity.

use clfreach::geometry::Twist;
use clfreach::kinematics::{solve_joint_velocity, JointConfig, KinematicChain, Manipulator, SolverParams};
use nalgebra::Vector3;

fn main() {
    let arm = KinematicChain::ur5();
    let solver = SolverParams::default();
    let twist = Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -0.05));

    for (label, q) in [
        ("generic", JointConfig::from_array([0.3, -1.2, 1.5, -1.9, -1.6, 0.4])),
        ("wrist-singular", JointConfig::from_array([0.3, -1.2, 1.5, -1.9, 0.0, 0.4])),
    ] {
        let h = arm.forward(&q).unwrap();
        let jac = arm.body_jacobian(&q).unwrap();
        let sigma = jac.svd(false, false).singular_values.min();
        let u = solve_joint_velocity(&jac, &twist, &solver, &arm.speed_caps()).unwrap();
        println!("{label}: tool at {:.4?}, sigma_min {sigma:.2e}", h.translation.as_slice());
        println!("  joint rates for a 5 cm/s descent: {:.4?}", u.0.as_slice());
    }
}
