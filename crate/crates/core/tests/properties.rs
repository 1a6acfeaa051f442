use nalgebra::{Vector3, Vector6};
use proptest::prelude::*;

use clfreach::arbitration::{momentum_update, select, ArbitratorState};
use clfreach::clf::{clf_gradient, clf_value, predicted_decrease_rate, resolve_goal, GoalSet};
use clfreach::geometry::{hat, proj_se3_k, vee, NormWeight, Pose, Rotation, Twist};
use clfreach::kinematics::clamp_speed;
use clfreach::loss::{ctrl_loss, seg_loss};
use clfreach::perception::{GridSpec, Proposal, ProposalGrid};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn vec6(r: f64) -> impl Strategy<Value = Vector6<f64>> {
    prop::array::uniform6(-r..r).prop_map(Vector6::from)
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(3.0), vec3(1.0)).prop_map(|(w, t)| Pose::new(Rotation::exp(&w), t))
}

fn proposal() -> impl Strategy<Value = Proposal> {
    (0u32..6, 0u32..8, 0.0..1.0f64, 0.0..2.0f64, vec6(1.0)).prop_map(|(row, col, score, v_hat, u_hat)| Proposal {
        row,
        col,
        score,
        v_hat,
        u_hat,
    })
}

proptest! {
    #[test]
    fn vee_inverts_hat(xi in vec6(10.0)) {
        prop_assert_eq!(vee(&hat(&xi)).unwrap(), xi);
    }

    #[test]
    fn unit_weight_projection_fixes_se3(xi in vec6(10.0)) {
        let m = hat(&xi);
        prop_assert_eq!(proj_se3_k(&m, NormWeight::new(1.0).unwrap()), m);
    }

    #[test]
    fn projection_scales_translation_by_k(xi in vec6(10.0), k in 0.1..20.0f64) {
        let p = proj_se3_k(&hat(&xi), NormWeight::new(k).unwrap());
        let want = Vector6::new(xi[0], xi[1], xi[2], k * xi[3], k * xi[4], k * xi[5]);
        prop_assert!((vee(&p).unwrap() - want).amax() < 1e-12);
    }

    #[test]
    fn pose_times_inverse_is_identity(p in pose()) {
        let e = p.compose(&p.inverse()).to_matrix() - nalgebra::Matrix4::identity();
        prop_assert!(e.amax() < 1e-12);
    }

    #[test]
    fn value_is_nonnegative_and_zero_only_at_goal(h in pose(), g in pose()) {
        let k = NormWeight::default();
        prop_assert!(clf_value(&h, &g, k) >= 0.0);
        prop_assert!(clf_value(&g, &g, k).abs() < 1e-24);
    }

    #[test]
    fn predicted_rate_never_positive(h in pose(), g in pose()) {
        let grad = clf_gradient(&h, &g, NormWeight::default());
        prop_assert!(predicted_decrease_rate(&grad) <= 0.0);
    }

    #[test]
    fn discrete_goal_beats_every_member(h in pose(), goals in prop::collection::vec(pose(), 1..6)) {
        let k = NormWeight::default();
        let best = resolve_goal(&h, &GoalSet::discrete(goals.clone()).unwrap(), k).unwrap();
        let v = clf_value(&h, &best, k);
        prop_assert!(goals.iter().all(|g| v <= clf_value(&h, g, k)));
    }

    #[test]
    fn clamp_respects_caps_and_direction(v in vec6(10.0), caps in prop::array::uniform6(0.1..3.0f64)) {
        let caps = Vector6::from(caps);
        let c = clamp_speed(&v, &caps);
        for i in 0..6 {
            prop_assert!(c[i].abs() <= caps[i] * (1.0 + 1e-12));
        }
        prop_assert!(c.dot(&v) >= 0.0);
        prop_assert!((c.normalize() - v.normalize()).amax() < 1e-12 || v.norm() == 0.0);
    }

    #[test]
    fn selection_is_the_admitted_minimum(cells in prop::collection::vec(proposal(), 0..30), thr in 0.05..0.95f64) {
        let grid = ProposalGrid { grid: GridSpec { rows: 6, cols: 8, stride: 8 }, cells: cells.clone() };
        let admitted: Vec<&Proposal> = cells.iter().filter(|p| p.score >= thr).collect();
        match select(&grid, thr) {
            None => prop_assert!(admitted.is_empty()),
            Some(sel) => prop_assert!(admitted.iter().all(|p| sel.v_hat <= p.v_hat)),
        }
    }

    #[test]
    fn momentum_stays_in_the_hull(inputs in prop::collection::vec(vec6(1.0), 1..40), eta in 0.0..=1.0f64) {
        let mut state = ArbitratorState { eta, ..Default::default() };
        let mut lo = inputs[0];
        let mut hi = inputs[0];
        for u in &inputs {
            lo = lo.inf(u);
            hi = hi.sup(u);
            let (next, u_bar) = momentum_update(&state, u);
            for i in 0..6 {
                prop_assert!(u_bar[i] >= lo[i] - 1e-12 && u_bar[i] <= hi[i] + 1e-12);
            }
            state = next;
        }
    }

    #[test]
    fn losses_are_nonnegative(data in prop::collection::vec((-50.0..50.0f64, any::<bool>(), 0.0..2.0f64, 0.0..2.0f64), 1..64)) {
        let logits: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<u8> = data.iter().map(|d| d.1 as u8).collect();
        let v: Vec<f64> = data.iter().map(|d| d.2).collect();
        let v_hat: Vec<f64> = data.iter().map(|d| d.3).collect();
        let u = vec![Vector6::zeros(); data.len()];
        prop_assert!(seg_loss(&logits, &y).unwrap() >= 0.0);
        prop_assert!(ctrl_loss(&v_hat, &u, &v, &u, &y).unwrap() >= 0.0);
    }

    #[test]
    fn twist_exp_of_zero_rotation_is_a_translation(v in vec3(2.0)) {
        let p = Pose::exp(&Twist::new(Vector3::zeros(), v));
        prop_assert!((p.translation - v).amax() < 1e-15);
        prop_assert_eq!(p.rotation, Rotation::identity());
    }

    #[test]
    fn derived_seeds_differ_across_paths(master in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(clfreach::derive_seed(master, &[a]), clfreach::derive_seed(master, &[b]));
    }
}
