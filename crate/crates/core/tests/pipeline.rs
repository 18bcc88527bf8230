use std::f64::consts::PI;

use proptest::prelude::*;

use hmortar::diagnostics::{compute_energy, compute_torque, compute_torque_dual, sweep, uniform_grid};
use hmortar::machine_model::{default_config, MachineConfig};
use hmortar::solver::{saddle_solvers, solve_monolithic, AssembledSystem};

fn reduced() -> MachineConfig {
    let mut c = default_config();
    c.angular_divisions_rotor = 72;
    c.angular_divisions_stator = 72;
    c.radial_layers = 2;
    c
}

// Energy (J/m) and torque (N m) of the default machine from the monolithic
// sparse-LU solve, frozen when the monolithic path was first validated.
const FROZEN: [(f64, f64, f64); 2] = [
    (5.00000000000000028e-2, -2.12910280257271609e2, -3.00587143854151887e-3),
    (4.36332312998582370e-2, -2.12910475065523514e2, -3.08685083898807555e-3),
];

#[test]
fn schur_path_reproduces_frozen_reference() {
    let sys = AssembledSystem::new(&default_config()).unwrap();
    let schur = saddle_solvers().get("schur").unwrap();
    for (alpha, energy, torque) in FROZEN {
        let st = schur.solve(&sys, alpha).unwrap();
        assert!((compute_energy(&sys, &st) - energy).abs() <= 1e-10 * energy.abs());
        assert!((compute_torque(&sys, &st) - torque).abs() <= 1e-8 * torque.abs());
    }
}

#[test]
fn aligned_rotor_has_no_cogging_torque() {
    let sys = AssembledSystem::new(&default_config()).unwrap();
    let st = saddle_solvers().get("schur").unwrap().solve(&sys, 0.0).unwrap();
    assert!(compute_torque(&sys, &st).abs() <= 1e-9 * FROZEN[1].2.abs());
}

#[test]
fn backends_give_the_same_torque() {
    let cfg = reduced();
    let direct = AssembledSystem::with_backend_name(&cfg, "cholesky").unwrap();
    let iterative = AssembledSystem::with_backend_name(&cfg, "cg").unwrap();
    let schur = saddle_solvers().get("schur").unwrap();
    for alpha in [0.03, 0.11] {
        let t1 = compute_torque(&direct, &schur.solve(&direct, alpha).unwrap());
        let t2 = compute_torque(&iterative, &schur.solve(&iterative, alpha).unwrap());
        assert!((t1 - t2).abs() <= 1e-7 * t1.abs(), "{t1} vs {t2}");
    }
}

#[test]
fn mirrored_angles_give_opposite_torque() {
    let sys = AssembledSystem::new(&reduced()).unwrap();
    let schur = saddle_solvers().get("schur").unwrap();
    let alphas = [0.02, -0.02, 0.07, -0.07];
    let t: Vec<f64> = sweep(&sys, schur.as_ref(), &alphas)
        .unwrap()
        .into_iter()
        .map(|s| s.unwrap().torque)
        .collect();
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    assert!((t[0] + t[1]).abs() <= 1e-9 * scale);
    assert!((t[2] + t[3]).abs() <= 1e-9 * scale);
}

#[test]
fn sweep_over_a_full_turn_factorizes_twice() {
    let sys = AssembledSystem::new(&reduced()).unwrap();
    let schur = saddle_solvers().get("schur").unwrap();
    let out = sweep(&sys, schur.as_ref(), &uniform_grid(0.0, 2.0 * PI, 90)).unwrap();
    assert!(out.iter().all(|s| s.is_ok()));
    assert_eq!(sys.factorization_count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn strategies_agree_at_any_angle(alpha in -PI..PI) {
        let sys = AssembledSystem::new(&reduced()).unwrap();
        let st = saddle_solvers().get("schur").unwrap().solve(&sys, alpha).unwrap();
        let mono = solve_monolithic(&sys, alpha).unwrap();
        let (t1, t2) = (compute_torque(&sys, &st), compute_torque(&sys, &mono));
        // tolerances relative to the cogging amplitude, the torque itself crosses zero
        let scale = FROZEN[1].2.abs();
        prop_assert!((t1 - t2).abs() <= 1e-8 * scale);
        prop_assert!((compute_torque_dual(&sys, &st) - t1).abs() <= 1e-10 * scale);
    }

    #[test]
    fn torque_repeats_every_slot_pitch(alpha in 0.0..(2.0 * PI / 36.0), k in 1usize..36) {
        let sys = AssembledSystem::new(&reduced()).unwrap();
        let schur = saddle_solvers().get("schur").unwrap();
        let shifted = alpha + k as f64 * 2.0 * PI / 36.0;
        let t0 = compute_torque(&sys, &schur.solve(&sys, alpha).unwrap());
        let t1 = compute_torque(&sys, &schur.solve(&sys, shifted).unwrap());
        prop_assert!((t0 - t1).abs() <= 1e-9 * FROZEN[1].2.abs());
    }
}
