use std::f64::consts::PI;

use proptest::prelude::*;

use pdd_core::field_schedule::{pulsed_pdd_schedule, NoiseTone, ReturnMode};
use pdd_core::linalg::CVector;
use pdd_core::pdd_analysis::{
    control_error_infidelity, filter_response, leakage_sweep, magnus_diabatic_estimate, memory_infidelity, FilterOptions,
    SweepScheme,
};
use pdd_core::propagator::{calibrate_phases, propagate_unitary, real_state, PropagationOptions};
use pdd_core::spin_algebra::{rotation_about_y, HalfInt, HyperfineSystem, StateLabel, ZeemanModel};
use pdd_core::units::khz;

fn setup() -> (ZeemanModel, CVector) {
    let m = ZeemanModel::projected_block(&HyperfineSystem::barium_137(), HalfInt::from_doubled(2)).unwrap();
    let psi =
        real_state(m.labels(), &[(StateLabel::fm(1, -1), (1.0f64 / 3.0).sqrt()), (StateLabel::fm(1, 1), (2.0f64 / 3.0).sqrt())])
            .unwrap();
    (m, psi)
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn phase_average_is_converged_at_eight_phases() {
    let (m, psi) = setup();
    let s = pulsed_pdd_schedule(10.0, 10.0, 50.0, 100.0, ReturnMode::Linear(5.0)).unwrap();
    let grid = [khz(1.0), khz(10.0)];
    let eight = filter_response(&m, &s, &psi, &grid, &FilterOptions::default()).unwrap();
    let sixteen = filter_response(&m, &s, &psi, &grid, &FilterOptions { n_phases: 16, ..FilterOptions::default() }).unwrap();
    for (a, b) in eight.s_values.iter().zip(&sixteen.s_values) {
        assert!((a - b).abs() < 0.01 * b, "{a} vs {b}");
    }
    assert!(eight.linearity.relative_deviation < 0.05);
}

#[test]
fn echo_cancels_a_static_offset() {
    let (m, psi) = setup();
    let s = pulsed_pdd_schedule(10.0, 10.0, 50.0, 100.0, ReturnMode::Linear(5.0)).unwrap();
    let opts = PropagationOptions::default();
    let cal = calibrate_phases(&m, &s, &opts, 1e-2).unwrap();
    let clean = memory_infidelity(&m, &s, &NoiseTone::new(0.0, 0.0, 0.0), &psi, &cal, &opts).unwrap();
    let b_e = 1e-4;
    let offset = memory_infidelity(&m, &s, &NoiseTone::new(b_e, 0.0, 0.0), &psi, &cal, &opts).unwrap();
    // Without the echo the same offset would cost 4 p₋ p₊ sin²(γ B_e t_f).
    let gamma = m.gyromagnetic_ratio().unwrap();
    let bare = 4.0 * (2.0 / 9.0) * (gamma * b_e * 100.0).sin().powi(2);
    assert!(bare > 1e3 * clean);
    assert!((offset - clean).abs() <= 0.1 * clean, "{offset} vs {clean} (unprotected {bare})");
}

#[test]
fn second_order_shift_corrects_the_reversal_phase() {
    let sys = HyperfineSystem::barium_137();
    let (m, _) = setup();
    let gamma = m.gyromagnetic_ratio().unwrap();
    let s = pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0, ReturnMode::Linear(1.0)).unwrap();
    let est = magnus_diabatic_estimate(&s, gamma).unwrap();
    let u = propagate_unitary(&m, &s, &PropagationOptions::default().with_tol(1e-14)).unwrap().unitary;
    let ideal = rotation_about_y(&sys, PI).entries.view((5, 5), (3, 3)).into_owned();
    let eps = gamma * pdd_core::field_schedule::phi_and_epsilon(&s, 40001).unwrap().signed_field_integral.last().unwrap();
    // |1,+1⟩ → |1,−1⟩ and back; the residual phase after the Larmor phase is −m θ_z.
    for (j, i, mval) in [(0usize, 2usize, 1.0), (2, 0, -1.0)] {
        let raw = wrap(u[(i, j)].arg() - ideal[(i, j)].arg() + mval * eps);
        let corrected = wrap(raw + mval * est.jz_shift);
        assert!(corrected.abs() * 10.0 <= raw.abs(), "m = {mval}: {raw} -> {corrected}");
    }
}

#[test]
fn sweeps_are_bit_identical_across_worker_counts() {
    let (m, psi) = setup();
    let scheme = SweepScheme::Pulsed { tau: 2.0, t_center: 1.5, t_f: 4.0, return_mode: ReturnMode::Linear(1.0) };
    let grid = [2.0, 3.0, 5.0, 8.0];
    let sub = [StateLabel::fm(1, 1), StateLabel::fm(1, -1)];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| leakage_sweep(&m, &scheme, &grid, &psi, &sub, &PropagationOptions::default()))
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|p| p.b_t).collect::<Vec<_>>(), grid.to_vec());

    let s = scheme.build(5.0).unwrap();
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let curve = pool.install(|| filter_response(&m, &s, &psi, &[0.1, 1.0], &FilterOptions::default()).unwrap());
        let mut out = Vec::new();
        curve.write_csv(&mut out).unwrap();
        out
    };
    assert_eq!(csv(1), csv(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn control_error_is_quadratic(db in 1e-6f64..1e-3, s in 0.1f64..20.0, t in 0.1f64..100.0, k in 0.1f64..4.0) {
        let a = control_error_infidelity(db, s, t, 1.0 / 3.0).unwrap().infidelity;
        let b = control_error_infidelity(k * db, s, t, 1.0 / 3.0).unwrap().infidelity;
        prop_assert!((b - k * k * a).abs() <= 1e-12 * b.max(1e-300));
        let swapped = control_error_infidelity(db, t, s, 1.0 / 3.0).unwrap().infidelity;
        prop_assert!((swapped - a).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn magnus_drive_scales_with_rotation_angle(b in 2.0f64..20.0, tau in 1.0f64..5.0) {
        // Halving the rotated angle halves φ̇ everywhere; with ε unchanged the
        // first-order integrals halve and θ_z drops by four.
        use pdd_core::field_schedule::{FieldSchedule, Segment, TimedSegment};
        let mk = |end: f64| FieldSchedule::from_segments(vec![TimedSegment::new(
            0.0, tau, Segment::Rotation { magnitude: b, phi_start: 0.0, phi_end: end },
        )]).unwrap();
        let full = magnus_diabatic_estimate(&mk(PI), 1.0).unwrap();
        let half = magnus_diabatic_estimate(&mk(PI / 2.0), 1.0).unwrap();
        prop_assert_eq!(full.samples, half.samples);
        prop_assert!((half.amplitude() * 2.0 - full.amplitude()).norm() <= 1e-9 * full.amplitude().norm().max(1e-12));
        prop_assert!((half.jz_shift * 4.0 - full.jz_shift).abs() <= 1e-9 * full.jz_shift.abs().max(1e-12));
    }
}
