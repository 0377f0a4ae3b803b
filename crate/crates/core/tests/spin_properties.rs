use proptest::prelude::*;

use pdd_core::linalg::{c, hermiticity_defect, max_abs, CMatrix};
use pdd_core::spin_algebra::{
    angular_momentum_ops, hyperfine_hamiltonian, rotation_about_y, zeeman_hamiltonian, HalfInt, HyperfineSystem, ZeemanMode,
    ZeemanModel,
};

fn system(two_i: i32, a: f64, g_i: f64) -> HyperfineSystem {
    HyperfineSystem::new(two_i as f64 / 2.0, 0.5, a, 2.0023193, g_i).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn angular_momentum_algebra(two_j in 1i32..=9) {
        let j = two_j as f64 / 2.0;
        let [jx, jy, jz] = angular_momentum_ops(j).unwrap();
        let comm = &jx.entries * &jy.entries - &jy.entries * &jx.entries;
        prop_assert!(max_abs(&(comm - &jz.entries * c(0.0, 1.0))) < 1e-12);
        let casimir = &jx.entries * &jx.entries + &jy.entries * &jy.entries + &jz.entries * &jz.entries;
        let n = jz.dim();
        prop_assert!(max_abs(&(casimir - CMatrix::identity(n, n) * c(j * (j + 1.0), 0.0))) < 1e-11);
        for op in [&jx, &jy, &jz] {
            prop_assert!(op.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn hamiltonians_are_hermitian(
        two_i in 1i32..=7,
        a in 1.0f64..80.0,
        g_i in -1e-3f64..1e-3,
        bx in -20.0f64..20.0,
        by in -20.0f64..20.0,
        bz in -20.0f64..20.0,
    ) {
        let sys = system(two_i, a, g_i);
        prop_assert_eq!(sys.dim(), ((two_i + 1) * 2) as usize);
        prop_assert!(hermiticity_defect(&hyperfine_hamiltonian(&sys, bz).entries) < 1e-12);
        for mode in [ZeemanMode::Full, ZeemanMode::Projected] {
            let h = zeeman_hamiltonian(&sys, [bx, by, bz], mode);
            prop_assert!(h.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn basis_change_round_trip(two_i in 1i32..=7, k in 0usize..3) {
        let sys = system(two_i, 50.0, 0.0);
        let op = &sys.total_ops()[k];
        let back = sys.to_coupled(&sys.to_uncoupled(op).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(op) < 1e-12);
    }

    #[test]
    fn rotations_compose(two_i in 1i32..=5, p1 in -7.0f64..7.0, p2 in -7.0f64..7.0) {
        let sys = system(two_i, 50.0, 0.0);
        let u1 = rotation_about_y(&sys, p1);
        let u2 = rotation_about_y(&sys, p2);
        prop_assert!(u1.unitarity_defect() < 1e-12);
        let prod = &u1.entries * &u2.entries;
        prop_assert!(max_abs(&(prod - rotation_about_y(&sys, p1 + p2).entries)) < 1e-12);
        prop_assert!(max_abs(&(rotation_about_y(&sys, 0.0).entries - CMatrix::identity(sys.dim(), sys.dim()))) < 1e-14);
    }

    #[test]
    fn projected_hamiltonian_commutes_with_block_projector(
        bx in -10.0f64..10.0,
        bz in -10.0f64..10.0,
    ) {
        let sys = HyperfineSystem::barium_137();
        let h = zeeman_hamiltonian(&sys, [bx, 0.0, bz], ZeemanMode::Projected).entries;
        let upper = sys.block_range(HalfInt::from_doubled(4)).unwrap();
        let mut p = CMatrix::zeros(sys.dim(), sys.dim());
        for i in upper {
            p[(i, i)] = c(1.0, 0.0);
        }
        prop_assert!(max_abs(&(&h * &p - &p * &h)) < 1e-12);
    }

    #[test]
    fn block_model_is_linear_in_field(
        b1 in prop::array::uniform3(-5.0f64..5.0),
        b2 in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let sys = HyperfineSystem::barium_137();
        let m = ZeemanModel::projected_block(&sys, HalfInt::from_doubled(2)).unwrap();
        let sum = [b1[0] + b2[0], b1[1] + b2[1], b1[2] + b2[2]];
        let lhs = m.hamiltonian(sum);
        let rhs = m.hamiltonian(b1) + m.hamiltonian(b2);
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-11);
    }
}
