use super::{spin_from_f64, BasisTag, HalfInt, OperatorMatrix, SpinError};
use crate::linalg::{self, c, CMatrix};

/// Cartesian angular-momentum matrices for spin `j` in the `|j, m⟩` basis,
/// `m` descending.
pub fn angular_momentum_ops(j: f64) -> Result<[OperatorMatrix; 3], SpinError> {
    let j = spin_from_f64(j)?;
    let [x, y, z] = spin_matrices(j);
    let tag = BasisTag::Spin(j);
    Ok([OperatorMatrix::new(x, tag), OperatorMatrix::new(y, tag), OperatorMatrix::new(z, tag)])
}

/// `exp(-i φ J_y)` on the spin-`j` representation.
pub fn spin_rotation_y(j: f64, phi: f64) -> Result<OperatorMatrix, SpinError> {
    let j = spin_from_f64(j)?;
    let [_, y, _] = spin_matrices(j);
    Ok(OperatorMatrix::new(linalg::hermitian_exp(&y, phi), BasisTag::Spin(j)))
}

/// Ladder construction of (Jx, Jy, Jz).
pub(crate) fn spin_matrices(j: HalfInt) -> [CMatrix; 3] {
    let n = (j.doubled() + 1) as usize;
    let jj = j.value();
    let mut jz = CMatrix::zeros(n, n);
    let mut jp = CMatrix::zeros(n, n);
    for k in 0..n {
        let m = jj - k as f64;
        jz[(k, k)] = c(m, 0.0);
        if k > 0 {
            // ⟨m+1| J+ |m⟩
            jp[(k - 1, k)] = c((jj * (jj + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * c(0.5, 0.0);
    let jy = (&jp - &jm) * c(0.0, -0.5);
    [jx, jy, jz]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, I};

    #[test]
    fn spin_half_is_half_the_pauli_matrices() {
        let [x, y, z] = angular_momentum_ops(0.5).unwrap();
        assert_eq!(x.entries[(0, 1)], c(0.5, 0.0));
        assert_eq!(y.entries[(0, 1)], c(0.0, -0.5));
        assert_eq!(y.entries[(1, 0)], c(0.0, 0.5));
        assert_eq!(z.entries[(0, 0)], c(0.5, 0.0));
        assert_eq!(z.entries[(1, 1)], c(-0.5, 0.0));
    }

    #[test]
    fn spin_three_halves_eigenvalues() {
        let [_, _, z] = angular_momentum_ops(1.5).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| z.entries[(k, k)].re).collect();
        assert_eq!(diag, vec![1.5, 0.5, -0.5, -1.5]);
    }

    #[test]
    fn commutation_relations_hold() {
        for j in [0.0, 0.5, 1.0, 1.5, 2.0, 3.5] {
            let [x, y, z] = angular_momentum_ops(j).unwrap();
            let xy = x.commutator(&y).unwrap();
            assert!(max_abs(&(&xy.entries - &z.entries * I)) < 1e-12, "j = {j}");
            let yz = y.commutator(&z).unwrap();
            assert!(max_abs(&(&yz.entries - &x.entries * I)) < 1e-12);
            let casimir = &x.entries * &x.entries + &y.entries * &y.entries + &z.entries * &z.entries;
            let n = casimir.nrows();
            let expect = CMatrix::identity(n, n) * c(j * (j + 1.0), 0.0);
            assert!(max_abs(&(casimir - expect)) < 1e-12);
        }
    }

    #[test]
    fn rejects_malformed_spin() {
        assert_eq!(angular_momentum_ops(-0.5).unwrap_err(), SpinError::InvalidSpin(-0.5));
        assert!(angular_momentum_ops(0.3).is_err());
        assert!(angular_momentum_ops(f64::NAN).is_err());
    }

    #[test]
    fn full_turn_gives_fermion_sign() {
        for j in [0.5, 1.0, 1.5] {
            let u = spin_rotation_y(j, 2.0 * std::f64::consts::PI).unwrap();
            let n = u.dim();
            let sign = if (2.0 * j) as i32 % 2 == 1 { -1.0 } else { 1.0 };
            assert!(max_abs(&(u.entries - CMatrix::identity(n, n) * c(sign, 0.0))) < 1e-12);
        }
    }
}
