//! Dense complex linear algebra shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |H - H†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |U†U - 1|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Whether every off-diagonal entry is exactly zero.
pub fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// `exp(-i H t)` for Hermitian `H` through its eigendecomposition.
///
/// Only the lower triangle of `h` is read.
pub fn hermitian_exp(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    if is_diagonal(h) {
        return CMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|k| (-I * h[(k, k)].re * t).exp())));
    }
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = (-I * lambda * t).exp();
        for r in 0..n {
            scaled[(r, k)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Applies `exp(-i H t)` to the columns of `psi` with a Taylor series
/// summed to machine precision.
///
/// The interval is split so each sub-step has `‖H‖₁·t ≤ 1/2`; the result is
/// the exact exponential of `H` up to rounding, at the cost of a handful of
/// matrix products instead of a full eigendecomposition.
pub fn hermitian_exp_action(h: &CMatrix, t: f64, psi: &CMatrix) -> CMatrix {
    let norm1 = (0..h.ncols()).map(|j| h.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let substeps = ((norm1 * t.abs()) / 0.5).ceil().max(1.0) as usize;
    let tau = t / substeps as f64;
    let factor = -I * tau;
    let mut out = psi.clone();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=40 {
            term = (h * &term) * (factor / k as f64);
            acc += &term;
            let tn = term.norm();
            if tn <= 1e-17 * acc.norm() {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Overlap defect between two column blocks, insensitive to a common global
/// phase: `1 - |tr(A†B)|² / (‖A‖²‖B‖²)`.
pub fn overlap_defect(a: &CMatrix, b: &CMatrix) -> f64 {
    let inner = a.dotc(b);
    let na = a.norm_squared();
    let nb = b.norm_squared();
    (1.0 - inner.norm_sqr() / (na * nb)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hermitian(n: usize) -> CMatrix {
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = c(((i * 7 + j * 3) % 11) as f64 * 0.3 - 1.0, if i == j { 0.0 } else { ((i + 2 * j) % 5) as f64 * 0.2 });
                h[(i, j)] = v;
                h[(j, i)] = v.conj();
            }
        }
        h
    }

    #[test]
    fn eigen_and_taylor_exponentials_agree() {
        let h = sample_hermitian(6);
        let u = hermitian_exp(&h, 0.7);
        let psi = CMatrix::identity(6, 6);
        let v = hermitian_exp_action(&h, 0.7, &psi);
        assert!(max_abs(&(u.clone() - v)) < 1e-12);
        assert!(unitarity_defect(&u) < 1e-13);
    }

    #[test]
    fn exponential_group_property() {
        let h = sample_hermitian(5);
        let a = hermitian_exp(&h, 0.3);
        let b = hermitian_exp(&h, 0.5);
        let ab = hermitian_exp(&h, 0.8);
        assert!(max_abs(&(a * b - ab)) < 1e-12);
    }

    #[test]
    fn diagonal_shortcut_matches_phases() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0)]));
        let u = hermitian_exp(&h, 0.25);
        assert!((u[(0, 0)] - (-I * 0.25).exp()).norm() < 1e-15);
        assert!((u[(1, 1)] - (I * 0.5).exp()).norm() < 1e-15);
    }

    #[test]
    fn overlap_defect_ignores_global_phase() {
        let a = CMatrix::from_column_slice(2, 1, &[c(0.6, 0.0), c(0.0, 0.8)]);
        let b = a.map(|z| z * (I * 1.3).exp());
        assert!(overlap_defect(&a, &b) < 1e-15);
    }
}
