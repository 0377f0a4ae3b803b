use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::angular::spin_matrices;
use super::{cg, spin_from_f64, BasisTag, HalfInt, OperatorMatrix, SpinError, StateLabel};
use crate::linalg::{self, c, CMatrix};
use crate::units::BOHR_MAGNETON;

/// How much of the magnetic interaction a Zeeman Hamiltonian keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ZeemanMode {
    /// `P_F (μ_B g_J B·J) P_F` summed over F blocks; no hyperfine term, no
    /// nuclear Zeeman term.
    #[default]
    Projected,
    /// Hyperfine coupling plus the full vector Zeeman interaction.
    Full,
}

/// An `I ⊗ J` hyperfine manifold and its coupled basis.
#[derive(Clone, Debug)]
pub struct HyperfineSystem {
    nuclear_spin: HalfInt,
    electron_spin: HalfInt,
    hyperfine_constant: f64,
    g_j: f64,
    g_i: f64,
    basis: Vec<StateLabel>,
    coupling: CMatrix,
    electron: [CMatrix; 3],
    nuclear: [CMatrix; 3],
}

impl HyperfineSystem {
    /// `hyperfine_constant` is `A` in rad/μs, entering as `(A/2) I·J`.
    pub fn new(nuclear_spin: f64, electron_spin: f64, hyperfine_constant: f64, g_j: f64, g_i: f64) -> Result<Self, SpinError> {
        let i = spin_from_f64(nuclear_spin)?;
        let j = spin_from_f64(electron_spin)?;
        if !(hyperfine_constant.is_finite() && g_j.is_finite() && g_i.is_finite()) {
            return Err(SpinError::SpeciesTable("non-finite hyperfine parameter".into()));
        }
        let mut basis = Vec::new();
        let mut f = i + j;
        while f >= (i - j).abs() {
            basis.extend(f.projections().map(|m| StateLabel::new(f, m)));
            f = f - HalfInt::from_doubled(2);
        }
        let coupling = linalg::real_to_complex(&cg::coupling_matrix(i.value(), j.value())?);
        let [ix, iy, iz] = spin_matrices(i);
        let [jx, jy, jz] = spin_matrices(j);
        let ni = ix.nrows();
        let nj = jx.nrows();
        let one_i = CMatrix::identity(ni, ni);
        let one_j = CMatrix::identity(nj, nj);
        let to_coupled = |m: CMatrix| hermitian_part(&(&coupling * m * coupling.adjoint()));
        let electron =
            [to_coupled(linalg::kron(&one_i, &jx)), to_coupled(linalg::kron(&one_i, &jy)), to_coupled(linalg::kron(&one_i, &jz))];
        let nuclear =
            [to_coupled(linalg::kron(&ix, &one_j)), to_coupled(linalg::kron(&iy, &one_j)), to_coupled(linalg::kron(&iz, &one_j))];
        Ok(Self { nuclear_spin: i, electron_spin: j, hyperfine_constant, g_j, g_i, basis, coupling, electron, nuclear })
    }

    pub fn nuclear_spin(&self) -> HalfInt {
        self.nuclear_spin
    }

    pub fn electron_spin(&self) -> HalfInt {
        self.electron_spin
    }

    /// `A` in rad/μs.
    pub fn hyperfine_constant(&self) -> f64 {
        self.hyperfine_constant
    }

    pub fn g_j(&self) -> f64 {
        self.g_j
    }

    pub fn g_i(&self) -> f64 {
        self.g_i
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coupled basis labels, F descending then m descending.
    pub fn basis(&self) -> &[StateLabel] {
        &self.basis
    }

    pub fn index_of(&self, label: StateLabel) -> Result<usize, SpinError> {
        self.basis.iter().position(|&l| l == label).ok_or(SpinError::UnknownLabel(label))
    }

    /// F values, descending.
    pub fn f_values(&self) -> Vec<HalfInt> {
        let mut out: Vec<HalfInt> = Vec::new();
        for l in &self.basis {
            if out.last() != Some(&l.f) {
                out.push(l.f);
            }
        }
        out
    }

    /// Basis indices of an F block.
    pub fn block_range(&self, f: HalfInt) -> Result<Range<usize>, SpinError> {
        let start = self.basis.iter().position(|l| l.f == f).ok_or(SpinError::UnknownManifold(f))?;
        Ok(start..start + (f.doubled() + 1) as usize)
    }

    /// Projection coefficient `c_F` with `P_F J P_F = c_F F`.
    pub fn projection_factor(&self, f: HalfInt) -> f64 {
        let (ff, i, j) = (f.value(), self.nuclear_spin.value(), self.electron_spin.value());
        if ff == 0.0 {
            return 0.0;
        }
        (ff * (ff + 1.0) + j * (j + 1.0) - i * (i + 1.0)) / (2.0 * ff * (ff + 1.0))
    }

    /// Landé factor `g_F = g_J c_F` of the projected model.
    pub fn lande_g(&self, f: HalfInt) -> f64 {
        self.g_j * self.projection_factor(f)
    }

    /// `γ_F = g_F μ_B` in rad/(μs·G): the projected block Hamiltonian is `γ_F B·F`.
    pub fn gyromagnetic_ratio(&self, f: HalfInt) -> f64 {
        self.lande_g(f) * BOHR_MAGNETON
    }

    /// Change of basis, rows coupled and columns uncoupled.
    pub fn coupling_matrix(&self) -> &CMatrix {
        &self.coupling
    }

    pub fn electron_ops(&self) -> [OperatorMatrix; 3] {
        self.electron.clone().map(|m| OperatorMatrix::new(m, BasisTag::Coupled))
    }

    pub fn nuclear_ops(&self) -> [OperatorMatrix; 3] {
        self.nuclear.clone().map(|m| OperatorMatrix::new(m, BasisTag::Coupled))
    }

    /// `F = I + J`.
    pub fn total_ops(&self) -> [OperatorMatrix; 3] {
        [0, 1, 2].map(|k| OperatorMatrix::new(&self.electron[k] + &self.nuclear[k], BasisTag::Coupled))
    }

    pub fn to_coupled(&self, op: &OperatorMatrix) -> Result<OperatorMatrix, SpinError> {
        self.check_dim(op)?;
        Ok(OperatorMatrix::new(&self.coupling * &op.entries * self.coupling.adjoint(), BasisTag::Coupled))
    }

    pub fn to_uncoupled(&self, op: &OperatorMatrix) -> Result<OperatorMatrix, SpinError> {
        self.check_dim(op)?;
        Ok(OperatorMatrix::new(self.coupling.adjoint() * &op.entries * &self.coupling, BasisTag::Uncoupled))
    }

    fn check_dim(&self, op: &OperatorMatrix) -> Result<(), SpinError> {
        if op.dim() != self.dim() {
            return Err(SpinError::DimensionMismatch(self.dim(), op.dim()));
        }
        Ok(())
    }

    fn hyperfine_term(&self) -> CMatrix {
        let idotj = (0..3).fold(CMatrix::zeros(self.dim(), self.dim()), |acc, k| acc + &self.nuclear[k] * &self.electron[k]);
        hermitian_part(&idotj) * c(0.5 * self.hyperfine_constant, 0.0)
    }

    /// Zeroes entries between different F blocks.
    fn project(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for (r, lr) in self.basis.iter().enumerate() {
            for (col, lc) in self.basis.iter().enumerate() {
                if lr.f != lc.f {
                    out[(r, col)] = c(0.0, 0.0);
                }
            }
        }
        out
    }
}

/// `(M + M†)/2`, removing rounding asymmetry from basis changes.
/// Entries below 1e-14 of the largest are set to zero so that axial fields
/// give exactly diagonal matrices.
fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut h = (m + m.adjoint()) * c(0.5, 0.0);
    let floor = 1e-14 * linalg::max_abs(&h);
    for z in h.iter_mut() {
        if z.re.abs() < floor {
            z.re = 0.0;
        }
        if z.im.abs() < floor {
            z.im = 0.0;
        }
    }
    h
}

/// `(A/2) I·J + μ_B B₀ (g_J J_z + g_I I_z)` in the coupled basis.
pub fn hyperfine_hamiltonian(sys: &HyperfineSystem, b0: f64) -> OperatorMatrix {
    let zeeman = (&sys.electron[2] * c(sys.g_j, 0.0) + &sys.nuclear[2] * c(sys.g_i, 0.0)) * c(BOHR_MAGNETON * b0, 0.0);
    OperatorMatrix::new(sys.hyperfine_term() + zeeman, BasisTag::Coupled)
}

/// Zeeman Hamiltonian for a field vector in Gauss.
pub fn zeeman_hamiltonian(sys: &HyperfineSystem, b: [f64; 3], mode: ZeemanMode) -> OperatorMatrix {
    ZeemanModel::new(sys, mode).hamiltonian_operator(b)
}

/// `exp(-i φ F_y)` on the coupled basis.
pub fn rotation_about_y(sys: &HyperfineSystem, phi: f64) -> OperatorMatrix {
    let fy = &sys.electron[1] + &sys.nuclear[1];
    OperatorMatrix::new(linalg::hermitian_exp(&fy, phi), BasisTag::Coupled)
}

/// `exp(-i φ J_y)`, rotating the electron alone.
pub fn electron_rotation_about_y(sys: &HyperfineSystem, phi: f64) -> OperatorMatrix {
    OperatorMatrix::new(linalg::hermitian_exp(&sys.electron[1], phi), BasisTag::Coupled)
}

/// `(F_x cos φ + F_z sin φ, F_y, F_z cos φ − F_x sin φ)`, which is
/// `U† F U` with `U = exp(-i φ F_y)` whenever `F` is an angular-momentum triple.
pub fn rotate_operator(f: &[OperatorMatrix; 3], phi: f64) -> Result<[OperatorMatrix; 3], SpinError> {
    let n = f[0].dim();
    for op in &f[1..] {
        if op.dim() != n {
            return Err(SpinError::DimensionMismatch(n, op.dim()));
        }
    }
    let (s, co) = phi.sin_cos();
    let x = &f[0].entries * c(co, 0.0) + &f[2].entries * c(s, 0.0);
    let z = &f[2].entries * c(co, 0.0) - &f[0].entries * c(s, 0.0);
    let out = [OperatorMatrix::new(x, f[0].basis), f[1].clone(), OperatorMatrix::new(z, f[2].basis)];
    #[cfg(debug_assertions)]
    if is_angular_triple(f) {
        let u = OperatorMatrix::new(linalg::hermitian_exp(&f[1].entries, phi), f[1].basis);
        for (closed, op) in out.iter().zip(f) {
            let conj = op.conjugated_by(&u)?;
            debug_assert!(closed.max_abs_diff(&conj) < 1e-9, "rotated triple disagrees with conjugation");
        }
    }
    Ok(out)
}

#[cfg(debug_assertions)]
fn is_angular_triple(f: &[OperatorMatrix; 3]) -> bool {
    let comm = linalg::commutator(&f[0].entries, &f[1].entries);
    let scale = linalg::max_abs(&f[2].entries).max(1.0);
    linalg::max_abs(&(comm - &f[2].entries * linalg::I)) < 1e-10 * scale
}

/// Affine field-to-Hamiltonian map `H(B) = H₀ + Σ_k B_k G_k`, precomputed
/// for fast evaluation inside the propagator.
#[derive(Clone, Debug)]
pub struct ZeemanModel {
    mode: ZeemanMode,
    labels: Vec<StateLabel>,
    offset: CMatrix,
    gradient: [CMatrix; 3],
    total: [CMatrix; 3],
    gyromagnetic: Option<f64>,
    tag: BasisTag,
}

impl ZeemanModel {
    /// Model on the full coupled basis.
    pub fn new(sys: &HyperfineSystem, mode: ZeemanMode) -> Self {
        let n = sys.dim();
        let (offset, gradient) = match mode {
            ZeemanMode::Projected => {
                (CMatrix::zeros(n, n), [0, 1, 2].map(|k| sys.project(&sys.electron[k]) * c(BOHR_MAGNETON * sys.g_j, 0.0)))
            }
            ZeemanMode::Full => (
                sys.hyperfine_term(),
                [0, 1, 2]
                    .map(|k| (&sys.electron[k] * c(sys.g_j, 0.0) + &sys.nuclear[k] * c(sys.g_i, 0.0)) * c(BOHR_MAGNETON, 0.0)),
            ),
        };
        let total = [0, 1, 2].map(|k| &sys.electron[k] + &sys.nuclear[k]);
        let gyromagnetic = match (mode, sys.f_values().as_slice()) {
            (ZeemanMode::Projected, [f]) => Some(sys.gyromagnetic_ratio(*f)),
            _ => None,
        };
        Self { mode, labels: sys.basis.clone(), offset, gradient, total, gyromagnetic, tag: BasisTag::Coupled }
    }

    /// Projected model restricted to one F block (dimension `2F+1`).
    pub fn projected_block(sys: &HyperfineSystem, f: HalfInt) -> Result<Self, SpinError> {
        let r = sys.block_range(f)?;
        let len = r.len();
        let sub = |m: &CMatrix| m.view((r.start, r.start), (len, len)).into_owned();
        let gradient = [0, 1, 2].map(|k| sub(&sys.electron[k]) * c(BOHR_MAGNETON * sys.g_j, 0.0));
        let total = [0, 1, 2].map(|k| sub(&(&sys.electron[k] + &sys.nuclear[k])));
        Ok(Self {
            mode: ZeemanMode::Projected,
            labels: sys.basis[r].to_vec(),
            offset: CMatrix::zeros(len, len),
            gradient,
            total,
            gyromagnetic: Some(sys.gyromagnetic_ratio(f)),
            tag: BasisTag::CoupledBlocks,
        })
    }

    pub fn mode(&self) -> ZeemanMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn index_of(&self, label: StateLabel) -> Result<usize, SpinError> {
        self.labels.iter().position(|&l| l == label).ok_or(SpinError::UnknownLabel(label))
    }

    /// `γ` with `H = γ B·F`, available for single-block projected models.
    pub fn gyromagnetic_ratio(&self) -> Option<f64> {
        self.gyromagnetic
    }

    /// Total angular momentum operators on this model's basis.
    pub fn total_ops(&self) -> &[CMatrix; 3] {
        &self.total
    }

    /// `∂H/∂B_k` in rad/(μs·G).
    pub fn field_gradient(&self) -> &[CMatrix; 3] {
        &self.gradient
    }

    pub fn hamiltonian(&self, b: [f64; 3]) -> CMatrix {
        let mut h = self.offset.clone();
        for (k, &bk) in b.iter().enumerate() {
            if bk != 0.0 {
                h += &self.gradient[k] * c(bk, 0.0);
            }
        }
        h
    }

    pub fn hamiltonian_operator(&self, b: [f64; 3]) -> OperatorMatrix {
        OperatorMatrix::new(self.hamiltonian(b), self.tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, CVector};
    use crate::units::{ghz, ELECTRON_G_FACTOR};
    use std::f64::consts::PI;

    fn ba(g_i: f64) -> HyperfineSystem {
        HyperfineSystem::new(1.5, 0.5, ghz(8.037741667), ELECTRON_G_FACTOR, g_i).unwrap()
    }

    fn sorted_eigenvalues(h: &CMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Closed-form Breit–Rabi levels for J = 1/2.
    fn breit_rabi(i: f64, a: f64, g_j: f64, g_i: f64, b: f64) -> Vec<f64> {
        let de = 0.5 * a * (i + 0.5);
        let x = (g_j - g_i) * BOHR_MAGNETON * b / de;
        let mut out = Vec::new();
        let top = i + 0.5;
        let mut m = top;
        while m >= -top - 1e-9 {
            if (m.abs() - top).abs() < 1e-9 {
                let sign = m.signum();
                out.push(de * i / (2.0 * i + 1.0) + sign * 0.5 * (g_j + 2.0 * i * g_i) * BOHR_MAGNETON * b);
            } else {
                let base = -de / (2.0 * (2.0 * i + 1.0)) + g_i * BOHR_MAGNETON * m * b;
                let root = (1.0 + 4.0 * m * x / (2.0 * i + 1.0) + x * x).sqrt();
                out.push(base + 0.5 * de * root);
                out.push(base - 0.5 * de * root);
            }
            m -= 1.0;
        }
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn basis_layout() {
        let sys = ba(0.0);
        assert_eq!(sys.dim(), 8);
        assert_eq!(sys.basis()[0], StateLabel::fm(2, 2));
        assert_eq!(sys.basis()[5], StateLabel::fm(1, 1));
        assert_eq!(sys.block_range(HalfInt::from_doubled(2)).unwrap(), 5..8);
        assert_eq!(sys.f_values(), vec![HalfInt::from_doubled(4), HalfInt::from_doubled(2)]);
        assert!(sys.block_range(HalfInt::from_doubled(6)).is_err());
    }

    #[test]
    fn total_operators_are_standard_in_each_block() {
        let sys = ba(0.0);
        let f = sys.total_ops();
        for fv in sys.f_values() {
            let r = sys.block_range(fv).unwrap();
            let std = spin_matrices(fv);
            for k in 0..3 {
                let block = f[k].entries.view((r.start, r.start), (r.len(), r.len())).into_owned();
                assert!(max_abs(&(block - &std[k])) < 1e-12);
            }
        }
    }

    #[test]
    fn basis_change_round_trip() {
        let sys = ba(0.0);
        let h = hyperfine_hamiltonian(&sys, 3.0);
        let back = sys.to_coupled(&sys.to_uncoupled(&h).unwrap()).unwrap();
        assert!(back.max_abs_diff(&h) < 1e-12 * sys.hyperfine_constant());
    }

    #[test]
    fn zero_field_splitting_has_expected_degeneracies() {
        let sys = ba(-3.4e-4);
        let h = hyperfine_hamiltonian(&sys, 0.0);
        assert!(h.hermiticity_defect() < 1e-12);
        let e = sorted_eigenvalues(&h.entries);
        let a = sys.hyperfine_constant();
        for k in 0..3 {
            assert!((e[k] - e[0]).abs() < 1e-9 * a);
        }
        for k in 3..8 {
            assert!((e[k] - e[7]).abs() < 1e-9 * a);
        }
        assert!((e[7] - e[0] - a).abs() < 1e-9 * a);
    }

    #[test]
    fn eigenvalues_match_breit_rabi() {
        for g_i in [0.0, -3.4e-4] {
            let sys = ba(g_i);
            let a = sys.hyperfine_constant();
            for b in [0.0, 0.5, 10.0, 300.0, 2870.0, 1e4] {
                let ours = sorted_eigenvalues(&hyperfine_hamiltonian(&sys, b).entries);
                let oracle = breit_rabi(1.5, a, sys.g_j(), g_i, b);
                for (x, y) in ours.iter().zip(&oracle) {
                    assert!((x - y).abs() < 1e-9 * a, "B = {b}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn hamiltonian_commutes_with_total_fz() {
        let sys = ba(-3.4e-4);
        let fz = &sys.total_ops()[2];
        let h = hyperfine_hamiltonian(&sys, 7.0);
        assert!(max_abs(&h.commutator(fz).unwrap().entries) < 1e-12 * sys.hyperfine_constant());
    }

    #[test]
    fn projected_slopes_follow_lande_factors() {
        let sys = ba(0.0);
        let h = zeeman_hamiltonian(&sys, [0.0, 0.0, 1.0], ZeemanMode::Projected);
        assert!(linalg::is_diagonal(&h.entries));
        assert!((sys.lande_g(HalfInt::from_doubled(2)) + ELECTRON_G_FACTOR / 4.0).abs() < 1e-15);
        assert!((sys.lande_g(HalfInt::from_doubled(4)) - ELECTRON_G_FACTOR / 4.0).abs() < 1e-15);
        // Breit–Rabi tangent at B = 0 with g_I = 0: dE/dB = ±m g_J μ_B / (2I+1).
        for (k, l) in sys.basis().iter().enumerate() {
            let sign = if l.f == HalfInt::from_doubled(4) { 1.0 } else { -1.0 };
            let tangent = sign * l.m.value() * ELECTRON_G_FACTOR * BOHR_MAGNETON / 4.0;
            assert!((h.entries[(k, k)].re - tangent).abs() <= 1e-9 * tangent.abs().max(1.0));
        }
    }

    #[test]
    fn zero_field_gives_zero_matrix() {
        let sys = ba(0.0);
        let h = zeeman_hamiltonian(&sys, [0.0; 3], ZeemanMode::Projected);
        assert_eq!(max_abs(&h.entries), 0.0);
    }

    #[test]
    fn projected_model_is_block_diagonal() {
        let sys = ba(0.0);
        let h = zeeman_hamiltonian(&sys, [0.3, 0.0, -1.2], ZeemanMode::Projected);
        assert!(h.hermiticity_defect() < 1e-12);
        let mut p = CMatrix::zeros(8, 8);
        for k in 5..8 {
            p[(k, k)] = c(1.0, 0.0);
        }
        assert!(max_abs(&linalg::commutator(&h.entries, &p)) < 1e-12);
    }

    #[test]
    fn rotated_field_is_conjugated_hamiltonian() {
        let sys = ba(0.0);
        let b0 = 4.0;
        let diag = zeeman_hamiltonian(&sys, [0.0, 0.0, b0], ZeemanMode::Projected).entries;
        for phi in [0.3, PI / 2.0, 2.0] {
            let h = zeeman_hamiltonian(&sys, [b0 * phi.sin(), 0.0, b0 * phi.cos()], ZeemanMode::Projected).entries;
            let u = rotation_about_y(&sys, phi).entries;
            let conj = &u * diag.clone() * u.adjoint();
            assert!(max_abs(&(h - conj)) < 1e-12);
        }
    }

    #[test]
    fn rotation_basics() {
        let sys = ba(0.0);
        let id = CMatrix::identity(8, 8);
        assert!(max_abs(&(rotation_about_y(&sys, 0.0).entries - &id)) < 1e-15);
        let u = rotation_about_y(&sys, 0.4).entries * rotation_about_y(&sys, 0.9).entries;
        assert!(max_abs(&(u - rotation_about_y(&sys, 1.3).entries)) < 1e-12);
        assert!(rotation_about_y(&sys, 1.1).unitarity_defect() < 1e-12);
    }

    #[test]
    fn half_turn_reverses_projections_in_f1_block() {
        let sys = ba(0.0);
        let u = rotation_about_y(&sys, PI).entries;
        for (k, l) in sys.basis().iter().enumerate() {
            let target = sys.index_of(l.reversed()).unwrap();
            let mut psi = CVector::zeros(8);
            psi[k] = c(1.0, 0.0);
            let out = &u * psi;
            assert!((out[target].norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn electron_full_turn_is_minus_identity() {
        let sys = ba(0.0);
        let u = electron_rotation_about_y(&sys, 2.0 * PI);
        let tr: linalg::C64 = u.entries.trace();
        assert!((tr - c(-8.0, 0.0)).norm() < 1e-10);
        assert!((u.entries.determinant() - c(1.0, 0.0)).norm() < 1e-10);
        assert!(max_abs(&(u.entries + CMatrix::identity(8, 8))) < 1e-12);
        // Total F is integer here, so the full rotation returns to identity.
        let total = rotation_about_y(&sys, 2.0 * PI).entries;
        assert!(max_abs(&(total - CMatrix::identity(8, 8))) < 1e-12);
    }

    #[test]
    fn rotate_operator_matches_conjugation() {
        let sys = ba(0.0);
        let f = sys.total_ops();
        let same = rotate_operator(&f, 0.0).unwrap();
        for k in 0..3 {
            assert!(same[k].max_abs_diff(&f[k]) < 1e-15);
        }
        let flipped = rotate_operator(&f, PI).unwrap();
        assert!(flipped[0].max_abs_diff(&OperatorMatrix::new(-f[0].entries.clone(), BasisTag::Coupled)) < 1e-12);
        assert!(flipped[1].max_abs_diff(&f[1]) < 1e-15);
        assert!(flipped[2].max_abs_diff(&OperatorMatrix::new(-f[2].entries.clone(), BasisTag::Coupled)) < 1e-12);
        for phi in [PI / 2.0, 0.77] {
            let u = rotation_about_y(&sys, phi);
            let r = rotate_operator(&f, phi).unwrap();
            for k in 0..3 {
                assert!(r[k].max_abs_diff(&f[k].conjugated_by(&u).unwrap()) < 1e-12);
            }
        }
        let quarter = rotate_operator(&f, PI / 2.0).unwrap();
        assert!(quarter[0].max_abs_diff(&f[2]) < 1e-12);
        assert!(quarter[2].max_abs_diff(&OperatorMatrix::new(-f[0].entries.clone(), BasisTag::Coupled)) < 1e-12);
    }

    #[test]
    fn rotate_operator_rejects_mixed_dimensions() {
        let sys = ba(0.0);
        let [x, y, _] = sys.total_ops();
        let z = OperatorMatrix::new(CMatrix::zeros(3, 3), BasisTag::Coupled);
        assert!(rotate_operator(&[x, y, z], 0.1).is_err());
    }

    #[test]
    fn projected_block_matches_full_projected_model() {
        let sys = ba(0.0);
        let f1 = HalfInt::from_doubled(2);
        let block = ZeemanModel::projected_block(&sys, f1).unwrap();
        let full = ZeemanModel::new(&sys, ZeemanMode::Projected);
        let b = [0.4, 0.0, 0.9];
        let hb = block.hamiltonian(b);
        let hf = full.hamiltonian(b).view((5, 5), (3, 3)).into_owned();
        assert!(max_abs(&(hb.clone() - hf)) < 1e-14);
        let gamma = block.gyromagnetic_ratio().unwrap();
        let expect = (&block.total_ops()[0] * c(b[0], 0.0) + &block.total_ops()[2] * c(b[2], 0.0)) * c(gamma, 0.0);
        assert!(max_abs(&(hb - expect)) < 1e-12);
    }
}
