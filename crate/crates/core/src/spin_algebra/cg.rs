//! Clebsch–Gordan coefficients from the ladder recursion.
//!
//! For each total `F` the highest-weight state `|F, F⟩` is fixed by
//! `J₊|F, F⟩ = 0` (a two-term recursion in `m₁`), normalised, and given the
//! Condon–Shortley sign `⟨j₁ j₁; j₂ F−j₁ | F F⟩ > 0`. Lower states follow
//! from `J₋`, which ties three coefficients together:
//!
//! `√((F+M)(F−M+1)) C(m₁,m₂;M−1) = √((j₁+m₁+1)(j₁−m₁)) C(m₁+1,m₂;M)
//!                                 + √((j₂+m₂+1)(j₂−m₂)) C(m₁,m₂+1;M)`

use nalgebra::DMatrix;

use super::{spin_from_f64, HalfInt, SpinError};

/// `√((j − m)(j + m + 1))`, the `J₊` matrix element from `m` (values, not doubled).
fn raise(j: f64, m: f64) -> f64 {
    ((j - m) * (j + m + 1.0)).max(0.0).sqrt()
}

/// `√((j + m)(j − m + 1))`, the `J₋` matrix element from `m`.
fn lower(j: f64, m: f64) -> f64 {
    ((j + m) * (j - m + 1.0)).max(0.0).sqrt()
}

/// Coefficients of one `F` multiplet: `table[M index][m₁ index]`, both indices
/// running over descending projections.
fn multiplet(j1: HalfInt, j2: HalfInt, f: HalfInt) -> Vec<Vec<f64>> {
    let (a, b, ff) = (j1.value(), j2.value(), f.value());
    let n1 = (j1.doubled() + 1) as usize;
    let nf = (f.doubled() + 1) as usize;
    let idx1 = |m1: f64| (a - m1).round() as usize;
    let mut table = vec![vec![0.0; n1]; nf];

    // Highest weight: m₁ from max(−j₁, F−j₂) up to j₁.
    let lo = (-a).max(ff - b);
    let count = (a - lo).round() as usize + 1;
    let mut top = vec![0.0; count];
    top[0] = 1.0;
    for k in 0..count - 1 {
        let mu = lo + k as f64;
        let m2_next = ff - mu - 1.0;
        top[k + 1] = -top[k] * raise(a, mu) / raise(b, m2_next);
    }
    let norm = top.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if top[count - 1] < 0.0 { -1.0 } else { 1.0 };
    for (k, v) in top.iter().enumerate() {
        table[0][idx1(lo + k as f64)] = sign * v / norm;
    }

    for mi in 1..nf {
        let big_m = ff - mi as f64 + 1.0; // the M being lowered from
        let denom = lower(ff, big_m);
        for i1 in 0..n1 {
            let m1 = a - i1 as f64;
            let m2 = big_m - 1.0 - m1;
            if m2.abs() > b + 1e-9 {
                continue;
            }
            let mut acc = 0.0;
            if i1 > 0 {
                acc += table[mi - 1][i1 - 1] * lower(a, m1 + 1.0);
            }
            if m2 + 1.0 <= b + 1e-9 {
                acc += table[mi - 1][i1] * lower(b, m2 + 1.0);
            }
            table[mi][i1] = acc / denom;
        }
    }
    table
}

fn triangle(j1: HalfInt, j2: HalfInt, f: HalfInt) -> bool {
    f >= (j1 - j2).abs() && f <= j1 + j2 && (j1 + j2 - f).is_integer()
}

/// `⟨j₁ m₁; j₂ m₂ | F M⟩` in the Condon–Shortley convention.
pub fn clebsch_gordan(j1: f64, j2: f64, m1: f64, m2: f64, f: f64, mf: f64) -> Result<f64, SpinError> {
    let (j1, j2, f) = (spin_from_f64(j1)?, spin_from_f64(j2)?, spin_from_f64(f)?);
    let proj = |j: HalfInt, m: f64| -> Result<HalfInt, SpinError> {
        let m = HalfInt::try_from_f64(m).ok_or(SpinError::InvalidProjection(m))?;
        if m.abs() > j || !(j - m).is_integer() {
            return Err(SpinError::ProjectionOutOfRange { j, m });
        }
        Ok(m)
    };
    let (m1, m2, mf) = (proj(j1, m1)?, proj(j2, m2)?, proj(f, mf)?);
    if m1 + m2 != mf || !triangle(j1, j2, f) {
        return Ok(0.0);
    }
    let table = multiplet(j1, j2, f);
    let mi = ((f - mf).doubled() / 2) as usize;
    let i1 = ((j1 - m1).doubled() / 2) as usize;
    Ok(table[mi][i1])
}

/// Full change-of-basis matrix: rows are coupled states `|F, M⟩` (F
/// descending, M descending), columns are product states `|m₁, m₂⟩` (m₁ slow,
/// both descending). Real orthogonal.
pub fn coupling_matrix(j1: f64, j2: f64) -> Result<DMatrix<f64>, SpinError> {
    let (j1, j2) = (spin_from_f64(j1)?, spin_from_f64(j2)?);
    let n1 = (j1.doubled() + 1) as usize;
    let n2 = (j2.doubled() + 1) as usize;
    let n = n1 * n2;
    let mut out = DMatrix::zeros(n, n);
    let mut row = 0;
    let mut f = j1 + j2;
    while f >= (j1 - j2).abs() {
        let table = multiplet(j1, j2, f);
        for (mi, coeffs) in table.iter().enumerate() {
            let big_m = f.value() - mi as f64;
            for (i1, &v) in coeffs.iter().enumerate() {
                let m1 = j1.value() - i1 as f64;
                let m2 = big_m - m1;
                if m2.abs() > j2.value() + 1e-9 {
                    continue;
                }
                let i2 = (j2.value() - m2).round() as usize;
                out[(row, i1 * n2 + i2)] = v;
            }
            row += 1;
        }
        f = f - HalfInt::from_doubled(2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: f64) -> f64 {
        let n = n.round() as i64;
        (1..=n).fold(1.0, |acc, k| acc * k as f64)
    }

    /// Racah's closed-form sum, kept independent of the recursion above.
    fn racah(j1: f64, j2: f64, m1: f64, m2: f64, j: f64, m: f64) -> f64 {
        if (m1 + m2 - m).abs() > 1e-9 {
            return 0.0;
        }
        let pre = ((2.0 * j + 1.0) * factorial(j + j1 - j2) * factorial(j - j1 + j2) * factorial(j1 + j2 - j)
            / factorial(j1 + j2 + j + 1.0))
        .sqrt()
            * (factorial(j + m)
                * factorial(j - m)
                * factorial(j1 - m1)
                * factorial(j1 + m1)
                * factorial(j2 - m2)
                * factorial(j2 + m2))
            .sqrt();
        let mut sum = 0.0;
        for k in 0..=((j1 + j2 + j) as i64 + 1) {
            let k = k as f64;
            let args = [k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k];
            if args.iter().any(|&x| x < -1e-9) {
                continue;
            }
            let den: f64 = args.iter().map(|&x| factorial(x)).product();
            sum += if (k as i64) % 2 == 0 { 1.0 } else { -1.0 } / den;
        }
        pre * sum
    }

    #[test]
    fn stretched_state_is_one() {
        assert!((clebsch_gordan(1.5, 0.5, 1.5, 0.5, 2.0, 2.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singlet_has_inverse_root_two_magnitude() {
        let v = clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0.0, 0.0).unwrap();
        assert!((v.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!(v > 0.0);
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(clebsch_gordan(1.5, 0.5, 0.5, 0.5, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(clebsch_gordan(1.0, 1.0, 0.0, 0.0, 3.0, 0.0).unwrap(), 0.0);
        assert!(clebsch_gordan(0.5, 0.5, 1.5, 0.0, 1.0, 0.0).is_err());
        assert!(clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn recursion_matches_racah_formula() {
        for &(j1, j2) in &[(1.5f64, 0.5f64), (0.5, 0.5), (1.0, 1.0), (2.5, 1.5), (3.5, 0.5), (2.0, 1.5)] {
            let mut f = j1 + j2;
            while f >= (j1 - j2).abs() - 1e-9 {
                let mut mf = f;
                while mf >= -f - 1e-9 {
                    let mut m1 = j1;
                    while m1 >= -j1 - 1e-9 {
                        let m2 = mf - m1;
                        if m2.abs() <= j2 + 1e-9 {
                            let ours = clebsch_gordan(j1, j2, m1, m2, f, mf).unwrap();
                            let oracle = racah(j1, j2, m1, m2, f, mf);
                            assert!((ours - oracle).abs() < 1e-12, "{j1} {j2} {m1} {m2} {f} {mf}: {ours} vs {oracle}");
                        }
                        m1 -= 1.0;
                    }
                    mf -= 1.0;
                }
                f -= 1.0;
            }
        }
    }

    #[test]
    fn coupling_matrix_is_orthogonal() {
        for &(j1, j2) in &[(1.5, 0.5), (3.5, 0.5), (1.0, 1.0), (2.5, 1.5)] {
            let c = coupling_matrix(j1, j2).unwrap();
            let n = c.nrows();
            let err = (&c * c.transpose() - DMatrix::<f64>::identity(n, n)).abs().max();
            assert!(err < 1e-12, "rows not orthonormal for {j1}⊗{j2}: {err}");
            let err = (c.transpose() * &c - DMatrix::<f64>::identity(n, n)).abs().max();
            assert!(err < 1e-12);
        }
    }
}
