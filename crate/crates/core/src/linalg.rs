//! Dense linear-algebra helpers shared by the model and reachability layers:
//! matrix exponential, zero-order-hold discretization, discrete Lyapunov
//! solves, and a few symmetric-matrix utilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrix exponential by scaling-and-squaring with a [13/13] Padé
/// approximant (Higham's coefficients).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    const THETA13: f64 = 5.371_920_351_148_152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64_764_752_532_480_000.0, 32_382_376_266_240_000.0, 7_771_770_303_897_600.0,
        1_187_353_796_428_800.0, 129_060_195_264_000.0, 10_559_470_521_600.0,
        670_442_572_800.0, 33_522_128_640.0, 1_323_241_920.0, 40_840_800.0,
        960_960.0, 16_380.0, 182.0, 1.0,
    ];

    let norm = a.iter().map(|v| v.abs()).fold(0.0_f64, f64::max) * n as f64;
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a = a / 2f64.powi(s as i32);

    let eye = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = &a
        * (&a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
            + B[7] * &a6
            + B[5] * &a4
            + B[3] * &a2
            + B[1] * &eye);
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &eye;

    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Exact zero-order-hold discretization of `xdot = A x + U w` over one
/// sample of length `ts`, computed jointly through the augmented block
/// exponential `exp([[A, U], [0, 0]] ts)`. Returns `(A_d, U_d)` with
/// `A_d = e^{A ts}` and `U_d = \int_0^{ts} e^{A s} U ds`.
pub fn zoh(a: &DMatrix<f64>, u: &DMatrix<f64>, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = u.ncols();
    assert_eq!(u.nrows(), n, "input matrix row count must match the state");
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(u);
    let e = expm(&(aug * ts));
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Spectral radius via the real Schur form.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .schur()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Solve the discrete Lyapunov equation `X = A X A' + Q` by Kronecker
/// vectorization. Sized for the small (<= 10-state) systems in this crate.
pub fn dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(q.nrows(), n);
    assert_eq!(q.ncols(), n);
    let mut m = DMatrix::<f64>::identity(n * n, n * n);
    // M = I - A (x) A, column-major vec convention: vec(AXA') = (A (x) A) vec(X)
    for bi in 0..n {
        for bj in 0..n {
            let scale = a[(bj, bi)]; // kron(A, A)[block (bj_block=?..)] under vec(X)
            for ri in 0..n {
                for rj in 0..n {
                    m[(bj * n + rj, bi * n + ri)] -= scale * a[(rj, ri)];
                }
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, q.iter().copied());
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("discrete Lyapunov solve is singular".into()))?;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = x[j * n + i];
        }
    }
    // symmetrize away round-off
    Ok((&out + out.transpose()) * 0.5)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig_sym(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky
/// factor. Errors instead of panicking when the matrix is not PD.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NumericalFailure("matrix is not positive definite".into()))
}

/// Upper-triangular factor `R` with `A = R' R` for symmetric positive
/// definite `A`.
pub fn chol_upper(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let l = sym
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("Cholesky of a non-PD matrix".into()))?;
    Ok(l.l().transpose())
}

/// Symmetric inverse square root `A^{-1/2}` of a positive-definite matrix.
pub fn inv_sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut d = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    for (i, ev) in eig.eigenvalues.iter().enumerate() {
        if *ev <= 0.0 {
            return Err(Error::NumericalFailure(
                "inverse square root of a non-PD matrix".into(),
            ));
        }
        d[(i, i)] = 1.0 / ev.sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Truncated Taylor series, the independent oracle for `expm`.
    fn taylor_expm(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let mut sum = DMatrix::<f64>::identity(n, n);
        let mut term = DMatrix::<f64>::identity(n, n);
        for k in 1..=terms {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let e = expm(&z);
        assert_abs_diff_eq!(e, DMatrix::identity(4, 4), epsilon = 1e-15);
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, -1.0, -0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -10.0, 10.0, 0.4, -1.4, -0.7,
                -2.0,
            ],
        ) * 0.1;
        let e = expm(&a);
        let t = taylor_expm(&a, 30);
        assert_abs_diff_eq!(e, t, epsilon = 1e-12);
    }

    #[test]
    fn expm_semigroup() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, -0.2, -0.5]);
        let e1 = expm(&(&a * 0.1));
        let e2 = expm(&(&a * 0.05));
        assert_abs_diff_eq!(e1, &e2 * &e2, epsilon = 1e-13);
    }

    #[test]
    fn zoh_of_zero_dynamics_integrates_input() {
        let a = DMatrix::<f64>::zeros(3, 3);
        let u = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (ad, ud) = zoh(&a, &u, 0.1);
        assert_abs_diff_eq!(ad, DMatrix::identity(3, 3), epsilon = 1e-14);
        assert_abs_diff_eq!(ud, &u * 0.1, epsilon = 1e-14);
    }

    #[test]
    fn dlyap_solves_scalar_case() {
        // x = a^2 x + q  =>  x = q / (1 - a^2)
        let a = DMatrix::from_row_slice(1, 1, &[0.5]);
        let q = DMatrix::from_row_slice(1, 1, &[1.0]);
        let x = dlyap(&a, &q).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0 / 0.75, epsilon = 1e-12);
    }

    #[test]
    fn dlyap_residual_vanishes() {
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, -0.2, 0.6, 0.1, 0.0, 0.3, 0.4]);
        let q = {
            let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 1.5]);
            m
        };
        let x = dlyap(&a, &q).unwrap();
        let resid = &x - &a * &x * a.transpose() - &q;
        assert!(resid.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, -0.9]);
        assert_abs_diff_eq!(spectral_radius(&a), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_roundtrip() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = inv_sqrt_spd(&a).unwrap();
        let should_be_inv = &s * &s;
        let prod = &a * should_be_inv;
        assert_abs_diff_eq!(prod, DMatrix::identity(2, 2), epsilon = 1e-12);
    }
}
