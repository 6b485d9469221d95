use super::{Matrix, NumericsError};
use crate::scalar::Scalar;

/// Standard product `a * b`; the inner sum runs left to right over `k`.
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    if a.cols() != b.rows() {
        return Err(NumericsError::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, inner, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        let a_row = a.row(i);
        let out_row = &mut out[i * m..(i + 1) * m];
        for (j, slot) in out_row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (k, &a_ik) in a_row.iter().enumerate().take(inner) {
                acc = acc + a_ik * b.get(k, j);
            }
            *slot = acc;
        }
    }
    Ok(Matrix::from_raw(n, m, out))
}

fn check_symmetric<T: Scalar>(m: &Matrix<T>) -> Result<(), NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let tol = T::symmetry_tolerance() * m.max_abs().max(T::min_positive_value());
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            if (m.get(i, j) - m.get(j, i)).abs() > tol {
                return Err(NumericsError::NotSymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Lower-triangular `L` with `L * Lᵀ = m`. No pivoting.
pub fn cholesky<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            pivot = pivot - v * v;
        }
        if !(pivot > T::zero()) || !pivot.is_finite() {
            return Err(NumericsError::NotPositiveDefinite {
                pivot: j,
                value: pivot.to_f64_lossy(),
            });
        }
        let d = pivot.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// Layer Hessian `2·X·Xᵀ` for calibration inputs `x` (features × samples).
pub fn hessian_from_calibration<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let n = x.rows();
    let two = T::lit(2.0);
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        let xi = x.row(i);
        for j in 0..=i {
            let xj = x.row(j);
            let mut acc = T::zero();
            for (&a, &b) in xi.iter().zip(xj) {
                acc = acc + a * b;
            }
            h.set(i, j, two * acc);
            h.set(j, i, two * acc);
        }
    }
    h
}

/// `L * Lᵀ` for a lower-triangular factor.
pub fn reconstruct<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = T::zero();
            for k in 0..=j {
                acc = acc + l.get(i, k) * l.get(j, k);
            }
            out.set(i, j, acc);
            out.set(j, i, acc);
        }
    }
    out
}

/// `m + λI` with `λ = dampening * mean(diag(m))`. Returns the damped matrix and `λ`.
pub fn damped<T: Scalar>(m: &Matrix<T>, dampening: T) -> Result<(Matrix<T>, T), NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Ok((m.clone(), T::zero()));
    }
    let mean_diag = m.diag().into_iter().sum::<T>() / T::lit(n as f64);
    let lambda = dampening * mean_diag;
    let mut out = m.clone();
    for i in 0..n {
        out.set(i, i, out.get(i, i) + lambda);
    }
    Ok((out, lambda))
}

/// Inverse of a lower-triangular matrix by forward substitution.
fn invert_lower<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        inv.set(j, j, T::one() / l.get(j, j));
        for i in (j + 1)..n {
            let mut s = T::zero();
            for k in j..i {
                s = s + l.get(i, k) * inv.get(k, j);
            }
            inv.set(i, j, -s / l.get(i, i));
        }
    }
    inv
}

/// `(m + λI)⁻¹` with `λ = dampening * mean(diag(m))`, symmetrised.
pub fn invert_psd<T: Scalar>(m: &Matrix<T>, dampening: T) -> Result<Matrix<T>, NumericsError> {
    check_symmetric(m)?;
    let (damped, _) = damped(m, dampening)?;
    let l = cholesky(&damped).map_err(|e| NumericsError::Singular {
        dampening: dampening.to_f64_lossy(),
        source: Box::new(e),
    })?;
    let l_inv = invert_lower(&l);
    // (L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = T::zero();
            for k in i..n {
                acc = acc + l_inv.get(k, i) * l_inv.get(k, j);
            }
            out.set(i, j, acc);
            out.set(j, i, acc);
        }
    }
    if let Some(idx) = out.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(NumericsError::Singular {
            dampening: dampening.to_f64_lossy(),
            source: Box::new(NumericsError::NonFinite {
                row: idx / n,
                col: idx % n,
            }),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn rel_err(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.sub(b).unwrap().frobenius() / b.frobenius()
    }

    #[test]
    fn matmul_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        assert_eq!(
            matmul(&a, &Matrix::zeros(2, 3)).unwrap(),
            Matrix::zeros(2, 3)
        );
        let ones = m(&[&[1.0], &[1.0]]);
        assert_eq!(matmul(&a, &ones).unwrap(), m(&[&[3.0], &[7.0]]));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            matmul(&a, &a),
            Err(NumericsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(
            cholesky(&Matrix::<f64>::identity(3)).unwrap(),
            Matrix::identity(3)
        );
        assert_eq!(
            cholesky(&Matrix::diagonal(&[4.0, 9.0])).unwrap(),
            Matrix::diagonal(&[2.0, 3.0])
        );
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let l = cholesky(&a).unwrap();
        assert!(rel_err(&reconstruct(&l), &a) < 1e-12);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_names_failing_pivot() {
        let a = m(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match cholesky(&a) {
            Err(NumericsError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
        let neg = m(&[&[-1.0]]);
        assert!(matches!(
            cholesky(&neg),
            Err(NumericsError::NotPositiveDefinite { pivot: 0, .. })
        ));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = m(&[&[2.0, 1.0], &[0.0, 2.0]]);
        assert!(matches!(
            cholesky(&a),
            Err(NumericsError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn invert_psd_examples() {
        assert_eq!(
            invert_psd(&Matrix::<f64>::identity(3), 0.0).unwrap(),
            Matrix::identity(3)
        );
        let inv = invert_psd(&Matrix::diagonal(&[2.0, 4.0]), 0.0).unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), 0.5);
        assert_abs_diff_eq!(inv.get(1, 1), 0.25);
        assert_eq!(inv.get(0, 1), 0.0);
    }

    #[test]
    fn invert_psd_dampening_uses_mean_diagonal() {
        // mean diag of diag(2, 4) is 3, so λ = 0.3 at dampening 0.1
        let inv = invert_psd(&Matrix::diagonal(&[2.0, 4.0]), 0.1).unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), 1.0 / 2.3, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.get(1, 1), 1.0 / 4.3, epsilon = 1e-15);
    }

    #[test]
    fn invert_psd_fails_on_singular() {
        let a = Matrix::<f64>::zeros(2, 2);
        assert!(matches!(
            invert_psd(&a, 0.01),
            Err(NumericsError::Singular { .. })
        ));
        let rank1 = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(invert_psd(&rank1, 0.0).is_err());
        assert!(invert_psd(&rank1, 0.01).is_ok());
    }

    #[test]
    fn f32_path_works() {
        let a = Matrix::<f32>::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let inv = invert_psd(&a, 0.0).unwrap();
        let prod = matmul(&a, &inv).unwrap();
        assert!(prod.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-6);
    }
}
