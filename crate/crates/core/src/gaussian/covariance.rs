use crate::error::{Error, Result};
use crate::gaussian::OuParams;
use crate::matrix::{expm, one_norm, symmetrize, Matrix};

/// Solves B·X + X·Bᵀ + Q = 0 through the Kronecker system
/// (I ⊗ B + B ⊗ I)·vec X = −vec Q.
pub fn lyapunov_solve(b: &Matrix, q: &Matrix) -> Result<Matrix> {
    let d = b.nrows();
    let n = d * d;
    let mut k = Matrix::zeros(n, n);
    // Column-major vec: X[(i, j)] sits at index i + d·j.
    for j in 0..d {
        for i in 0..d {
            let row = i + d * j;
            for m in 0..d {
                k[(row, m + d * j)] += b[(i, m)];
                k[(row, i + d * m)] += b[(j, m)];
            }
        }
    }
    let rhs = -Matrix::from_column_slice(n, 1, q.as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular Lyapunov system".into()))?;
    Ok(symmetrize(&Matrix::from_column_slice(d, d, sol.as_slice())))
}

/// Below this value of t·‖B‖₁ the covariance comes from the block exponential;
/// above it from Q∞ − e^{tB} Q∞ e^{tBᵀ}, where the subtraction is benign.
const VAN_LOAN_CUTOFF: f64 = 1.0;

/// Q_t = ∫₀ᵗ e^{sB} Q e^{sBᵀ} ds, with t = +∞ giving Q∞.
pub fn covariance_at(params: &OuParams, t: f64) -> Result<Matrix> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if t.is_infinite() {
        return Ok(params.q_inf().clone());
    }
    let b = params.b();
    let d = params.dim();
    if t * one_norm(b) <= VAN_LOAN_CUTOFF {
        // exp(t[[B, Q], [0, −Bᵀ]]) = [[e^{tB}, F], [0, e^{−tBᵀ}]] with Q_t = F·e^{tBᵀ}.
        let mut m = Matrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&(b * t));
        m.view_mut((0, d), (d, d)).copy_from(&(params.q() * t));
        m.view_mut((d, d), (d, d)).copy_from(&(-b.transpose() * t));
        let e = expm(&m)?;
        let etb = e.view((0, 0), (d, d)).into_owned();
        let f = e.view((0, d), (d, d)).into_owned();
        Ok(symmetrize(&(f * etb.transpose())))
    } else {
        let etb = expm(&(b * t))?;
        let q_inf = params.q_inf();
        Ok(symmetrize(&(q_inf - &etb * q_inf * etb.transpose())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::rotation_generator;

    /// Composite Simpson rule on the defining integral.
    fn integral_oracle(p: &OuParams, t: f64, steps: usize) -> Matrix {
        let h = t / steps as f64;
        let f = |s: f64| {
            let e = expm(&(p.b() * s)).unwrap();
            &e * p.q() * e.transpose()
        };
        let mut acc = f(0.0) + f(t);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(k as f64 * h) * w;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn scalar_closed_form() {
        let p = OuParams::symmetric(1).unwrap();
        for t in [1e-6, 0.01, 0.5, 1.0, 3.0, 40.0] {
            let q = covariance_at(&p, t).unwrap()[(0, 0)];
            let exact = -(-2.0 * t).exp_m1() / 2.0;
            assert!((q - exact).abs() <= 1e-14 * exact.max(1e-300) + 1e-16, "t={t}");
        }
        assert!((covariance_at(&p, f64::INFINITY).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn block_case_is_isotropic() {
        let alpha = 0.8;
        let r = rotation_generator(&[1.3], 3).unwrap();
        let p = OuParams::block(alpha, r).unwrap();
        for t in [0.05, 0.7, 2.0, 9.0] {
            let q = covariance_at(&p, t).unwrap();
            let expected = Matrix::identity(3, 3) * (alpha * (1.0 - (-t / alpha).exp()));
            assert!((&q - &expected).norm() < 1e-12, "t={t}");
            assert!((&q - integral_oracle(&p, t, 4000)).norm() < 1e-9);
        }
    }

    #[test]
    fn lyapunov_residual_and_large_time_limit() {
        let q = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5]);
        let b = Matrix::from_row_slice(3, 3, &[-1.0, 0.7, 0.0, -0.4, -0.6, 0.3, 0.2, 0.0, -0.9]);
        let p = OuParams::new(q.clone(), b.clone()).unwrap();
        let qi = p.q_inf();
        assert!((&b * qi + qi * b.transpose() + &q).norm() < 1e-12);
        let far = integral_oracle(&p, 60.0, 6000);
        assert!((&far - qi).norm() < 1e-8);
    }

    #[test]
    fn matches_integral_oracle_on_both_branches() {
        let q = Matrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8]);
        let b = Matrix::from_row_slice(2, 2, &[-0.5, 2.0, -0.3, -0.7]);
        let p = OuParams::new(q, b).unwrap();
        for t in [0.01, 0.2, 0.36, 0.5, 1.5, 4.0] {
            let qt = covariance_at(&p, t).unwrap();
            let oracle = integral_oracle(&p, t, 2000);
            assert!((&qt - &oracle).norm() < 1e-10 * (1.0 + oracle.norm()), "t={t}");
        }
    }

    #[test]
    fn rejects_nonpositive_time() {
        let p = OuParams::symmetric(1).unwrap();
        assert!(matches!(covariance_at(&p, 0.0), Err(Error::Domain(_))));
        assert!(matches!(covariance_at(&p, -1.0), Err(Error::Domain(_))));
    }
}
