//! Reduction of an OU operator to Q = I with diagonal invariant covariance,
//! the normality test, and the splitting of normal operators into blocks
//! L(α_j, R_j) acting on the eigenspaces of D_λ.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::OuParams;
use crate::matrix::{symmetrize, Matrix, Vector};

/// Coordinates x ↦ Mx in which Q = I, Q∞ = D_λ and B̃ = −½D_λ⁻¹ + r.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub m: Matrix,
    /// Diagonal of D_λ in increasing order.
    pub d_lambda: Vec<f64>,
    pub r: Matrix,
    pub b_tilde: Matrix,
}

impl StandardForm {
    pub fn dim(&self) -> usize {
        self.d_lambda.len()
    }

    pub fn d_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(&self.d_lambda))
    }

    /// The operator in standard coordinates: Q = I, B = B̃.
    pub fn params(&self) -> Result<OuParams> {
        let d = self.dim();
        OuParams::new(Matrix::identity(d, d), self.b_tilde.clone())
    }

    /// Mx.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.m * Vector::from_column_slice(x)).iter().copied().collect()
    }

    /// ‖r·D_λ + D_λ·rᵀ‖_F, the residual of the structural identity r D_λ = −D_λ rᵀ.
    pub fn skew_residual(&self) -> f64 {
        let d = self.d_matrix();
        (&self.r * &d + &d * self.r.transpose()).norm()
    }
}

/// M₁ = L⁻¹ with Q = LLᵀ, M₂ = Vᵀ from M₁Q∞M₁ᵀ = VΛVᵀ, M = M₂M₁.
pub fn reduce_to_standard(params: &OuParams) -> Result<StandardForm> {
    let d = params.dim();
    let l = params
        .q()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("Q is not positive definite".into()))?
        .unpack();
    let m1 = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("Q is singular".into()))?;
    let s = symmetrize(&(&m1 * params.q_inf() * m1.transpose()));
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 1000 * d.max(10))
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let v = Matrix::from_columns(
        &order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect::<Vec<_>>(),
    );
    let d_lambda: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if d_lambda.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numeric("invariant covariance is not positive definite".into()));
    }
    let m = v.transpose() * &m1;
    let m_inv = &l * &v;
    let b_tilde = &m * params.b() * m_inv;
    let mut r = b_tilde.clone();
    for (i, &lam) in d_lambda.iter().enumerate() {
        r[(i, i)] += 0.5 / lam;
    }
    Ok(StandardForm {
        m,
        d_lambda,
        r,
        b_tilde,
    })
}

/// Outcome of [`is_normal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    /// ‖r + rᵀ‖_F.
    pub antisymmetry_defect: f64,
    /// ‖D_λ r − r D_λ‖_F.
    pub commutation_defect: f64,
    /// Size of the commutator of the symmetric and antisymmetric parts on quadratic monomials.
    pub commutator_defect: f64,
    /// ‖r D_λ + D_λ rᵀ‖_F, which must vanish for every operator.
    pub skew_residual: f64,
    pub tolerance: f64,
    /// r + rᵀ = 0 within tolerance.
    pub antisymmetric: bool,
    /// D_λ r = r D_λ within tolerance.
    pub commuting: bool,
    pub normal: bool,
}

/// Relative tolerance for the normality decision, scaled by ‖B̃‖_F.
pub const NORMALITY_TOL: f64 = 1e-8;

pub fn is_normal(params: &OuParams) -> Result<NormalityReport> {
    let form = reduce_to_standard(params)?;
    Ok(normality_of(&form))
}

/// Normality report for an already reduced operator.
pub fn normality_of(form: &StandardForm) -> NormalityReport {
    let d = form.d_matrix();
    let antisymmetry_defect = (&form.r + form.r.transpose()).norm();
    let commutation_defect = (&d * &form.r - &form.r * &d).norm();
    let commutator_defect = commutator_defect(&form.d_lambda, &form.r);
    let tolerance = NORMALITY_TOL * form.b_tilde.norm().max(1.0);
    let antisymmetric = antisymmetry_defect <= tolerance;
    let commuting = commutation_defect <= tolerance;
    NormalityReport {
        antisymmetry_defect,
        commutation_defect,
        commutator_defect,
        skew_residual: form.skew_residual(),
        tolerance,
        antisymmetric,
        commuting,
        normal: antisymmetric && commuting,
    }
}

/// Applies C = −Σ r_ab ∂_a∂_b + ½⟨(r D⁻¹ − D⁻¹ r)x, ∇⟩ to every monomial x_j x_k
/// (j ≤ k) and returns the largest |Cφ| over the lattice {−1, 0, 1}^d.
///
/// On polynomials c + Σ a_mn x_m x_n the lattice maximum is a norm, so the result
/// vanishes exactly when both the second-order and first-order parts of C do.
pub fn commutator_defect(d_lambda: &[f64], r: &Matrix) -> f64 {
    let d = d_lambda.len();
    assert_eq!(r.nrows(), d, "dimension mismatch between D_lambda and r");
    let k = Matrix::from_fn(d, d, |i, j| r[(i, j)] / d_lambda[j] - r[(i, j)] / d_lambda[i]);
    let points = 3usize.pow(d as u32);
    let mut x = Vector::zeros(d);
    let mut worst = 0.0f64;
    for code in 0..points {
        let mut rest = code;
        for i in 0..d {
            x[i] = (rest % 3) as f64 - 1.0;
            rest /= 3;
        }
        let kx = &k * &x;
        for j in 0..d {
            for l in j..d {
                let c = -(r[(j, l)] + r[(l, j)]);
                let v = c + 0.5 * (kx[j] * x[l] + kx[l] * x[j]);
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// One summand L(α, R_j) of a normal operator in standard coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingBlock {
    pub alpha: f64,
    /// R_j = 2α_j·r·P_j as a d×d matrix.
    pub r: Matrix,
    /// Orthogonal projector P_j onto the α_j-eigenspace of D_λ.
    pub projector: Matrix,
    /// Coordinates spanned by P_j.
    pub indices: Vec<usize>,
}

impl BuildingBlock {
    /// R_j restricted to its own coordinates.
    pub fn restricted_r(&self) -> Matrix {
        let n = self.indices.len();
        Matrix::from_fn(n, n, |a, b| self.r[(self.indices[a], self.indices[b])])
    }

    /// Parameters of L(α_j, R_j) on its own coordinates.
    pub fn params(&self) -> Result<OuParams> {
        OuParams::block(self.alpha, self.restricted_r())
    }

    /// Coordinates of x in this block.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingBlocks {
    pub blocks: Vec<BuildingBlock>,
}

impl BuildingBlocks {
    /// Σ_j (R_j − P_j)/(2α_j), which reproduces B̃.
    pub fn assembled_drift(&self) -> Matrix {
        let d = self.blocks[0].r.nrows();
        let mut acc = Matrix::zeros(d, d);
        for b in &self.blocks {
            acc += (&b.r - &b.projector) / (2.0 * b.alpha);
        }
        acc
    }
}

/// Relative gap below which two diagonal entries of D_λ count as one eigenvalue.
const EIGEN_CLUSTER_TOL: f64 = 1e-8;

/// Splits a normal operator by the distinct eigenvalues α_j of D_λ.
pub fn building_blocks(form: &StandardForm) -> Result<BuildingBlocks> {
    let report = normality_of(form);
    if !report.normal {
        return Err(Error::Precondition(format!(
            "operator is not normal (antisymmetry defect {:.3e}, commutation defect {:.3e})",
            report.antisymmetry_defect, report.commutation_defect
        )));
    }
    let d = form.dim();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &lam) in form.d_lambda.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|(a, _)| (lam - *a).abs() <= EIGEN_CLUSTER_TOL * a.abs())
        {
            Some((_, idx)) => idx.push(i),
            None => groups.push((lam, vec![i])),
        }
    }
    let blocks = groups
        .into_iter()
        .map(|(_, indices)| {
            let alpha = indices.iter().map(|&i| form.d_lambda[i]).sum::<f64>() / indices.len() as f64;
            let mut p = Matrix::zeros(d, d);
            for &i in &indices {
                p[(i, i)] = 1.0;
            }
            BuildingBlock {
                alpha,
                r: &form.r * &p * (2.0 * alpha),
                projector: p,
                indices,
            }
        })
        .collect();
    Ok(BuildingBlocks { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::rotation_generator;

    #[test]
    fn symmetric_standard_case() {
        let f = reduce_to_standard(&OuParams::symmetric(3).unwrap()).unwrap();
        assert!(f.d_lambda.iter().all(|&v| (v - 0.5).abs() < 1e-14));
        assert!(f.r.norm() < 1e-14);
        assert!((f.m.transpose() * &f.m - Matrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn rotation_case_keeps_rotation() {
        let p = OuParams::rotation(&[1.0], 2).unwrap();
        let f = reduce_to_standard(&p).unwrap();
        assert!(f.d_lambda.iter().all(|&v| (v - 0.5).abs() < 1e-14));
        assert!(f.skew_residual() < 1e-10);
        // r is orthogonally conjugate to R(1): skew with eigenvalues ±i.
        assert!((&f.r + f.r.transpose()).norm() < 1e-12);
        assert!((f.r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_form_invariants_for_general_params() {
        let q = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5]);
        let b = Matrix::from_row_slice(3, 3, &[-1.0, 0.7, 0.0, -0.4, -0.6, 0.3, 0.2, 0.0, -0.9]);
        let p = OuParams::new(q.clone(), b).unwrap();
        let f = reduce_to_standard(&p).unwrap();
        assert!((&f.m * &q * f.m.transpose() - Matrix::identity(3, 3)).norm() < 1e-12);
        assert!((&f.m * p.q_inf() * f.m.transpose() - f.d_matrix()).norm() < 1e-12);
        assert!(f.skew_residual() < 1e-12);
        assert!(f.r.trace().abs() < 1e-12);
    }

    #[test]
    fn normality_examples() {
        assert!(is_normal(&OuParams::symmetric(2).unwrap()).unwrap().normal);
        assert!(is_normal(&OuParams::rotation(&[1.0], 2).unwrap()).unwrap().normal);
        let jordan = OuParams::new(
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]),
        )
        .unwrap();
        let rep = is_normal(&jordan).unwrap();
        assert!(!rep.normal);
        assert!(rep.antisymmetry_defect > rep.tolerance);
        assert!(rep.commutator_defect > 1e-3);
    }

    #[test]
    fn commutator_defect_examples() {
        assert_eq!(commutator_defect(&[1.0, 2.0], &Matrix::zeros(2, 2)), 0.0);
        let r = rotation_generator(&[1.0], 4).unwrap();
        assert!(commutator_defect(&[1.0, 1.0, 3.0, 3.0], &r) < 1e-12);
        // On x₁x₂ the commutator is −(x₁² + x₂²)/4, whose lattice maximum is ½.
        let v = commutator_defect(&[1.0, 2.0], &rotation_generator(&[1.0], 2).unwrap());
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn blocks_of_isotropic_operator() {
        let r = rotation_generator(&[1.3], 2).unwrap();
        let form = StandardForm {
            m: Matrix::identity(2, 2),
            d_lambda: vec![0.7, 0.7],
            r: r.clone(),
            b_tilde: -Matrix::identity(2, 2) / 1.4 + &r,
        };
        let bb = building_blocks(&form).unwrap();
        assert_eq!(bb.blocks.len(), 1);
        assert!((&bb.blocks[0].r - &r * 1.4).norm() < 1e-14);
        assert_eq!(bb.blocks[0].projector, Matrix::identity(2, 2));
    }

    #[test]
    fn blocks_of_two_eigenvalues() {
        let r = rotation_generator(&[1.0, 2.0], 4).unwrap();
        let d = [1.0, 1.0, 2.0, 2.0];
        let mut b_tilde = r.clone();
        for i in 0..4 {
            b_tilde[(i, i)] -= 0.5 / d[i];
        }
        let form = StandardForm {
            m: Matrix::identity(4, 4),
            d_lambda: d.to_vec(),
            r: r.clone(),
            b_tilde: b_tilde.clone(),
        };
        let bb = building_blocks(&form).unwrap();
        assert_eq!(bb.blocks.len(), 2);
        assert_eq!(bb.blocks[0].alpha, 1.0);
        assert_eq!(bb.blocks[1].alpha, 2.0);
        assert_eq!(bb.blocks[1].indices, vec![2, 3]);
        let sum: Matrix = bb.blocks.iter().map(|b| b.projector.clone()).sum();
        assert_eq!(sum, Matrix::identity(4, 4));
        for b in &bb.blocks {
            assert!((&b.r * &b.projector - &b.projector * &b.r).norm() < 1e-14);
        }
        assert!((bb.assembled_drift() - b_tilde).norm() < 1e-14);
    }

    #[test]
    fn blocks_require_normality() {
        let jordan = OuParams::new(
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]),
        )
        .unwrap();
        let f = reduce_to_standard(&jordan).unwrap();
        assert!(matches!(building_blocks(&f), Err(Error::Precondition(_))));
    }
}
