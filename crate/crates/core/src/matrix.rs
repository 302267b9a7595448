//! Dense linear algebra: the matrix exponential, Hurwitz spectra and the
//! canonical block form of skew-symmetric matrices.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Relative tolerance for reconstructions from decompositions.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Checks that `a` is square with finite entries and returns its dimension.
pub fn ensure_square_finite(a: &Matrix, name: &str) -> Result<usize> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "{name} must be a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(a.nrows())
}

/// Builds a matrix from row vectors, rejecting ragged input.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::InvalidInput(format!(
            "row {i} has {} entries, expected {m}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Row-major nested vectors, the serialized form of a matrix.
pub fn to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().copied().collect())
        .collect()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Symmetric part (A + Aᵀ)/2.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Returns true when ‖A + Aᵀ‖_F ≤ tol·(1 + ‖A‖_F).
pub fn is_skew(a: &Matrix, tol: f64) -> bool {
    a.is_square() && (a + a.transpose()).norm() <= tol * (1.0 + a.norm())
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// 1-norm bounds below which the degree-m approximant is accurate to unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé approximants.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = ensure_square_finite(a, "expm argument")?;
    let norm = one_norm(a);
    if norm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    let a2 = a * a;
    let low: [(&[f64], f64); 4] = [
        (&PADE3, THETA3),
        (&PADE5, THETA5),
        (&PADE7, THETA7),
        (&PADE9, THETA9),
    ];
    for (coeffs, theta) in low {
        if norm <= theta {
            let (u, v) = pade_low(a, &a2, coeffs);
            return pade_solve(&u, &v);
        }
    }

    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scale = 2f64.powi(-s);
    let a = a * scale;
    let a2 = a2 * (scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let id = Matrix::identity(n, n);
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &Matrix, a2: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let mut pow = Matrix::identity(n, n);
    let mut u_inner = &pow * b[1];
    let mut v = &pow * b[0];
    for k in 1..b.len() / 2 {
        pow = &pow * a2;
        v += &pow * b[2 * k];
        u_inner += &pow * b[2 * k + 1];
    }
    (a * u_inner, v)
}

fn pade_solve(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Numeric("singular Padé denominator in expm".into()))
}

/// Outcome of [`hurwitz_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCheck {
    pub hurwitz: bool,
    /// Largest real part over the spectrum, snapped to 0 when within roundoff of it.
    pub abscissa: f64,
}

/// Decides whether every eigenvalue of `b` has negative real part.
pub fn hurwitz_check(b: &Matrix) -> Result<SpectralCheck> {
    let n = ensure_square_finite(b, "drift")?;
    let schur = Schur::try_new(b.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let abscissa = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + b.norm());
    let abscissa = if abscissa.abs() <= tol { 0.0 } else { abscissa };
    Ok(SpectralCheck {
        hurwitz: abscissa < 0.0,
        abscissa,
    })
}

/// Block-diagonal generator R(Θ): 2×2 blocks [[0, θ], [−θ, 0]], zero padding for the rest.
pub fn rotation_generator(theta: &[f64], dim: usize) -> Result<Matrix> {
    if 2 * theta.len() > dim {
        return Err(Error::InvalidInput(format!(
            "{} rotation speeds do not fit in dimension {dim}",
            theta.len()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("rotation speeds must be finite".into()));
    }
    let mut r = Matrix::zeros(dim, dim);
    for (j, &th) in theta.iter().enumerate() {
        r[(2 * j, 2 * j + 1)] = th;
        r[(2 * j + 1, 2 * j)] = -th;
    }
    Ok(r)
}

/// Orthogonal reduction R = g·R(Θ)·gᵀ of a skew-symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub g: Matrix,
    /// floor(d/2) nonnegative speeds, nonzero ones first in decreasing order.
    pub theta: Vec<f64>,
}

impl CanonicalForm {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// R(Θ) in the dimension of `g`.
    pub fn block(&self) -> Matrix {
        rotation_generator(&self.theta, self.dim()).expect("theta fits by construction")
    }

    /// g·R(Θ)·gᵀ.
    pub fn reconstruct(&self) -> Matrix {
        &self.g * self.block() * self.g.transpose()
    }

    /// Coordinates gᵀx in which the operator takes block form.
    pub fn to_block_coords(&self, x: &[f64]) -> Vec<f64> {
        (self.g.transpose() * Vector::from_column_slice(x))
            .iter()
            .copied()
            .collect()
    }
}

/// Computes (g, Θ) with R = g·R(Θ)·gᵀ from the eigenvectors of −R².
pub fn skew_canonical_form(r: &Matrix) -> Result<CanonicalForm> {
    let d = ensure_square_finite(r, "skew matrix")?;
    if !is_skew(r, ALGEBRAIC_TOL) {
        return Err(Error::InvalidInput(
            "matrix is not skew-symmetric within tolerance".into(),
        ));
    }
    let r = (r - r.transpose()) * 0.5;
    let neg_sq = symmetrize(&-(&r * &r));
    let eig = SymmetricEigen::try_new(neg_sq, f64::EPSILON, 1000 * d.max(10))
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let cluster_tol = 1e-8 * lambda_max.max(f64::MIN_POSITIVE);
    let zero_tol = 1e-10 * (1.0 + lambda_max);

    let mut basis: Vec<Vector> = Vec::with_capacity(d);
    let mut theta = Vec::with_capacity(d / 2);
    let mut pos = 0;
    while pos < d {
        let lead = eig.eigenvalues[order[pos]];
        if lead <= zero_tol {
            break;
        }
        let mut end = pos + 1;
        while end < d && lead - eig.eigenvalues[order[end]] <= cluster_tol {
            end += 1;
        }
        // The eigenspace of one θ² has even dimension; pair it into invariant planes.
        let mut cluster: Vec<Vector> = order[pos..end]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let planes = cluster.len() / 2;
        for _ in 0..planes {
            let (idx, u) = cluster
                .iter()
                .enumerate()
                .map(|(i, v)| (i, project_out(v, &basis)))
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .expect("cluster non-empty");
            cluster.swap_remove(idx);
            let u = u.normalize();
            let ru = &r * &u;
            let th = ru.norm();
            let w = project_out(&(-&ru / th), &basis);
            let w = project_out(&w, std::slice::from_ref(&u)).normalize();
            theta.push(u.dot(&(&r * &w)).abs());
            basis.push(u);
            basis.push(w);
        }
        pos = end;
    }

    // Complete the basis with the kernel of R.
    for k in 0..d {
        if basis.len() == d {
            break;
        }
        let mut e = Vector::zeros(d);
        e[k] = 1.0;
        let v = project_out(&project_out(&e, &basis), &basis);
        if v.norm() > 1e-6 {
            basis.push(v.normalize());
        }
    }
    if basis.len() != d {
        return Err(Error::Numeric("failed to complete orthonormal basis".into()));
    }
    theta.resize(d / 2, 0.0);
    let g = Matrix::from_columns(&basis);
    Ok(CanonicalForm { g, theta })
}

fn project_out(v: &Vector, basis: &[Vector]) -> Vector {
    let mut out = v.clone();
    for b in basis {
        out -= b * b.dot(&out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn taylor_expm(a: &Matrix) -> Matrix {
        let n = a.nrows();
        let mut term = Matrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn expm_zero_is_identity() {
        assert_eq!(expm(&Matrix::zeros(2, 2)).unwrap(), Matrix::identity(2, 2));
    }

    #[test]
    fn expm_quarter_turn_fixes_sign_convention() {
        let a = rotation_generator(&[1.0], 2).unwrap() * (PI / 2.0);
        let e = expm(&a).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((&e - &expected).norm() < 1e-14);
        assert!((&e - taylor_expm(&a)).norm() < 1e-14);
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0]))).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_matches_taylor_across_padé_degrees() {
        let base = Matrix::from_row_slice(3, 3, &[0.3, -1.2, 0.4, 0.7, -0.5, 0.1, -0.2, 0.9, 0.05]);
        for scale in [1e-3, 0.1, 0.5, 1.5, 4.0, 12.0] {
            let a = &base * scale;
            let e = expm(&a).unwrap();
            let t = taylor_expm(&(&a / 64.0));
            let mut oracle = t;
            for _ in 0..6 {
                oracle = &oracle * &oracle;
            }
            let rel = (&e - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-12, "scale {scale}: rel {rel}");
        }
    }

    #[test]
    fn expm_rejects_non_finite() {
        let a = Matrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(expm(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hurwitz_examples() {
        let c = hurwitz_check(&-Matrix::identity(2, 2)).unwrap();
        assert!(c.hurwitz);
        assert!((c.abscissa + 1.0).abs() < 1e-14);

        let rot = rotation_generator(&[1.0], 2).unwrap();
        let c = hurwitz_check(&rot).unwrap();
        assert!(!c.hurwitz);
        assert_eq!(c.abscissa, 0.0);

        // Characteristic polynomial of −I + R(1) is (λ+1)² + 1.
        let c = hurwitz_check(&(rot - Matrix::identity(2, 2))).unwrap();
        assert!(c.hurwitz);
        assert!((c.abscissa + 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_form_of_block_input() {
        let r = rotation_generator(&[1.5], 2).unwrap();
        let cf = skew_canonical_form(&r).unwrap();
        assert!((cf.theta[0] - 1.5).abs() < 1e-12);
        assert!((cf.reconstruct() - &r).norm() < 1e-12);
    }

    #[test]
    fn canonical_form_cross_product_matrix() {
        // Axis ω = (0,0,2): eigenvalues ±2i and 0.
        let r = Matrix::from_row_slice(3, 3, &[0.0, -2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let cf = skew_canonical_form(&r).unwrap();
        assert_eq!(cf.theta.len(), 1);
        assert!((cf.theta[0] - 2.0).abs() < 1e-12);
        assert!((cf.g.column(2).abs() - Vector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-12);
        assert!((cf.reconstruct() - &r).norm() < 1e-12);
    }

    #[test]
    fn canonical_form_repeated_speeds() {
        let r = rotation_generator(&[1.0, 1.0], 5).unwrap();
        let q = expm(&Matrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2))
            .unwrap();
        let q = q.qr().q();
        let rr = &q * &r * q.transpose();
        let cf = skew_canonical_form(&rr).unwrap();
        assert!((cf.theta[0] - 1.0).abs() < 1e-10 && (cf.theta[1] - 1.0).abs() < 1e-10);
        assert!((cf.g.transpose() * &cf.g - Matrix::identity(5, 5)).norm() < 1e-10);
        assert!((cf.reconstruct() - &rr).norm() < 1e-8);
    }

    #[test]
    fn canonical_form_rejects_non_skew() {
        let a = Matrix::identity(2, 2);
        assert!(matches!(skew_canonical_form(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_matrix_has_zero_speeds() {
        let cf = skew_canonical_form(&Matrix::zeros(4, 4)).unwrap();
        assert_eq!(cf.theta, vec![0.0, 0.0]);
        assert!((cf.g.transpose() * &cf.g - Matrix::identity(4, 4)).norm() < 1e-12);
    }
}
