use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{covariance_at, OuParams};
use crate::matrix::{ensure_square_finite, symmetrize, Matrix, Vector, ALGEBRAIC_TOL};

/// Draws per random sub-stream; stream k of a seed always produces the same batch.
pub const SAMPLE_BATCH: usize = 4096;

/// Mean-zero Gaussian measure N(0, Σ) with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    sigma: Matrix,
    chol: Matrix,
    log_norm: f64,
}

impl GaussianMeasure {
    /// Requires Σ symmetric positive definite.
    pub fn new(sigma: Matrix) -> Result<Self> {
        let d = ensure_square_finite(&sigma, "covariance")?;
        if (&sigma - sigma.transpose()).norm() > ALGEBRAIC_TOL * (1.0 + sigma.norm()) {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let sigma = symmetrize(&sigma);
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?
            .unpack();
        let log_det: f64 = chol.diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            sigma,
            chol,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    /// Lower-triangular L with Σ = L·Lᵀ.
    pub fn cholesky_factor(&self) -> &Matrix {
        &self.chol
    }

    /// ½ log det Σ.
    pub fn half_log_det(&self) -> f64 {
        self.chol.diagonal().iter().map(|v| v.ln()).sum()
    }

    /// ⟨Σ⁻¹x, x⟩.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let w = self
            .chol
            .solve_lower_triangular(&Vector::from_column_slice(x))
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    /// Lebesgue density.
    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// `n` independent draws. Batch k uses stream k of a ChaCha8 generator seeded
    /// with `seed`, so the output does not depend on the number of workers.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let d = self.dim();
        let batches = n.div_ceil(SAMPLE_BATCH);
        (0..batches)
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let count = SAMPLE_BATCH.min(n - k * SAMPLE_BATCH);
                let chol = &self.chol;
                (0..count)
                    .map(move |_| {
                        let z = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                        (chol * z).iter().copied().collect::<Vec<f64>>()
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// γ_t = N(0, Q_t).
pub fn measure_at(params: &OuParams, t: f64) -> Result<GaussianMeasure> {
    GaussianMeasure::new(covariance_at(params, t)?)
}

/// γ∞ = N(0, Q∞).
pub fn invariant_measure(params: &OuParams) -> Result<GaussianMeasure> {
    GaussianMeasure::new(params.q_inf().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_normalizer() {
        let m = GaussianMeasure::new(Matrix::from_element(1, 1, 0.5)).unwrap();
        assert!((m.density(&[0.0]) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_invariant_measure_has_half_identity_covariance() {
        let p = OuParams::symmetric(3).unwrap();
        let m = invariant_measure(&p).unwrap();
        assert!((m.sigma() - Matrix::identity(3, 3) * 0.5).norm() < 1e-14);
        // Density proportional to e^{-|x|²}.
        let x = [0.3, -0.7, 1.1];
        let ratio = m.density(&x) / m.density(&[0.0; 3]);
        let sq: f64 = x.iter().map(|v| v * v).sum();
        assert!((ratio - (-sq).exp()).abs() < 1e-14);
    }

    #[test]
    fn log_density_hessian_is_minus_precision() {
        let sigma = Matrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.7]);
        let m = GaussianMeasure::new(sigma.clone()).unwrap();
        let prec = sigma.try_inverse().unwrap();
        let h = 1e-3;
        let x = [0.2, -0.4];
        for i in 0..2 {
            for j in 0..2 {
                let at = |di: f64, dj: f64| {
                    let mut p = x;
                    p[i] += di;
                    p[j] += dj;
                    m.log_density(&p)
                };
                let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                assert!((fd + prec[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sampling_moments_and_determinism() {
        let n = 100_000;
        let m = GaussianMeasure::new(Matrix::identity(2, 2)).unwrap();
        let s = m.sample(n, 11);
        assert_eq!(s.len(), n);
        for k in 0..2 {
            let mean = s.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        }
        assert_eq!(s, m.sample(n, 11));

        let m = GaussianMeasure::new(Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]))).unwrap();
        let s = m.sample(n, 5);
        for (k, want) in [1.0, 2.0].iter().enumerate() {
            let var = s.iter().map(|p| p[k] * p[k]).sum::<f64>() / n as f64;
            assert!((var - want).abs() < 0.05 * want);
        }
    }

    #[test]
    fn sampling_is_independent_of_worker_count() {
        let m = GaussianMeasure::new(Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5])).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| m.sample(10_000, 3));
        let b = four.install(|| m.sample(10_000, 3));
        assert_eq!(a, b);
    }
}
