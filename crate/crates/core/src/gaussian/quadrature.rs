use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::GaussianMeasure;
use crate::matrix::{Matrix, Vector};

pub const DEFAULT_ORDER: usize = 64;
pub const DEFAULT_MAX_DIM: usize = 3;

/// Tensor Gauss–Hermite rule for a Gaussian measure; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes and weights of the `order`-point rule for N(0, 1).
pub fn hermite_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::InvalidInput("quadrature order must be at least 1".into()));
    }
    let jacobi = Matrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 100 * order)
        .ok_or_else(|| Error::Numeric("Golub-Welsch eigensolver did not converge".into()))?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mut weights = Vec::with_capacity(order);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pn, pn1, _) = orthonormal_hermite(order, *x);
            if pn1 != 0.0 {
                *x -= pn / ((order as f64).sqrt() * pn1);
            }
        }
        let (_, _, sum_sq) = orthonormal_hermite(order, *x);
        weights.push(1.0 / sum_sq);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

/// Returns (p_n(x), p_{n−1}(x), Σ_{k<n} p_k(x)²) for the orthonormal probabilists' Hermite family.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Rule for `measure` with the default dimension cap.
pub fn gauss_quadrature(measure: &GaussianMeasure, order: usize) -> Result<QuadratureRule> {
    gauss_quadrature_capped(measure, order, DEFAULT_MAX_DIM)
}

/// Rule for N(0, Σ): whiten with the Cholesky factor and take the tensor product.
pub fn gauss_quadrature_capped(
    measure: &GaussianMeasure,
    order: usize,
    max_dim: usize,
) -> Result<QuadratureRule> {
    let d = measure.dim();
    if d > max_dim {
        return Err(Error::Capability(format!(
            "tensor quadrature supports d <= {max_dim}, got d = {d}"
        )));
    }
    let (x1, w1) = hermite_rule(order)?;
    let total = order.pow(d as u32);
    let l = measure.cholesky_factor();
    let mut nodes = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut z = Vector::zeros(d);
    for flat in 0..total {
        let mut rest = flat;
        let mut w = 1.0;
        for k in 0..d {
            let i = rest % order;
            rest /= order;
            z[k] = x1[i];
            w *= w1[i];
        }
        nodes.extend((l * &z).iter());
        weights.push(w);
    }
    Ok(QuadratureRule { dim: d, nodes, weights })
}

/// Points per parallel chunk; partial sums are combined in chunk order.
const CHUNK: usize = 1024;

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Same rule shifted by `mean`.
    pub fn shifted(&self, mean: &[f64]) -> QuadratureRule {
        let mut nodes = self.nodes.clone();
        for p in nodes.chunks_mut(self.dim) {
            p.iter_mut().zip(mean).for_each(|(a, m)| *a += m);
        }
        QuadratureRule {
            dim: self.dim,
            nodes,
            weights: self.weights.clone(),
        }
    }

    /// Σ w_i f(x_i), reproducible regardless of the thread count.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let partial: Vec<f64> = self
            .weights
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, ws)| {
                ws.iter()
                    .enumerate()
                    .map(|(k, w)| w * f(self.node(c * CHUNK + k)))
                    .sum()
            })
            .collect();
        partial.iter().sum()
    }
}
