use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    covariance_at, hermite_rule, GaussianMeasure, OuParams, DEFAULT_MAX_DIM, DEFAULT_ORDER,
};
use crate::matrix::{expm, Matrix, Vector};
use crate::maximal::regions::local_region;
use crate::maximal::timeset::TimeSet;

/// Applies H_t f(x) = ∫ f(e^{tB}x − y) dγ_t(y) by tensor Gauss–Hermite quadrature.
///
/// Standard normal nodes are computed once; each time only needs e^{tB} and the
/// Cholesky factor of Q_t. Since γ_t is symmetric, e^{tB}x − Lz and e^{tB}x + Lz
/// give the same rule.
#[derive(Debug, Clone)]
pub struct Semigroup {
    params: OuParams,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Propagator and noise factor at one time.
#[derive(Debug, Clone)]
pub struct TransitionStep {
    pub t: f64,
    pub etb: Matrix,
    pub chol: Matrix,
}

impl Semigroup {
    pub fn new(params: &OuParams) -> Result<Self> {
        Self::with_order(params, DEFAULT_ORDER)
    }

    pub fn with_order(params: &OuParams, order: usize) -> Result<Self> {
        let d = params.dim();
        if d > DEFAULT_MAX_DIM {
            return Err(Error::Capability(format!(
                "semigroup quadrature supports d <= {DEFAULT_MAX_DIM}, got d = {d}"
            )));
        }
        let (x1, w1) = hermite_rule(order)?;
        let total = order.pow(d as u32);
        let mut nodes = Vec::with_capacity(total * d);
        let mut weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            let mut w = 1.0;
            for _ in 0..d {
                let i = rest % order;
                rest /= order;
                nodes.push(x1[i]);
                w *= w1[i];
            }
            weights.push(w);
        }
        Ok(Self {
            params: params.clone(),
            nodes,
            weights,
        })
    }

    pub fn params(&self) -> &OuParams {
        &self.params
    }

    pub fn step(&self, t: f64) -> Result<TransitionStep> {
        let etb = expm(&(self.params.b() * t))?;
        let chol = GaussianMeasure::new(covariance_at(&self.params, t)?)?
            .cholesky_factor()
            .clone();
        Ok(TransitionStep { t, etb, chol })
    }

    /// Σ_i w_i g(e^{tB}x + L z_i) for a precomputed step.
    pub fn expect<G>(&self, step: &TransitionStep, x: &[f64], g: G) -> f64
    where
        G: Fn(&[f64]) -> f64 + Sync,
    {
        let d = self.params.dim();
        let mean = &step.etb * Vector::from_column_slice(x);
        const CHUNK: usize = 1024;
        let partial: Vec<f64> = self
            .weights
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, ws)| {
                let mut y = vec![0.0; d];
                let mut acc = 0.0;
                for (k, w) in ws.iter().enumerate() {
                    let z = &self.nodes[(c * CHUNK + k) * d..(c * CHUNK + k + 1) * d];
                    for (i, yi) in y.iter_mut().enumerate() {
                        let mut v = mean[i];
                        for (j, zj) in z.iter().enumerate().take(i + 1) {
                            v += step.chol[(i, j)] * zj;
                        }
                        *yi = v;
                    }
                    acc += w * g(&y);
                }
                acc
            })
            .collect();
        partial.iter().sum()
    }

    /// H_t f(x); t = 0 returns f(x).
    pub fn apply<F>(&self, t: f64, f: F, x: &[f64]) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.check_x(x)?;
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(f(x));
        }
        let step = self.step(t)?;
        Ok(self.expect(&step, x, f))
    }

    /// (H_t(f·1_L(x, ·))(x), H_t(f·1_G(x, ·))(x)).
    pub fn apply_split<F>(&self, t: f64, f: F, x: &[f64]) -> Result<(f64, f64)>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.check_x(x)?;
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            // The point mass at x lies in L.
            return Ok((f(x), 0.0));
        }
        let step = self.step(t)?;
        let local = self.expect(&step, x, |y| if local_region(x, y) { f(y) } else { 0.0 });
        let global = self.expect(&step, x, |y| if local_region(x, y) { 0.0 } else { f(y) });
        Ok((local, global))
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.params.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "x must be a finite point of dimension {}",
                self.params.dim()
            )));
        }
        Ok(())
    }
}

/// H_t f(x) with the default quadrature order.
pub fn apply_semigroup<F>(params: &OuParams, t: f64, f: F, x: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Semigroup::new(params)?.apply(t, f, x)
}

/// Supremum of a maximal scan and the time attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub value: f64,
    pub argmax_t: f64,
}

/// max over the grid of |H_t f(x)|.
pub fn maximal_scan<F>(params: &OuParams, f: F, x: &[f64], times: &TimeSet) -> Result<ScanResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let sg = Semigroup::new(params)?;
    scan_with(&sg, &f, x, times)
}

pub fn scan_with<F>(sg: &Semigroup, f: &F, x: &[f64], times: &TimeSet) -> Result<ScanResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if times.is_empty() {
        return Err(Error::InvalidInput("time set is empty".into()));
    }
    let mut values = Vec::with_capacity(times.len());
    if times.includes_zero {
        values.push((0.0, sg.apply(0.0, f, x)?.abs()));
    }
    let scanned: Result<Vec<(f64, f64)>> = times
        .times
        .par_iter()
        .map(|&t| Ok((t, sg.apply(t, f, x)?.abs())))
        .collect();
    values.extend(scanned?);
    Ok(best(&values))
}

fn best(values: &[(f64, f64)]) -> ScanResult {
    let mut out = ScanResult {
        value: f64::NEG_INFINITY,
        argmax_t: 0.0,
    };
    for &(t, v) in values {
        if v > out.value {
            out = ScanResult { value: v, argmax_t: t };
        }
    }
    out
}

/// Local and global parts of a maximal scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScan {
    pub local: ScanResult,
    pub global: ScanResult,
}

/// Scans of H_t(f·1_L) and H_t(f·1_G) at x.
pub fn split_maximal<F>(params: &OuParams, f: F, x: &[f64], times: &TimeSet) -> Result<SplitScan>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if times.is_empty() {
        return Err(Error::InvalidInput("time set is empty".into()));
    }
    let sg = Semigroup::new(params)?;
    let mut rows = Vec::with_capacity(times.len());
    if times.includes_zero {
        let (l, g) = sg.apply_split(0.0, &f, x)?;
        rows.push((0.0, l.abs(), g.abs()));
    }
    let scanned: Result<Vec<(f64, f64, f64)>> = times
        .times
        .par_iter()
        .map(|&t| {
            let (l, g) = sg.apply_split(t, &f, x)?;
            Ok((t, l.abs(), g.abs()))
        })
        .collect();
    rows.extend(scanned?);
    let local: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let global: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.2)).collect();
    Ok(SplitScan {
        local: best(&local),
        global: best(&global),
    })
}

/// f(y) = exp(−|y − c|²/(2w²)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub width: f64,
}

impl GaussianBump {
    pub fn new(center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidInput(format!("bump width must be positive, got {width}")));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("bump center must be finite".into()));
        }
        Ok(Self { center, width })
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let sq: f64 = y.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        (-sq / (2.0 * self.width * self.width)).exp()
    }

    /// ∫ f dN(m, Σ) = det(I + Σ/w²)^{−1/2} exp(−½ (m − c)ᵀ(Σ + w²I)⁻¹(m − c)).
    pub fn gaussian_integral(&self, mean: &[f64], sigma: &Matrix) -> Result<f64> {
        Ok(self.log_gaussian_integral(mean, sigma)?.exp())
    }

    pub fn log_gaussian_integral(&self, mean: &[f64], sigma: &Matrix) -> Result<f64> {
        let d = self.center.len();
        let w2 = self.width * self.width;
        let s = sigma + Matrix::identity(d, d) * w2;
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Numeric("Σ + w²I is not positive definite".into()))?;
        let diff = Vector::from_iterator(d, mean.iter().zip(&self.center).map(|(m, c)| m - c));
        let z = chol.l().solve_lower_triangular(&diff).expect("positive diagonal");
        let log_det_s: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_det = log_det_s - d as f64 * w2.ln();
        Ok(-0.5 * log_det - 0.5 * z.norm_squared())
    }

    /// ‖f‖_{L¹(γ∞)}.
    pub fn l1_norm(&self, params: &OuParams) -> Result<f64> {
        self.gaussian_integral(&vec![0.0; self.center.len()], params.q_inf())
    }

    /// H_t f(x) in closed form.
    pub fn semigroup(&self, params: &OuParams, t: f64, x: &[f64]) -> Result<f64> {
        if t == 0.0 {
            return Ok(self.eval(x));
        }
        let etb = expm(&(params.b() * t))?;
        let mean = &etb * Vector::from_column_slice(x);
        self.gaussian_integral(mean.as_slice(), &covariance_at(params, t)?)
    }
}
