//! Kernels of Ornstein–Uhlenbeck semigroups with respect to the invariant measure.
//!
//! Every kernel is computed as a logarithm first; the `kernel_*` functions
//! exponentiate at the end. Exponents on certification grids reach the hundreds.

use crate::error::{Error, Result};
use crate::gaussian::{
    covariance_at, gauss_quadrature, invariant_measure, GaussianMeasure, OuParams,
};
use crate::matrix::{expm, is_skew, symmetrize, Matrix, Vector, ALGEBRAIC_TOL};

/// Smallest time at which kernels are evaluated; below it Q_t is too close to singular.
pub const T_MIN: f64 = 1e-8;

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if t < T_MIN {
        return Err(Error::Numeric(format!(
            "time {t} is below t_min = {T_MIN}; Q_t is numerically singular there"
        )));
    }
    Ok(())
}

fn check_point(x: &[f64], d: usize, name: &str) -> Result<()> {
    if x.len() != d {
        return Err(Error::InvalidInput(format!(
            "{name} has dimension {}, expected {d}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// x₁y₂ − x₂y₁.
pub fn wedge(x: [f64; 2], y: [f64; 2]) -> f64 {
    x[0] * y[1] - x[1] * y[0]
}

/// Kernel h_t(x, y) of a general OU semigroup at a fixed time, with Q_t,
/// e^{tB} and the determinant factor precomputed.
#[derive(Debug, Clone)]
pub struct GeneralKernel {
    t: f64,
    etb: Matrix,
    qt: GaussianMeasure,
    q_inf: GaussianMeasure,
    log_det_factor: f64,
}

impl GeneralKernel {
    pub fn new(params: &OuParams, t: f64) -> Result<Self> {
        check_time(t)?;
        let etb = expm(&(params.b() * t))?;
        let qt = GaussianMeasure::new(covariance_at(params, t)?)
            .map_err(|_| Error::Numeric(format!("Q_t is not positive definite at t = {t}")))?;
        let q_inf = invariant_measure(params)?;
        let log_det_factor = q_inf.half_log_det() - qt.half_log_det();
        Ok(Self {
            t,
            etb,
            qt,
            q_inf,
            log_det_factor,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.etb.nrows()
    }

    /// e^{tB}.
    pub fn propagator(&self) -> &Matrix {
        &self.etb
    }

    /// γ_t, the law of the noise after time t.
    pub fn noise(&self) -> &GaussianMeasure {
        &self.qt
    }

    /// log h_t(x, y).
    pub fn log_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_point(x, d, "x")?;
        check_point(y, d, "y")?;
        let mean = &self.etb * Vector::from_column_slice(x);
        let diff: Vec<f64> = mean.iter().zip(y).map(|(m, v)| m - v).collect();
        Ok(self.log_det_factor
            - 0.5 * (self.qt.mahalanobis_sq(&diff) - self.q_inf.mahalanobis_sq(y)))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.log_eval(x, y).map(f64::exp)
    }
}

/// h_t(x, y) for arbitrary (Q, B).
pub fn kernel_general(params: &OuParams, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    GeneralKernel::new(params, t)?.eval(x, y)
}

pub fn log_kernel_general(params: &OuParams, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    GeneralKernel::new(params, t)?.log_eval(x, y)
}

/// log of the Mehler kernel of ½Δ − ⟨x, ∇⟩ in dimension `x.len()`.
pub fn log_kernel_symmetric(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_time(t)?;
    let d = x.len();
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    check_point(x, d, "x")?;
    check_point(y, d, "y")?;
    let sum_sq: f64 = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum();
    let diff_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let plus = if sum_sq == 0.0 { 0.0 } else { sum_sq / (t.exp() + 1.0) };
    let minus = if diff_sq == 0.0 { 0.0 } else { diff_sq / t.exp_m1() };
    Ok(-0.5 * d as f64 * (-(-2.0 * t).exp_m1()).ln() + 0.5 * (plus - minus))
}

pub fn kernel_symmetric(d: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_point(x, d, "x")?;
    log_kernel_symmetric(t, x, y).map(f64::exp)
}

/// log h⁰_t(e^{tR}x, y), the kernel of ½Δ − ⟨x, ∇⟩ + ⟨Rx, ∇⟩ for skew R.
pub fn log_kernel_normal(r: &Matrix, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_time(t)?;
    if !is_skew(r, ALGEBRAIC_TOL) {
        return Err(Error::InvalidInput("R must be skew-symmetric".into()));
    }
    check_point(x, r.nrows(), "x")?;
    check_point(y, r.nrows(), "y")?;
    let rotated = expm(&(r * t))? * Vector::from_column_slice(x);
    log_kernel_symmetric(t, rotated.as_slice(), y)
}

pub fn kernel_normal(r: &Matrix, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    log_kernel_normal(r, t, x, y).map(f64::exp)
}

/// Kernel of L(α, R) = ½Δ − ⟨x, ∇⟩/(2α) + ⟨Rx, ∇⟩/(2α), obtained from the
/// α = ½ kernel by t ↦ t/(2α) and (x, y) ↦ (x, y)/√(2α).
pub fn kernel_normal_alpha(alpha: f64, r: &Matrix, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let c = (2.0 * alpha).sqrt();
    let xs: Vec<f64> = x.iter().map(|v| v / c).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / c).collect();
    kernel_normal(r, t / (2.0 * alpha), &xs, &ys)
}

/// log k_{tθ}(ξ, η) = −[(1 − cos tθ)⟨ξ, η⟩ + sin(tθ) ξ∧η] / sinh t.
///
/// This is log h⁰_t(e^{tR(θ)}ξ, η) − log h⁰_t(ξ, η), derived from the rotation
/// matrix; the coefficient 1/sinh t equals 2e^{−t}/(1 − e^{−2t}).
pub fn log_factor_2d(theta: f64, t: f64, xi: [f64; 2], eta: [f64; 2]) -> Result<f64> {
    check_time(t)?;
    if !theta.is_finite() || xi.iter().chain(&eta).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite factor argument".into()));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let half = (t * theta / 2.0).sin();
    let bracket = 2.0 * half * half * dot(&xi, &eta) + (t * theta).sin() * wedge(xi, eta);
    if bracket == 0.0 {
        return Ok(0.0);
    }
    Ok(-bracket / t.sinh())
}

pub fn factor_2d(theta: f64, t: f64, xi: [f64; 2], eta: [f64; 2]) -> Result<f64> {
    log_factor_2d(theta, t, xi, eta).map(f64::exp)
}

/// Rotation speeds Θ of the block generator R(Θ) in dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    theta: Vec<f64>,
    dim: usize,
}

impl BlockSpec {
    /// Shorter speed lists are padded with zeros up to floor(dim/2).
    pub fn new(theta: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if theta.len() > dim / 2 {
            return Err(Error::InvalidInput(format!(
                "{} speeds do not fit in dimension {dim}",
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("speeds must be finite and nonnegative".into()));
        }
        let mut theta = theta;
        theta.resize(dim / 2, 0.0);
        Ok(Self { theta, dim })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator(&self) -> Matrix {
        crate::matrix::rotation_generator(&self.theta, self.dim).expect("validated")
    }

    /// The OU parameters Q = I, B = −I + R(Θ).
    pub fn params(&self) -> Result<OuParams> {
        OuParams::rotation(&self.theta, self.dim)
    }
}

/// (ξ_j, η_j) pairs of coordinates 2j, 2j+1.
pub fn plane(x: &[f64], j: usize) -> [f64; 2] {
    [x[2 * j], x[2 * j + 1]]
}

/// log h⁰_t(x, y) + Σ_{θ_j ≠ 0} log k_{tθ_j}(ξ_j, η_j).
pub fn log_kernel_block(spec: &BlockSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_point(x, spec.dim, "x")?;
    check_point(y, spec.dim, "y")?;
    let mut acc = log_kernel_symmetric(t, x, y)?;
    for (j, &th) in spec.theta.iter().enumerate() {
        if th != 0.0 {
            acc += log_factor_2d(th, t, plane(x, j), plane(y, j))?;
        }
    }
    Ok(acc)
}

pub fn kernel_block(spec: &BlockSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    log_kernel_block(spec, t, x, y).map(f64::exp)
}

/// τ(s) = log((1 + s)/(1 − s)).
pub fn tau(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1), got {s}")));
    }
    Ok(s.ln_1p() - (-s).ln_1p())
}

/// τ⁻¹(t) = tanh(t/2).
pub fn tau_inv(t: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    Ok((t / 2.0).tanh())
}

/// The parameter s = τ⁻¹(t) carried with 1 ± s computed directly, since 1 − s
/// underflows to nothing once s rounds to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParam {
    pub s: f64,
    pub one_minus: f64,
    pub one_plus: f64,
}

impl SParam {
    pub fn from_s(s: f64) -> Result<Self> {
        tau(s)?;
        Ok(Self {
            s,
            one_minus: 1.0 - s,
            one_plus: 1.0 + s,
        })
    }

    pub fn from_t(t: f64) -> Result<Self> {
        tau_inv(t)?;
        let e = (-t).exp();
        Ok(Self {
            s: -(-t).exp_m1() / (1.0 + e),
            one_minus: 2.0 * e / (1.0 + e),
            one_plus: 2.0 / (1.0 + e),
        })
    }

    /// τ(s), accurate even when s rounds to 1.
    pub fn t(&self) -> f64 {
        (self.one_plus / self.one_minus).ln()
    }

    /// (1 − s²)/(2s) = 1/sinh τ(s).
    pub fn inv_sinh_t(&self) -> f64 {
        self.one_minus * self.one_plus / (2.0 * self.s)
    }

    /// Q_s(x, y) = |(1 + s)x − (1 − s)y|².
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                let v = self.one_plus * a - self.one_minus * b;
                v * v
            })
            .sum()
    }

    /// log[s^{−d/2} e^{|x|² − Q_s(x,y)/(4s)}].
    pub fn log_envelope(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = x.len() as f64;
        -0.5 * d * self.s.ln() + norm_sq(x) - self.quadratic_form(x, y) / (4.0 * self.s)
    }

    /// log h⁰_{τ(s)}(x, y) through the reparametrized closed form.
    pub fn log_kernel_symmetric(&self, x: &[f64], y: &[f64]) -> f64 {
        x.len() as f64 * (self.one_plus / 2.0).ln() + self.log_envelope(x, y)
    }

    /// log k_{τ(s)θ}(ξ, η).
    pub fn log_factor(&self, theta: f64, xi: [f64; 2], eta: [f64; 2]) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        let t = self.t();
        let half = (t * theta / 2.0).sin();
        let bracket = 2.0 * half * half * dot(&xi, &eta) + (t * theta).sin() * wedge(xi, eta);
        -self.inv_sinh_t() * bracket
    }

    /// log h^Θ_{τ(s)}(x, y) of the block kernel.
    pub fn log_kernel_block(&self, spec: &BlockSpec, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = self.log_kernel_symmetric(x, y);
        for (j, &th) in spec.theta.iter().enumerate() {
            acc += self.log_factor(th, plane(x, j), plane(y, j));
        }
        acc
    }
}

/// Q_s(x, y) = |(1 + s)x − (1 − s)y|².
pub fn quadratic_form_qs(s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let p = SParam::from_s(s)?;
    check_point(y, x.len(), "y")?;
    Ok(p.quadratic_form(x, y))
}

/// h⁰_{τ(s)}(x, y) = (4s)^{−d/2}(1 + s)^d e^{|x|² − Q_s(x,y)/(4s)}.
pub fn kernel_symmetric_reparam(d: usize, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let p = SParam::from_s(s)?;
    check_point(x, d, "x")?;
    check_point(y, d, "y")?;
    Ok(p.log_kernel_symmetric(x, y).exp())
}

/// s^{−d/2} e^{|x|² − Q_s(x,y)/(4s)}; dominates h⁰_{τ(s)} by the factor (2/(1 + s))^d.
pub fn symmetric_envelope(d: usize, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let p = SParam::from_s(s)?;
    check_point(x, d, "x")?;
    check_point(y, d, "y")?;
    Ok(p.log_envelope(x, y).exp())
}

/// Time argument of a kernel query: the semigroup time t or its reparametrization s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelTime {
    T(f64),
    S(f64),
}

/// Arguments of a kernel evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelQuery {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub time: KernelTime,
}

impl KernelQuery {
    pub fn new(x: Vec<f64>, y: Vec<f64>, time: KernelTime) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidInput("points must be non-empty".into()));
        }
        check_point(&x, x.len(), "x")?;
        check_point(&y, x.len(), "y")?;
        match time {
            KernelTime::T(t) => check_time(t)?,
            KernelTime::S(s) => {
                tau(s)?;
            }
        }
        Ok(Self { x, y, time })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// The semigroup time t.
    pub fn t(&self) -> f64 {
        match self.time {
            KernelTime::T(t) => t,
            KernelTime::S(s) => tau(s).expect("validated"),
        }
    }
}

/// ∫ h_t(x, z) h_s(z, y) dγ∞(z) by Gauss–Hermite quadrature of order `order`.
///
/// The integral is taken against whichever Gaussian is narrower: the forward
/// transition law N(e^{tB}x, Q_t) with integrand h_s(·, y), or the backward law
/// h_s(·, y)γ∞, which is Gaussian with precision e^{sBᵀ}Q_s⁻¹e^{sB} + Q∞⁻¹,
/// with integrand h_t(x, ·).
pub fn chapman_kolmogorov(
    params: &OuParams,
    t: f64,
    s: f64,
    x: &[f64],
    y: &[f64],
    order: usize,
) -> Result<f64> {
    let kt = GeneralKernel::new(params, t)?;
    let ks = GeneralKernel::new(params, s)?;
    check_point(x, params.dim(), "x")?;
    check_point(y, params.dim(), "y")?;

    let qs_inv = ks
        .noise()
        .sigma()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("Q_s is singular".into()))?;
    let q_inf_inv = params
        .q_inf()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("Q_inf is singular".into()))?;
    let e = ks.propagator();
    let precision = symmetrize(&(e.transpose() * &qs_inv * e + q_inf_inv));
    let back_cov = symmetrize(
        &precision
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("backward precision is singular".into()))?,
    );

    if kt.noise().sigma().trace() <= back_cov.trace() {
        let mean = kt.propagator() * Vector::from_column_slice(x);
        let rule = gauss_quadrature(kt.noise(), order)?.shifted(mean.as_slice());
        Ok(rule.integrate(|z| ks.eval(z, y).unwrap_or(f64::NAN)))
    } else {
        let mean = &back_cov * (e.transpose() * &qs_inv * Vector::from_column_slice(y));
        let rule =
            gauss_quadrature(&GaussianMeasure::new(back_cov)?, order)?.shifted(mean.as_slice());
        Ok(rule.integrate(|z| kt.eval(x, z).unwrap_or(f64::NAN)))
    }
}
