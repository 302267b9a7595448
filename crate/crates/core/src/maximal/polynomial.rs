//! Quadratic-in-s certificates behind the global bounds.
//!
//! Each region reduces the inequality M_s ≤ C to the sign of a polynomial
//! a s² + b s + c whose coefficients are quadratic forms in (x, y). Dividing by
//! |x||y| leaves a function of s, X = |x|/|y| and the angle ϑ, which is what the
//! grids below sample. The kernel factor is taken with the 1/(4s) exponent
//! convention, in which k_{τ(s)θ} ≈ exp(−(θ²s/2)⟨x,y⟩ − (θ/2) x∧y) for small s.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{wedge, SParam};
use crate::matrix::Matrix;
use crate::maximal::certify::{
    periodic_interval, small_time_trig_constants, Envelope, DEFAULT_BETA, DEFAULT_DELTA,
    DEFAULT_EPSILON, DEFAULT_S_MAX,
};
use crate::maximal::grid::Axis;
use crate::maximal::regions::{classify_region_five, classify_region_three, RegionLabel};
use crate::maximal::report::{CertificationReport, GridRecord, RegionSummary, Violation};
use crate::maximal::timeset::{period_of, DEFAULT_COPIES};
use crate::kernels::BlockSpec;

/// Bound on c₁²/c₀ for negative definiteness of the Hessian of F at (0, 1, 0).
pub const HESSIAN_RATIO_LIMIT: f64 = 18.0 / 5.0;
/// Allowed discrepancy between E_s/(|x||y|) and F(Ψ(s, x, y)).
const IDENTITY_TOL: f64 = 1e-10;
/// Finite-difference step of the Hessian.
const HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolyRegion {
    /// E_s on the near-parallel sector R5, small s.
    R5SmallTime,
    /// F_s on ⟨x,y⟩ ≥ 0, x∧y < 0, periodic s.
    R2Periodic,
    /// G_s on ⟨x,y⟩ < 0, periodic s.
    R3Periodic,
}

impl std::str::FromStr for PolyRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r5-small-time" => Ok(PolyRegion::R5SmallTime),
            "r2-periodic" => Ok(PolyRegion::R2Periodic),
            "r3-periodic" => Ok(PolyRegion::R3Periodic),
            other => Err(Error::Domain(format!(
                "unknown region `{other}`; expected r5-small-time, r2-periodic or r3-periodic"
            ))),
        }
    }
}

impl PolyRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolyRegion::R5SmallTime => "r5-small-time",
            PolyRegion::R2Periodic => "r2-periodic",
            PolyRegion::R3Periodic => "r3-periodic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolyOptions {
    pub theta: f64,
    pub s0: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub copies: usize,
    pub s_steps: usize,
    pub ratio_steps: usize,
    pub angle_steps: usize,
    /// Random pairs (x, y) of the region used for the identity and domination checks.
    pub samples: usize,
    pub seed: u64,
}

impl Default for PolyOptions {
    fn default() -> Self {
        Self {
            theta: 1.0,
            s0: DEFAULT_S_MAX,
            beta: DEFAULT_BETA,
            delta: DEFAULT_DELTA,
            epsilon: DEFAULT_EPSILON,
            copies: DEFAULT_COPIES,
            s_steps: 40,
            ratio_steps: 40,
            angle_steps: 40,
            samples: 20_000,
            seed: 3,
        }
    }
}

/// Constants of the small-time approximation of k_{τ(s)θ} on (0, s0]:
/// c₀ = inf (1 − s²)(1 − cos τθ)/(θ²s²) ≤ 2 and c₁ > 2 slightly above
/// sup (1 − s²) sin(τθ)/(θs).
pub fn small_time_constants(theta: f64, s0: f64) -> Result<(f64, f64)> {
    let (c2, c0) = small_time_trig_constants(theta, s0)?;
    let c1 = (4.0 * c2 / theta).max(2.0) * (1.0 + 1e-6);
    Ok((c0.min(2.0), c1))
}

/// Coefficients (λ̃, μ̃, ν̃) of F(s, X, ϑ) = λ̃s² + μ̃s + ν̃.
pub fn reduced_coefficients(c0: f64, c1: f64, theta: f64, x_ratio: f64, angle: f64) -> [f64; 3] {
    let u = x_ratio + 1.0 / x_ratio;
    let (c, sn) = (angle.cos(), angle.sin());
    [
        -0.9 * (u + 2.0 * c) - c0 * theta * theta * c,
        1.8 * (1.0 / x_ratio - x_ratio) - c1 * theta * sn,
        -0.9 * (u - 2.0 * c),
    ]
}

pub fn reduced_f(c0: f64, c1: f64, theta: f64, s: f64, x_ratio: f64, angle: f64) -> f64 {
    let [l, m, n] = reduced_coefficients(c0, c1, theta, x_ratio, angle);
    (l * s + m) * s + n
}

/// E_s(x, y) = −(9/10)Q_s − c₀θ²s²⟨x,y⟩ − c₁θs x∧y.
pub fn e_s(c0: f64, c1: f64, theta: f64, s: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let q = qs(s, x, y);
    -0.9 * q - c0 * theta * theta * s * s * dot(x, y) - c1 * theta * s * wedge(x, y)
}

fn dot(x: [f64; 2], y: [f64; 2]) -> f64 {
    x[0] * y[0] + x[1] * y[1]
}

fn qs(s: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let a = (1.0 + s) * x[0] - (1.0 - s) * y[0];
    let b = (1.0 + s) * x[1] - (1.0 - s) * y[1];
    a * a + b * b
}

/// Normalized coefficients (p, q, r)/(|x||y|) of F_s (R2) or G_s (R3) with the
/// envelope constants of one speed. `printed_signs` flips the sign of the c₁
/// terms of G_s.
pub fn periodic_coefficients(
    region: PolyRegion,
    env: &Envelope,
    x_ratio: f64,
    angle: f64,
    printed_signs: bool,
) -> [f64; 3] {
    let u = x_ratio + 1.0 / x_ratio;
    let (c, sn) = (angle.cos(), angle.sin());
    let q = 1.8 * (1.0 / x_ratio - x_ratio);
    match region {
        PolyRegion::R2Periodic => {
            let a = env.c0 * c + env.c1 * sn;
            [-0.9 * (u + 2.0 * c) + a, q, -0.9 * (u - 2.0 * c) - a]
        }
        PolyRegion::R3Periodic => {
            let sign = if printed_signs { -1.0 } else { 1.0 };
            let a = env.c2 * c.abs() + sign * env.c1 * sn.abs();
            [-0.9 * (u + 2.0 * c) - a, q, -0.9 * (u - 2.0 * c) + a]
        }
        PolyRegion::R5SmallTime => unreachable!("small-time region has no periodic coefficients"),
    }
}

/// log[e^{−9Q_s/(40s)} k_{τ(s)θ}] with the 1/(4s) exponent convention.
fn log_m_quarter(sp: &SParam, theta: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let t = sp.t();
    let w = sp.one_minus * sp.one_plus / (4.0 * sp.s);
    let log_k = -w * ((1.0 - (t * theta).cos()) * dot(x, y) + (t * theta).sin() * wedge(x, y));
    -9.0 / 40.0 * sp.quadratic_form(&x, &y) / sp.s + log_k
}

fn hessian_at_critical_point(c0: f64, c1: f64, theta: f64) -> Matrix {
    let h = HESSIAN_STEP;
    let f = |v: [f64; 3]| reduced_f(c0, c1, theta, v[0], v[1], v[2]);
    let base = [0.0, 1.0, 0.0];
    let mut m = Matrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            let at = |di: f64, dj: f64| {
                let mut p = base;
                p[i] += di;
                p[j] += dj;
                f(p)
            };
            m[(i, j)] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        }
    }
    m
}

fn validate(opts: &PolyOptions) -> Result<()> {
    if !(opts.theta.is_finite() && opts.theta > 0.0) {
        return Err(Error::InvalidInput(format!("theta must be positive, got {}", opts.theta)));
    }
    for (name, v) in [("beta", opts.beta), ("delta", opts.delta), ("s0", opts.s0)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if !(opts.epsilon > 0.0 && opts.epsilon <= 0.1) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 0.1], got {}",
            opts.epsilon
        )));
    }
    if opts.s_steps == 0 || opts.ratio_steps == 0 || opts.angle_steps == 0 || opts.copies == 0 {
        return Err(Error::InvalidInput("polynomial grids need at least one step per axis".into()));
    }
    Ok(())
}

/// Evaluates the polynomial of `region` on its grid and on the doubled grid.
/// Passes when its maximum is ≤ 0 on both, the discriminant is ≤ 0 (periodic
/// regions), the Hessian of F at (0, 1, 0) is negative definite (small times)
/// and the sampled pairs satisfy the domination and reduction identities.
pub fn polynomial_certificates(region: PolyRegion, opts: &PolyOptions) -> Result<CertificationReport> {
    validate(opts)?;
    match region {
        PolyRegion::R5SmallTime => small_time_certificate(opts),
        PolyRegion::R2Periodic | PolyRegion::R3Periodic => periodic_certificate(region, opts),
    }
}

struct Sweep {
    max: f64,
    arg: (f64, f64, f64),
    points: usize,
    rows: Vec<(f64, f64, f64, f64)>,
}

/// max over the (s, X, ϑ) grid of `value`, with one row per s at the worst (X, ϑ).
fn sweep<F>(s: &[f64], ratios: &[f64], angles: &[f64], value: F) -> Sweep
where
    F: Fn(f64, f64, f64) -> f64,
{
    let mut out = Sweep {
        max: f64::NEG_INFINITY,
        arg: (0.0, 0.0, 0.0),
        points: s.len() * ratios.len() * angles.len(),
        rows: Vec::with_capacity(s.len()),
    };
    for &sv in s {
        let mut row = (f64::NEG_INFINITY, 0.0, 0.0);
        for &x in ratios {
            for &a in angles {
                let v = value(sv, x, a);
                if v > row.0 {
                    row = (v, x, a);
                }
            }
        }
        if row.0 > out.max {
            out.max = row.0;
            out.arg = (sv, row.1, row.2);
        }
        out.rows.push((sv, row.1, row.2, row.0));
    }
    out
}

fn small_time_certificate(opts: &PolyOptions) -> Result<CertificationReport> {
    let theta = opts.theta;
    let (c0, c1) = small_time_constants(theta, opts.s0)?;
    let ratio = c1 * c1 / c0;
    if ratio >= HESSIAN_RATIO_LIMIT {
        return Err(Error::Precondition(format!(
            "c1^2/c0 = {ratio} is not below 18/5 for s0 = {}",
            opts.s0
        )));
    }
    let angle_lo = -opts.delta.asin();
    let axes = |k: usize| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let s = Axis::geometric(opts.s0 * 1e-4, opts.s0, opts.s_steps * k)?.points();
        let x = Axis::uniform(1.0 - opts.beta, 1.0 + opts.beta, opts.ratio_steps * k)?.points();
        let a = Axis::uniform(angle_lo, 0.0, opts.angle_steps * k)?.points();
        Ok((s, x, a))
    };
    let f = |s: f64, x: f64, a: f64| reduced_f(c0, c1, theta, s, x, a);
    let (s1, x1, a1) = axes(1)?;
    let coarse = sweep(&s1, &x1, &a1, f);
    let (s2, x2, a2) = axes(2)?;
    let fine = sweep(&s2, &x2, &a2, f);

    let mut report = CertificationReport::new("polynomial certificate, R5 small times");
    report.stability_required = false;
    report.grid = vec![
        format!("s: geometric [{:e}, {}] x{}", opts.s0 * 1e-4, opts.s0, s1.len()),
        format!("X: uniform [{}, {}] x{}", 1.0 - opts.beta, 1.0 + opts.beta, x1.len()),
        format!("angle: uniform [{angle_lo}, 0] x{}", a1.len()),
        format!("samples: {} (seed {})", opts.samples, opts.seed),
    ];
    report.points = coarse.points;
    report.refined_points = fine.points;
    report.set_constants(coarse.max, fine.max);
    report.worst_ratio = coarse.max;

    let hess = hessian_at_critical_point(c0, c1, theta);
    let hess_max = SymmetricEigen::new(hess.clone()).eigenvalues.max();
    let f_crit = reduced_f(c0, c1, theta, 0.0, 1.0, 0.0);
    // Closed form: the Schur complement of the Hessian is θ²(c₁²/1.8 − 2c₀).
    let schur = theta * theta * (c1 * c1 / 1.8 - 2.0 * c0);

    // Random pairs of R5 for the reduction identity and the domination chain.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut id_err, mut pyth_err, mut e_max, mut dom_excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut kept = 0usize;
    let mut tries = 0usize;
    while kept < opts.samples && tries < 50 * opts.samples.max(1) {
        tries += 1;
        let ny = 0.05 + 6.0 * rng.random::<f64>();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        let x_ratio = 1.0 - opts.beta + 2.0 * opts.beta * rng.random::<f64>();
        let a = angle_lo * rng.random::<f64>();
        let y = [ny * phi.cos(), ny * phi.sin()];
        // sin ϑ = x∧y/(|x||y|), so x sits at angle φ − ϑ.
        let x = [x_ratio * ny * (phi - a).cos(), x_ratio * ny * (phi - a).sin()];
        if classify_region_five(x, y, opts.beta, opts.delta)? != RegionLabel::R5 {
            continue;
        }
        kept += 1;
        let s = opts.s0 * rng.random::<f64>().max(1e-12);
        let (nx, nyy) = (x_ratio * ny, ny);
        let e = e_s(c0, c1, theta, s, x, y);
        let fv = reduced_f(c0, c1, theta, s, x_ratio, a);
        id_err = id_err.max((e / (nx * nyy) - fv).abs() / (1.0 + fv.abs()));
        let plus = [(x[0] + y[0]), (x[1] + y[1])];
        let minus = [(x[0] - y[0]), (x[1] - y[1])];
        let lhs = dot(plus, plus) * dot(minus, minus);
        let rhs = (nyy * nyy - nx * nx).powi(2) + 4.0 * a.sin().powi(2) * nx * nx * nyy * nyy;
        pyth_err = pyth_err.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        e_max = e_max.max(e);
        let sp = SParam::from_s(s)?;
        dom_excess = dom_excess.max(log_m_quarter(&sp, theta, x, y) - e / (4.0 * s));
    }

    report.diagnostics.insert("c0".into(), c0);
    report.diagnostics.insert("c1".into(), c1);
    report.diagnostics.insert("c1_sq_over_c0".into(), ratio);
    report
        .diagnostics
        .insert("exact_kernel_c1_sq_over_c0".into(), 2.0 * ratio);
    report.diagnostics.insert("f_at_critical_point".into(), f_crit);
    report.diagnostics.insert("hessian_max_eigenvalue".into(), hess_max);
    report.diagnostics.insert("hessian_schur_complement".into(), schur);
    report.diagnostics.insert("identity_max_error".into(), id_err);
    report.diagnostics.insert("pythagoras_max_error".into(), pyth_err);
    report.diagnostics.insert("sampled_pairs".into(), kept as f64);
    report.diagnostics.insert("sampled_e_s_max".into(), e_max);
    report.diagnostics.insert("domination_max_excess".into(), dom_excess);
    report.regions.insert(
        RegionLabel::R5.to_string(),
        RegionSummary {
            points: coarse.points,
            worst: coarse.max,
        },
    );
    if fine.max > 0.0 {
        let (s, x, a) = fine.arg;
        report.add_violation(Violation {
            s,
            x: vec![x, a],
            y: vec![1.0, 0.0],
            ratio: fine.max,
        });
    }
    for (s, x, a, v) in coarse.rows {
        report.records.push(GridRecord {
            s,
            norm_x: x,
            norm_y: 1.0,
            angle: a,
            region: RegionLabel::R5.to_string(),
            kernel: v,
            bound: 0.0,
            ratio: v,
        });
    }
    report.finalize();
    report.passed = report.passed
        && coarse.max <= 0.0
        && fine.max <= 0.0
        && hess_max < 0.0
        && f_crit == 0.0
        && id_err <= IDENTITY_TOL
        && pyth_err <= IDENTITY_TOL
        && (kept == 0 || (e_max <= 0.0 && dom_excess <= 1e-9));
    Ok(report)
}

fn periodic_certificate(region: PolyRegion, opts: &PolyOptions) -> Result<CertificationReport> {
    let theta = opts.theta;
    let spec = BlockSpec::new(vec![theta], 2)?;
    let period = period_of(&spec).ok_or_else(|| Error::Precondition("speed is not periodic".into()))?;
    let (lo, hi) = periodic_interval(&spec, opts.epsilon).expect("nonzero speed");
    let env = Envelope::new(theta, lo, opts.epsilon);
    let label = match region {
        PolyRegion::R2Periodic => RegionLabel::R2,
        _ => RegionLabel::R3,
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;

    let axes = |k: usize| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let base = Axis::uniform(lo, hi, opts.s_steps * k)?.points();
        let mut s = Vec::with_capacity(base.len() * opts.copies);
        for n in 0..opts.copies {
            for &t in &base {
                s.push(SParam::from_t(t + n as f64 * period)?.s);
            }
        }
        let x = Axis::geometric(1e-3, 1e3, opts.ratio_steps * k)?.points();
        let raw = Axis::uniform(0.0, 1.0, opts.angle_steps * k)?.points();
        // Angles strictly inside the region: (−π/2 ... 0) for R2, |ϑ| > π/2 for R3.
        let a: Vec<f64> = match region {
            PolyRegion::R2Periodic => raw
                .iter()
                .filter(|&&u| u < 1.0)
                .map(|u| -half_pi + half_pi * u)
                .collect(),
            _ => raw
                .iter()
                .filter(|&&u| u > 0.0)
                .flat_map(|u| [half_pi + half_pi * u, -half_pi - half_pi * u])
                .filter(|a| *a != -pi)
                .collect(),
        };
        Ok((s, x, a))
    };
    let coeffs = |x: f64, a: f64| periodic_coefficients(region, &env, x, a, false);
    let poly = |s: f64, x: f64, a: f64| {
        let [p, q, r] = coeffs(x, a);
        (p * s + q) * s + r
    };
    let (s1, x1, a1) = axes(1)?;
    let (s2, x2, a2) = axes(2)?;
    let coarse = sweep(&s1, &x1, &a1, poly);
    let fine = sweep(&s2, &x2, &a2, poly);
    let unit = [0.0];
    let disc = |_: f64, x: f64, a: f64| {
        let [p, q, r] = coeffs(x, a);
        q * q - 4.0 * p * r
    };
    let disc_max = sweep(&unit, &x2, &a2, disc).max;
    let p_max = sweep(&unit, &x2, &a2, |_, x, a| coeffs(x, a)[0]).max;
    let r_max = sweep(&unit, &x2, &a2, |_, x, a| coeffs(x, a)[2]).max;
    let printed_disc = sweep(&unit, &x2, &a2, |_, x, a| {
        let [p, q, r] = periodic_coefficients(region, &env, x, a, true);
        q * q - 4.0 * p * r
    })
    .max;
    // The discriminant depends on the angle only.
    let disc_spread = {
        let mut spread = 0.0f64;
        for &a in &a2 {
            let vals: Vec<f64> = x2.iter().map(|&x| disc(0.0, x, a)).collect();
            let (lo_v, hi_v) = vals
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            spread = spread.max(hi_v - lo_v);
        }
        spread
    };

    // Domination on random pairs of the region: log M ≤ poly/(4s).
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dom_excess = f64::NEG_INFINITY;
    let mut kept = 0usize;
    let mut tries = 0usize;
    while kept < opts.samples && tries < 50 * opts.samples.max(1) {
        tries += 1;
        let x: [f64; 2] = [6.0 * (2.0 * rng.random::<f64>() - 1.0), 6.0 * (2.0 * rng.random::<f64>() - 1.0)];
        let y: [f64; 2] = [6.0 * (2.0 * rng.random::<f64>() - 1.0), 6.0 * (2.0 * rng.random::<f64>() - 1.0)];
        if classify_region_three(x, y) != label || x == [0.0, 0.0] || y == [0.0, 0.0] {
            continue;
        }
        kept += 1;
        let n = rng.random_range(0..opts.copies);
        let t = lo + (hi - lo) * rng.random::<f64>() + n as f64 * period;
        let sp = SParam::from_t(t)?;
        let nx = dot(x, x).sqrt();
        let ny = dot(y, y).sqrt();
        let a = wedge(x, y).atan2(dot(x, y));
        let [p, q, r] = coeffs(nx / ny, a);
        let value = ((p * sp.s + q) * sp.s + r) * nx * ny;
        dom_excess = dom_excess.max(log_m_quarter(&sp, theta, x, y) - value / (4.0 * sp.s));
    }

    let name = match region {
        PolyRegion::R2Periodic => "polynomial certificate, R2 periodic times",
        _ => "polynomial certificate, R3 periodic times",
    };
    let mut report = CertificationReport::new(name);
    report.stability_required = false;
    report.grid = vec![
        format!("t: I = [{lo}, {hi}] x{} in {} period copies", opts.s_steps + 1, opts.copies),
        format!("X: geometric [1e-3, 1e3] x{}", x1.len()),
        format!("angle: x{} inside the region", a1.len()),
        format!("samples: {} (seed {})", opts.samples, opts.seed),
    ];
    report.points = coarse.points;
    report.refined_points = fine.points;
    report.set_constants(coarse.max, fine.max);
    report.worst_ratio = coarse.max;
    report.diagnostics.insert("period".into(), period);
    report.diagnostics.insert("c0".into(), env.c0);
    report.diagnostics.insert("c1".into(), env.c1);
    report.diagnostics.insert("c2".into(), env.c2);
    report.diagnostics.insert("discriminant_max".into(), disc_max);
    report.diagnostics.insert("discriminant_x_spread".into(), disc_spread);
    report.diagnostics.insert("leading_coefficient_max".into(), p_max);
    report.diagnostics.insert("constant_term_max".into(), r_max);
    report.diagnostics.insert("domination_max_excess".into(), dom_excess);
    report.diagnostics.insert("sampled_pairs".into(), kept as f64);
    if region == PolyRegion::R3Periodic {
        report
            .diagnostics
            .insert("printed_sign_discriminant_max".into(), printed_disc);
    }
    report.regions.insert(
        label.to_string(),
        RegionSummary {
            points: coarse.points,
            worst: coarse.max,
        },
    );
    if fine.max > 0.0 {
        let (s, x, a) = fine.arg;
        report.add_violation(Violation {
            s,
            x: vec![x, a],
            y: vec![1.0, 0.0],
            ratio: fine.max,
        });
    }
    for (s, x, a, v) in coarse.rows {
        report.records.push(GridRecord {
            s,
            norm_x: x,
            norm_y: 1.0,
            angle: a,
            region: label.to_string(),
            kernel: v,
            bound: 0.0,
            ratio: v,
        });
    }
    report.finalize();
    report.passed = report.passed
        && coarse.max <= 0.0
        && fine.max <= 0.0
        && disc_max <= 0.0
        && p_max < 0.0
        && r_max < 0.0
        && (kept == 0 || dom_excess <= 1e-9);
    Ok(report)
}
