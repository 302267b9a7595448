//! Grid certification of pointwise kernel bounds.
//!
//! Every certifier evaluates a ratio on a base grid, takes its maximum as the
//! estimated constant, repeats on the grid with every axis doubled and checks
//! that the constant moved by at most [`STABILITY_TOL`]. Refined points above
//! (1 + tol)·C_base are listed as violations.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{invariant_measure, OuParams};
use crate::kernels::{plane, BlockSpec, GeneralKernel, SParam};
use crate::matrix::Matrix;
use crate::maximal::grid::{compass_maximize, directions, Axis};
use crate::maximal::regions::{classify_region_five, classify_region_three, local_region, RegionLabel};
use crate::maximal::report::{
    CertificationReport, GridRecord, RegionSummary, Violation, MAX_LISTED_VIOLATIONS, STABILITY_TOL,
};
use crate::maximal::timeset::{period_of, DEFAULT_COPIES};

/// Fraction of Q_s kept in the certified exponent.
pub const GLOBAL_EXPONENT: f64 = 1.0 / 40.0;
/// Fraction of Q_s absorbed into the auxiliary quantity M_s.
pub const AUX_EXPONENT: f64 = 9.0 / 40.0;
/// Default upper end of the small-time s range.
pub const DEFAULT_S_MAX: f64 = 0.05;
/// Default ε in I = [δ, (1 + ε)δ].
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default β and δ of the five-set decomposition.
pub const DEFAULT_BETA: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 0.05;
/// Envelope samples per period copy.
const ENVELOPE_SAMPLES: usize = 1000;
/// Slack for rounding in the trigonometric envelope checks.
const ENVELOPE_SLACK: f64 = 1e-12;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn angle_between(x: &[f64], y: &[f64]) -> f64 {
    let n = norm(x) * norm(y);
    if n == 0.0 {
        return 0.0;
    }
    let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    c.clamp(-1.0, 1.0).acos()
}

fn exceeds(value: f64, constant: f64) -> bool {
    value > constant * (1.0 + STABILITY_TOL)
}

// ---------------------------------------------------------------------------
// Local region
// ---------------------------------------------------------------------------

/// Grid for the local bound: x = m + w, y = m − w with |w| a fraction of
/// ½·min(1, 1/(2|m|)), so that every pair lies in L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalGrid {
    pub t: Axis,
    pub center_norm: Axis,
    pub offset_fraction: Axis,
    pub center_directions: usize,
    pub offset_directions: usize,
}

impl Default for LocalGrid {
    fn default() -> Self {
        Self {
            t: Axis::Geometric {
                lo: 1e-6,
                hi: 10.0,
                steps: 28,
            },
            center_norm: Axis::Uniform {
                lo: 0.0,
                hi: 6.0,
                steps: 12,
            },
            offset_fraction: Axis::Uniform {
                lo: 0.0,
                hi: 1.0,
                steps: 4,
            },
            center_directions: 8,
            offset_directions: 8,
        }
    }
}

impl LocalGrid {
    pub fn refined(&self) -> Self {
        Self {
            t: self.t.refined(),
            center_norm: self.center_norm.refined(),
            offset_fraction: self.offset_fraction.refined(),
            center_directions: 2 * self.center_directions,
            offset_directions: 2 * self.offset_directions,
        }
    }

    fn pairs(&self, dim: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mdirs = directions(dim, self.center_directions);
        let wdirs = directions(dim, self.offset_directions);
        let mut out = Vec::new();
        for &mn in &self.center_norm.points() {
            let half = 0.5 * (1.0f64).min(if mn > 0.0 { 1.0 / (2.0 * mn) } else { f64::INFINITY });
            for (i, md) in mdirs.iter().enumerate() {
                if mn == 0.0 && i > 0 {
                    continue;
                }
                for &frac in &self.offset_fraction.points() {
                    let wn = half * frac * (1.0 - 1e-12);
                    for (j, wd) in wdirs.iter().enumerate() {
                        if wn == 0.0 && j > 0 {
                            continue;
                        }
                        let x: Vec<f64> = md.iter().zip(wd).map(|(a, b)| mn * a + wn * b).collect();
                        let y: Vec<f64> = md.iter().zip(wd).map(|(a, b)| mn * a - wn * b).collect();
                        out.push((x, y));
                    }
                }
            }
        }
        out
    }

    fn describe(&self) -> Vec<String> {
        vec![
            format!("t: {}", self.t.describe()),
            format!("|m|: {}", self.center_norm.describe()),
            format!("|w| fraction: {}", self.offset_fraction.describe()),
            format!("center directions: {}", self.center_directions),
            format!("offset directions: {}", self.offset_directions),
        ]
    }
}

struct LocalPass {
    worst: f64,
    arg: (f64, Vec<f64>, Vec<f64>),
    points: usize,
    rows: Vec<GridRecord>,
    above: Vec<Violation>,
}

fn local_pass(
    params: &OuParams,
    grid: &LocalGrid,
    c: f64,
    threshold: Option<f64>,
    keep_rows: bool,
) -> Result<LocalPass> {
    let d = params.dim();
    let pairs = grid.pairs(d);
    let gi = invariant_measure(params)?;
    let times = grid.t.points();
    let per_t: Result<Vec<_>> = times
        .par_iter()
        .map(|&t| {
            let k = GeneralKernel::new(params, t)?;
            let one_m = -(-t).exp_m1();
            let mut best = (f64::NEG_INFINITY, 0usize, 0.0, 0.0);
            let mut above = Vec::new();
            for (idx, (x, y)) in pairs.iter().enumerate() {
                let diff_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let log_h = k.log_eval(x, y)?;
                let log_bound = -0.5 * d as f64 * one_m.ln() - gi.log_density(y) - c * diff_sq / one_m;
                let lr = log_h - log_bound;
                if lr > best.0 {
                    best = (lr, idx, log_h, log_bound);
                }
                if let Some(th) = threshold {
                    if exceeds(lr.exp(), th) {
                        above.push(Violation {
                            s: SParam::from_t(t)?.s,
                            x: x.clone(),
                            y: y.clone(),
                            ratio: lr.exp(),
                        });
                    }
                }
            }
            Ok((t, best, above))
        })
        .collect();
    let per_t = per_t?;
    let mut out = LocalPass {
        worst: f64::NEG_INFINITY,
        arg: (0.0, Vec::new(), Vec::new()),
        points: pairs.len() * times.len(),
        rows: Vec::new(),
        above: Vec::new(),
    };
    for (t, (lr, idx, lh, lb), above) in per_t {
        let (x, y) = &pairs[idx];
        if lr > out.worst {
            out.worst = lr;
            out.arg = (t, x.clone(), y.clone());
        }
        if keep_rows {
            out.rows.push(GridRecord {
                s: SParam::from_t(t)?.s,
                norm_x: norm(x),
                norm_y: norm(y),
                angle: angle_between(x, y),
                region: RegionLabel::Local.to_string(),
                kernel: lh.exp(),
                bound: lb.exp(),
                ratio: lr.exp(),
            });
        }
        out.above.extend(above);
    }
    Ok(out)
}

/// Certifies h_t(x, y) ≤ C (1 − e^{−t})^{−d/2} γ∞(y)⁻¹ exp(−c|x − y|²/(1 − e^{−t}))
/// on L, where γ∞(y) is the Lebesgue density of the invariant measure.
///
/// The rate c is half of inf_t (1 − e^{−t})/(2 λ_max(Q_t)) over the time grid,
/// the largest Gaussian rate the transition density can support, halved so that
/// the drift of the mean is absorbed. C is the worst ratio.
pub fn certify_local_bound(params: &OuParams, grid: &LocalGrid, keep_records: bool) -> Result<CertificationReport> {
    let times = grid.t.points();
    if times.is_empty() || grid.center_directions == 0 || grid.offset_directions == 0 {
        return Err(Error::InvalidInput("local grid is empty".into()));
    }
    if times.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidInput("local grid times must be positive".into()));
    }
    let mut rate = f64::INFINITY;
    for &t in &times {
        let k = GeneralKernel::new(params, t)?;
        let lam = SymmetricEigen::new(k.noise().sigma().clone())
            .eigenvalues
            .max();
        rate = rate.min(-(-t).exp_m1() / (2.0 * lam));
    }
    let c = 0.5 * rate;

    let coarse = local_pass(params, grid, c, None, keep_records)?;
    let constant = coarse.worst.exp();
    let refined_grid = grid.refined();
    let fine = local_pass(params, &refined_grid, c, Some(constant), false)?;

    let mut report = CertificationReport::new("local bound");
    report.grid = grid.describe();
    report.points = coarse.points;
    report.refined_points = fine.points;
    report.worst_ratio = constant;
    report.set_constants(constant, fine.worst.exp());
    for v in fine.above {
        report.add_violation(v);
    }
    report.regions.insert(
        RegionLabel::Local.to_string(),
        RegionSummary {
            points: coarse.points,
            worst: constant,
        },
    );
    report.diagnostics.insert("rate_c".into(), c);
    report.diagnostics.insert("worst_t".into(), coarse.arg.0);
    report.diagnostics.insert("worst_norm_x".into(), norm(&coarse.arg.1));
    report.diagnostics.insert("worst_norm_y".into(), norm(&coarse.arg.2));
    report.diagnostics.insert(
        "all_pairs_local".into(),
        f64::from(u8::from(grid.pairs(params.dim()).iter().all(|(x, y)| local_region(x, y)))),
    );
    report.records = coarse.rows;
    report.finalize();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Global region: per-plane quantity M_s
// ---------------------------------------------------------------------------

/// Spatial grid of one plane: ξ = (r₁, 0), η = r₂(cos φ, sin φ). The quantities
/// certified in a plane are invariant under joint rotations, so one angle suffices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneGrid {
    pub radius: Axis,
    pub angle: Axis,
}

impl Default for PlaneGrid {
    fn default() -> Self {
        Self {
            radius: Axis::Uniform {
                lo: 0.0,
                hi: 6.0,
                steps: 24,
            },
            angle: Axis::Periodic {
                start: -std::f64::consts::PI,
                steps: 64,
            },
        }
    }
}

impl PlaneGrid {
    pub fn refined(&self) -> Self {
        Self {
            radius: self.radius.refined(),
            angle: self.angle.refined(),
        }
    }

    fn len(&self) -> usize {
        let r = self.radius.len();
        r * r * self.angle.len()
    }
}

/// Coefficients of log k_{τ(s)θ} and of the Q_s split at one value of s.
#[derive(Debug, Clone, Copy)]
struct PlaneCoefficients {
    s: SParam,
    /// Multiplier of ⟨ξ, η⟩ in −log k.
    cos_part: f64,
    /// Multiplier of ξ∧η in −log k.
    sin_part: f64,
}

impl PlaneCoefficients {
    fn new(s: SParam, theta: f64) -> Self {
        let t = s.t();
        let half = (t * theta / 2.0).sin();
        let inv = s.inv_sinh_t();
        Self {
            s,
            cos_part: inv * 2.0 * half * half,
            sin_part: inv * (t * theta).sin(),
        }
    }

    fn q_s(&self, r1: f64, r2: f64, c: f64) -> f64 {
        let (p, m) = (self.s.one_plus, self.s.one_minus);
        p * p * r1 * r1 - 2.0 * p * m * r1 * r2 * c + m * m * r2 * r2
    }

    /// (log M_s, log of the plane ratio h/bound) at ξ = (r₁, 0), η = r₂(c, sn).
    fn evaluate(&self, r1: f64, r2: f64, c: f64, sn: f64) -> (f64, f64) {
        let q = self.q_s(r1, r2, c);
        let log_k = -self.cos_part * r1 * r2 * c - self.sin_part * r1 * r2 * sn;
        let log_m = -AUX_EXPONENT * q / self.s.s + log_k;
        let log_ratio = 2.0 * (self.s.one_plus / 2.0).ln() + log_m;
        (log_m, log_ratio)
    }

    /// Largest eigenvalue of the quadratic form (ξ, η) ↦ log M_s on ℝ⁴.
    fn form_max_eigenvalue(&self) -> f64 {
        let k = AUX_EXPONENT / self.s.s;
        let (p, m) = (self.s.one_plus, self.s.one_minus);
        let mut a = Matrix::zeros(4, 4);
        for i in 0..2 {
            a[(i, i)] = -k * p * p;
            a[(i + 2, i + 2)] = -k * m * m;
            let off = k * p * m - self.cos_part / 2.0;
            a[(i, i + 2)] = off;
            a[(i + 2, i)] = off;
        }
        // −(sin_part)·(ξ₁η₂ − ξ₂η₁).
        let w = -self.sin_part / 2.0;
        a[(0, 3)] += w;
        a[(3, 0)] += w;
        a[(1, 2)] -= w;
        a[(2, 1)] -= w;
        SymmetricEigen::new(a).eigenvalues.max()
    }
}

#[derive(Clone, Copy)]
enum Decomposition {
    Five { beta: f64, delta: f64 },
    Three,
}

impl Decomposition {
    fn label(&self, xi: [f64; 2], eta: [f64; 2]) -> RegionLabel {
        match *self {
            Decomposition::Five { beta, delta } => {
                classify_region_five(xi, eta, beta, delta).expect("validated parameters")
            }
            Decomposition::Three => classify_region_three(xi, eta),
        }
    }

    fn labels(&self) -> &'static [RegionLabel] {
        match self {
            Decomposition::Five { .. } => &[
                RegionLabel::R1,
                RegionLabel::R2,
                RegionLabel::R3,
                RegionLabel::R4,
                RegionLabel::R5,
            ],
            Decomposition::Three => &[RegionLabel::R1, RegionLabel::R2, RegionLabel::R3],
        }
    }

    fn index(&self, l: RegionLabel) -> usize {
        self.labels().iter().position(|&v| v == l).expect("label of this decomposition")
    }
}

/// Locates s-values for the local search that polishes a grid maximum.
#[derive(Debug, Clone, Copy)]
enum TimeWindow {
    /// Coordinate ln s on [ln lo, ln hi].
    LogS { lo: f64, hi: f64 },
    /// Coordinate t on the copy [lo + nP, hi + nP] holding the start point.
    Copies { lo: f64, hi: f64, period: f64 },
}

impl TimeWindow {
    /// (coordinate, lower end, upper end) of `sp`.
    fn bracket(&self, sp: SParam) -> (f64, f64, f64) {
        match *self {
            TimeWindow::LogS { lo, hi } => (sp.s.ln(), lo.ln(), hi.ln()),
            TimeWindow::Copies { lo, hi, period } => {
                let t = sp.t();
                let n = ((t - lo) / period + 1e-9).floor().max(0.0);
                (t, lo + n * period, hi + n * period)
            }
        }
    }

    fn sparam(&self, u: f64) -> Option<SParam> {
        match self {
            TimeWindow::LogS { .. } => SParam::from_s(u.exp()).ok(),
            TimeWindow::Copies { .. } => SParam::from_t(u).ok(),
        }
    }
}

/// Grid maxima polished by local search, per plane.
const POLISH_STARTS: usize = 8;
/// Relative step at which the local search stops.
const POLISH_TOL: f64 = 1e-9;
/// Refined-grid violations stored per s-value; the rest are only counted.
const EXAMPLES_PER_S: usize = 4;

/// Per-s best point of a plane scan.
#[derive(Debug, Clone, Copy)]
struct PlaneBest {
    sp: SParam,
    log_m: f64,
    log_ratio: f64,
    r1: f64,
    r2: f64,
    angle: f64,
}

#[derive(Debug, Clone)]
struct PlaneScan {
    per_s: Vec<PlaneBest>,
    points: usize,
    max_eigenvalue: f64,
    regions: Vec<(RegionLabel, usize, f64)>,
    violation_count: usize,
    violations: Vec<Violation>,
}

impl PlaneScan {
    fn best(&self) -> PlaneBest {
        *self
            .per_s
            .iter()
            .max_by(|a, b| a.log_m.total_cmp(&b.log_m))
            .expect("at least one s-value")
    }

    fn log_ratio(&self) -> f64 {
        self.per_s.iter().map(|b| b.log_ratio).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scans log M_s over the s-values and the plane grid. Region labels do not depend
/// on s, so they are computed once. Points with log M_s above `threshold` are
/// reported as violations.
fn plane_scan(
    theta: f64,
    s_values: &[SParam],
    grid: &PlaneGrid,
    decomposition: Option<Decomposition>,
    threshold: Option<f64>,
) -> PlaneScan {
    let radii = grid.radius.points();
    let angles = grid.angle.points();
    let trig: Vec<(f64, f64)> = angles.iter().map(|a| (a.cos(), a.sin())).collect();
    let (nr, na) = (radii.len(), angles.len());
    let labels: Option<Vec<usize>> = decomposition.map(|dec| {
        let mut out = Vec::with_capacity(nr * nr * na);
        for &r1 in &radii {
            for &r2 in &radii {
                for &(c, sn) in &trig {
                    out.push(dec.index(dec.label([r1, 0.0], [r2 * c, r2 * sn])));
                }
            }
        }
        out
    });
    let nlabels = decomposition.map_or(0, |d| d.labels().len());

    let per_s: Vec<_> = s_values
        .par_iter()
        .map(|&sp| {
            let pc = PlaneCoefficients::new(sp, theta);
            let k = AUX_EXPONENT / sp.s;
            let (p, m) = (sp.one_plus, sp.one_minus);
            let cross = 2.0 * k * p * m - pc.cos_part;
            let shift = 2.0 * (p / 2.0).ln();
            let mut best = (f64::NEG_INFINITY, 0usize, 0usize, 0usize);
            let mut regions = vec![(0usize, f64::NEG_INFINITY); nlabels];
            let mut count = 0usize;
            let mut examples = Vec::new();
            for (i1, &r1) in radii.iter().enumerate() {
                for (i2, &r2) in radii.iter().enumerate() {
                    let base = -k * (p * p * r1 * r1 + m * m * r2 * r2);
                    let bc = cross * r1 * r2;
                    let bs = -pc.sin_part * r1 * r2;
                    let offset = (i1 * nr + i2) * na;
                    for (a, &(c, sn)) in trig.iter().enumerate() {
                        let lm = base + bc * c + bs * sn;
                        if lm > best.0 {
                            best = (lm, i1, i2, a);
                        }
                        if let Some(l) = &labels {
                            let slot = &mut regions[l[offset + a]];
                            slot.0 += 1;
                            slot.1 = slot.1.max(lm);
                        }
                        if threshold.is_some_and(|th| lm > th) {
                            count += 1;
                            if examples.len() < EXAMPLES_PER_S {
                                examples.push(Violation {
                                    s: sp.s,
                                    x: vec![r1, 0.0],
                                    y: vec![r2 * c, r2 * sn],
                                    ratio: lm.exp(),
                                });
                            }
                        }
                    }
                }
            }
            let b = PlaneBest {
                sp,
                log_m: best.0,
                log_ratio: best.0 + shift,
                r1: radii[best.1],
                r2: radii[best.2],
                angle: angles[best.3],
            };
            (b, regions, count, examples, pc.form_max_eigenvalue())
        })
        .collect();

    let mut out = PlaneScan {
        per_s: Vec::with_capacity(per_s.len()),
        points: s_values.len() * grid.len(),
        max_eigenvalue: f64::NEG_INFINITY,
        regions: decomposition
            .map(|d| d.labels().iter().map(|&l| (l, 0, f64::NEG_INFINITY)).collect())
            .unwrap_or_default(),
        violation_count: 0,
        violations: Vec::new(),
    };
    for (b, regions, count, examples, eig) in per_s {
        out.per_s.push(b);
        out.max_eigenvalue = out.max_eigenvalue.max(eig);
        for (slot, (n, w)) in out.regions.iter_mut().zip(regions) {
            slot.1 += n;
            slot.2 = slot.2.max(w);
        }
        out.violation_count += count;
        out.violations.extend(examples);
    }
    out
}

/// Polishes the best per-s grid points by a bounded local search over
/// (time coordinate, r₁, r₂, φ). Returns the best (log M_s, log ratio, point).
fn polish_plane(
    theta: f64,
    scan: &PlaneScan,
    grid: &PlaneGrid,
    window: TimeWindow,
    time_step: f64,
) -> (f64, f64, PlaneBest) {
    let (r_lo, r_hi) = axis_range(&grid.radius);
    let r_step = (r_hi - r_lo) / grid.radius.len().saturating_sub(1).max(1) as f64;
    let a_step = std::f64::consts::TAU / grid.angle.len().max(1) as f64;
    let mut starts = scan.per_s.clone();
    starts.sort_by(|a, b| b.log_m.total_cmp(&a.log_m));
    starts.truncate(POLISH_STARTS);
    let polished: Vec<PlaneBest> = starts
        .par_iter()
        .map(|b| {
            let (u0, u_lo, u_hi) = window.bracket(b.sp);
            let f = |v: &[f64]| match window.sparam(v[0]) {
                Some(sp) => PlaneCoefficients::new(sp, theta).evaluate(v[1], v[2], v[3].cos(), v[3].sin()).0,
                None => f64::NEG_INFINITY,
            };
            let lower = [u_lo, r_lo, r_lo, -2.0 * std::f64::consts::TAU];
            let upper = [u_hi, r_hi, r_hi, 2.0 * std::f64::consts::TAU];
            let start = [u0.clamp(u_lo, u_hi), b.r1, b.r2, b.angle];
            let steps = [time_step, r_step, r_step, a_step];
            let (v, lm) = compass_maximize(f, &start, &lower, &upper, &steps, POLISH_TOL);
            let sp = window.sparam(v[0]).unwrap_or(b.sp);
            let lr = PlaneCoefficients::new(sp, theta).evaluate(v[1], v[2], v[3].cos(), v[3].sin()).1;
            let angle = (v[3] + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            PlaneBest {
                sp,
                log_m: lm,
                log_ratio: lr,
                r1: v[1],
                r2: v[2],
                angle,
            }
        })
        .collect();
    let grid_best = scan.best();
    let mut best = grid_best;
    let mut log_ratio = scan.log_ratio();
    for p in polished {
        if p.log_m > best.log_m {
            best = p;
        }
        log_ratio = log_ratio.max(p.log_ratio);
    }
    (best.log_m, log_ratio, best)
}

fn axis_range(axis: &Axis) -> (f64, f64) {
    match *axis {
        Axis::Uniform { lo, hi, .. } | Axis::Geometric { lo, hi, .. } => (lo, hi),
        Axis::Periodic { start, .. } => (start, start + std::f64::consts::TAU),
    }
}

fn plane_records(theta: f64, scan: &PlaneScan, decomposition: Decomposition) -> Vec<GridRecord> {
    scan.per_s
        .iter()
        .map(|b| {
            let sp = b.sp;
            let xi = [b.r1, 0.0];
            let eta = [b.r2 * b.angle.cos(), b.r2 * b.angle.sin()];
            let log_kernel = sp.log_kernel_symmetric(&xi, &eta) + sp.log_factor(theta, xi, eta);
            let log_bound = -sp.s.ln() + b.r1 * b.r1 - GLOBAL_EXPONENT * sp.quadratic_form(&xi, &eta) / sp.s;
            GridRecord {
                s: sp.s,
                norm_x: b.r1,
                norm_y: b.r2,
                angle: b.angle,
                region: decomposition.label(xi, eta).to_string(),
                kernel: log_kernel.exp(),
                bound: log_bound.exp(),
                ratio: (log_kernel - log_bound).exp(),
            }
        })
        .collect()
}

/// Distinct nonzero speeds with their multiplicities.
fn distinct_speeds(spec: &BlockSpec) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &th in spec.theta().iter().filter(|&&t| t > 0.0) {
        match out.iter_mut().find(|(v, _)| *v == th) {
            Some(slot) => slot.1 += 1,
            None => out.push((th, 1)),
        }
    }
    out
}

/// Spatial grid and random spot checks of the global certifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalGrid {
    pub s_per_decade: usize,
    pub s_min: f64,
    pub plane: PlaneGrid,
    pub spot_checks: usize,
    pub seed: u64,
}

impl Default for GlobalGrid {
    fn default() -> Self {
        Self {
            s_per_decade: 200,
            s_min: 1e-6,
            plane: PlaneGrid::default(),
            spot_checks: 20_000,
            seed: 7,
        }
    }
}

struct GlobalOutcome {
    constant: f64,
    refined_constant: f64,
    worst_ratio: f64,
    points: usize,
    refined_points: usize,
    max_eigenvalue: f64,
    violation_count: usize,
    violations: Vec<Violation>,
    rows: Vec<GridRecord>,
    regions: Vec<(RegionLabel, usize, f64)>,
    per_speed: Vec<(f64, f64, PlaneBest)>,
}

/// Both passes for every distinct speed. Each plane constant is the larger of the
/// grid maximum and the polished maximum; the refined pass repeats this on the
/// doubled grid and flags refined points above (1 + tol) times the base constant.
#[allow(clippy::too_many_arguments)]
fn certify_planes(
    spec: &BlockSpec,
    coarse_s: &[SParam],
    fine_s: &[SParam],
    grid: &GlobalGrid,
    window: TimeWindow,
    time_step: f64,
    decomposition: Decomposition,
    keep_rows: bool,
) -> GlobalOutcome {
    let speeds = distinct_speeds(spec);
    let mut out = GlobalOutcome {
        constant: 1.0,
        refined_constant: 1.0,
        worst_ratio: 1.0,
        points: 0,
        refined_points: 0,
        max_eigenvalue: f64::NEG_INFINITY,
        violation_count: 0,
        violations: Vec::new(),
        rows: Vec::new(),
        regions: Vec::new(),
        per_speed: Vec::new(),
    };
    let fine_grid = grid.plane.refined();
    for (i, &(theta, mult)) in speeds.iter().enumerate() {
        let coarse = plane_scan(theta, coarse_s, &grid.plane, Some(decomposition), None);
        let (log_c, log_r, arg) = polish_plane(theta, &coarse, &grid.plane, window, time_step);
        let threshold = log_c + STABILITY_TOL.ln_1p();
        let fine = plane_scan(theta, fine_s, &fine_grid, None, Some(threshold));
        let (log_fine, _, _) = polish_plane(theta, &fine, &fine_grid, window, 0.5 * time_step);
        let mult = mult as f64;
        out.constant *= (mult * log_c).exp();
        out.refined_constant *= (mult * log_fine).exp();
        out.worst_ratio *= (mult * log_r).exp();
        out.points += coarse.points;
        out.refined_points += fine.points;
        out.max_eigenvalue = out.max_eigenvalue.max(coarse.max_eigenvalue);
        out.violation_count += fine.violation_count;
        out.violations.extend(fine.violations.iter().take(MAX_LISTED_VIOLATIONS).cloned());
        out.per_speed.push((theta, log_c.exp(), arg));
        if out.regions.is_empty() {
            out.regions = coarse.regions.clone();
        } else {
            for (slot, r) in out.regions.iter_mut().zip(&coarse.regions) {
                slot.1 += r.1;
                slot.2 = slot.2.max(r.2);
            }
        }
        if keep_rows && i == 0 {
            out.rows = plane_records(theta, &coarse, decomposition);
        }
    }
    if speeds.is_empty() {
        // No rotating plane: M_s = e^{−9Q_s/(40s)} ≤ 1 with equality on the diagonal.
        out.max_eigenvalue = 0.0;
    }
    out
}

/// Random d-dimensional checks of h_{τ(s)} ≤ C·s^{−d/2}e^{|x|² − Q_s/(40s)} and M_s ≤ C,
/// with every plane of x and y inside the certified radius.
fn spot_checks(
    spec: &BlockSpec,
    s_values: &[SParam],
    radius: f64,
    constant: f64,
    count: usize,
    seed: u64,
) -> (f64, f64, Vec<Violation>) {
    let d = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_m = f64::NEG_INFINITY;
    let mut found = Vec::new();
    for _ in 0..count {
        let sp = s_values[rng.random_range(0..s_values.len())];
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut v = vec![0.0; d];
            for j in 0..d.div_ceil(2) {
                let r = radius * rng.random::<f64>().sqrt();
                let a = std::f64::consts::TAU * rng.random::<f64>();
                v[2 * j] = r * a.cos();
                if 2 * j + 1 < d {
                    v[2 * j + 1] = r * a.sin();
                } else {
                    v[2 * j] = r * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            v
        };
        let x = draw(&mut rng);
        // Half of the checks put y near x, where M_s is largest.
        let y = if rng.random::<bool>() {
            draw(&mut rng)
        } else {
            x.iter().map(|v| v * (1.0 + 0.2 * (rng.random::<f64>() - 0.5))).collect()
        };
        let log_kernel = sp.log_kernel_block(spec, &x, &y);
        let q = sp.quadratic_form(&x, &y);
        let log_bound = -0.5 * d as f64 * sp.s.ln() + x.iter().map(|v| v * v).sum::<f64>()
            - GLOBAL_EXPONENT * q / sp.s;
        let mut log_m = -AUX_EXPONENT * q / sp.s;
        for (j, &th) in spec.theta().iter().enumerate() {
            log_m += sp.log_factor(th, plane(&x, j), plane(&y, j));
        }
        let lr = log_kernel - log_bound;
        worst_ratio = worst_ratio.max(lr);
        worst_m = worst_m.max(log_m);
        if exceeds(lr.exp(), constant) || exceeds(log_m.exp(), constant) {
            found.push(Violation {
                s: sp.s,
                x,
                y,
                ratio: lr.exp().max(log_m.exp()),
            });
        }
    }
    (worst_ratio.exp(), worst_m.exp(), found)
}

fn fill_global_report(
    report: &mut CertificationReport,
    spec: &BlockSpec,
    outcome: GlobalOutcome,
    coarse_s: &[SParam],
    grid: &GlobalGrid,
) {
    report.points = outcome.points;
    report.refined_points = outcome.refined_points;
    report.set_constants(outcome.constant, outcome.refined_constant);
    report.worst_ratio = outcome.worst_ratio;
    let listed = outcome.violations.len();
    for v in outcome.violations {
        report.add_violation(v);
    }
    report.violation_count += outcome.violation_count.saturating_sub(listed);
    for (label, n, w) in &outcome.regions {
        report.regions.insert(
            label.to_string(),
            RegionSummary {
                points: *n,
                worst: w.exp(),
            },
        );
    }
    for (j, (theta, c, arg)) in outcome.per_speed.iter().enumerate() {
        report.diagnostics.insert(format!("theta_{j}"), *theta);
        report.diagnostics.insert(format!("constant_theta_{j}"), *c);
        report.diagnostics.insert(format!("argmax_s_{j}"), arg.sp.s);
        report.diagnostics.insert(format!("argmax_norm_x_{j}"), arg.r1);
        report.diagnostics.insert(format!("argmax_norm_y_{j}"), arg.r2);
        report.diagnostics.insert(format!("argmax_angle_{j}"), arg.angle);
    }
    report
        .diagnostics
        .insert("max_quadratic_form_eigenvalue".into(), outcome.max_eigenvalue);
    report.records = outcome.rows;

    let radius = axis_range(&grid.plane.radius).1;
    let (sr, sm, found) = spot_checks(spec, coarse_s, radius, report.constant, grid.spot_checks, grid.seed);
    if grid.spot_checks > 0 {
        report.diagnostics.insert("spot_check_worst_ratio".into(), sr);
        report.diagnostics.insert("spot_check_worst_m".into(), sm);
        report.worst_ratio = report.worst_ratio.max(sr);
    }
    for v in found {
        report.add_violation(v);
    }
    if outcome.max_eigenvalue > 0.0 {
        report.notes.push(
            "log M_s has a positive quadratic direction on R^2 x R^2, so the constant \
             holds on the bounded grid only and grows with the grid radius"
                .into(),
        );
    }
}

fn small_time_s(s_min: f64, s_max: f64, per_decade: usize) -> Result<Vec<SParam>> {
    Axis::per_decade(s_min, s_max, per_decade)?
        .points()
        .into_iter()
        .map(SParam::from_s)
        .collect()
}

/// sup over (0, s0] of the two normalized trigonometric factors of k_{τ(s)θ}, in
/// the convention of the 1/(4s) exponent: returns (C₂, c₀) with
/// C₂ = sup (1 − s²)|sin τθ|/(4s) and c₀ = inf (1 − s²)(1 − cos τθ)/(θ²s²).
pub fn small_time_trig_constants(theta: f64, s0: f64) -> Result<(f64, f64)> {
    let axis = Axis::per_decade(1e-8, s0, 400)?;
    let (mut c2, mut c0) = (0.0f64, f64::INFINITY);
    for s in axis.points() {
        let sp = SParam::from_s(s)?;
        let t = sp.t();
        let w = sp.one_minus * sp.one_plus;
        c2 = c2.max(w * (t * theta).sin().abs() / (4.0 * s));
        c0 = c0.min(w * 2.0 * (t * theta / 2.0).sin().powi(2) / (theta * theta * s * s));
    }
    Ok((c2, c0))
}

/// Certifies h_{τ(s)}(x, y) ≤ C s^{−d/2} e^{|x|² − Q_s(x,y)/(40s)} for s ≤ s_max
/// through M_s(x, y) = e^{−9Q_s/(40s)} Π_j k_{τ(s)θ_j}(ξ_j, η_j) ≤ C.
///
/// Each rotating plane is certified separately on ξ = (r₁, 0), η = r₂(cos φ, sin φ)
/// with r₁, r₂ ≤ the grid radius, and C is the product of the plane constants.
/// Since h_{τ(s)} = ((1 + s)/2)^d s^{−d/2} e^{|x|² − Q_s/(40s)} M_s, the kernel
/// ratio never exceeds C.
pub fn certify_global_small_time(
    spec: &BlockSpec,
    s_max: f64,
    grid: &GlobalGrid,
    keep_records: bool,
) -> Result<CertificationReport> {
    if !(s_max > 0.0 && s_max < 1.0) {
        return Err(Error::Domain(format!("s_max must lie in (0, 1), got {s_max}")));
    }
    if !(grid.s_min > 0.0 && grid.s_min < s_max) {
        return Err(Error::InvalidInput(format!(
            "s_min must lie in (0, s_max), got {}",
            grid.s_min
        )));
    }
    let coarse_s = small_time_s(grid.s_min, s_max, grid.s_per_decade)?;
    let fine_s = small_time_s(grid.s_min, s_max, 2 * grid.s_per_decade)?;
    let decomposition = Decomposition::Five {
        beta: DEFAULT_BETA,
        delta: DEFAULT_DELTA,
    };
    let window = TimeWindow::LogS {
        lo: grid.s_min,
        hi: s_max,
    };
    let time_step = std::f64::consts::LN_10 / grid.s_per_decade.max(1) as f64;
    let outcome = certify_planes(spec, &coarse_s, &fine_s, grid, window, time_step, decomposition, keep_records);

    let mut report = CertificationReport::new("global bound, small times");
    report.grid = vec![
        format!("s: geometric [{:e}, {s_max}], {} per decade", grid.s_min, grid.s_per_decade),
        format!("plane radii: {}", grid.plane.radius.describe()),
        format!("plane angles: {}", grid.plane.angle.describe()),
        format!("spot checks: {} (seed {})", grid.spot_checks, grid.seed),
    ];
    report.diagnostics.insert("s_max".into(), s_max);
    let speeds = distinct_speeds(spec);
    if let Some(&(th, _)) = speeds.iter().max_by(|a, b| a.0.total_cmp(&b.0)) {
        let (c2, _) = small_time_trig_constants(th, s_max)?;
        let (b, dl) = (DEFAULT_BETA, DEFAULT_DELTA);
        let bound = (9.0 * b / (40.0 * c2))
            .min(9.0 * b * b / (40.0 * c2 + 18.0))
            .min(9.0 * dl * dl / (40.0 * c2 + 18.0));
        report.diagnostics.insert("proof_s0_bound".into(), bound);
        if s_max > bound {
            report.notes.push(format!(
                "s_max = {s_max} exceeds {bound:.3e}, the smallness used by the analytic \
                 argument in the sectors R3 and R4; the grid constant covers these sectors directly"
            ));
        }
    }
    fill_global_report(&mut report, spec, outcome, &coarse_s, grid);
    report.finalize();
    Ok(report)
}

/// Envelope constants of one speed over I = [δ, (1 + ε)δ].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub theta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Envelope {
    pub fn new(theta: f64, delta: f64, epsilon: f64) -> Self {
        let u = delta * theta;
        Self {
            theta,
            c0: 5.0 / 12.0 * u * u,
            c1: (1.0 + epsilon) * u,
            c2: (1.0 + epsilon).powi(2) * u * u / 2.0,
        }
    }
}

/// Options of the periodic certifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicOptions {
    pub epsilon: f64,
    pub copies: usize,
    /// Points of the I-grid, refined by doubling.
    pub interval_steps: usize,
    pub grid: GlobalGrid,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            copies: DEFAULT_COPIES,
            interval_steps: 16,
            grid: GlobalGrid::default(),
        }
    }
}

/// δ = min(1/θ_max, 1/10) and I = [δ, (1 + ε)δ].
pub fn periodic_interval(spec: &BlockSpec, epsilon: f64) -> Option<(f64, f64)> {
    let th = spec.theta().iter().copied().fold(0.0, f64::max);
    (th > 0.0).then(|| {
        let delta = (1.0 / th).min(0.1);
        (delta, (1.0 + epsilon) * delta)
    })
}

fn periodic_s(lo: f64, hi: f64, steps: usize, period: f64, copies: usize) -> Result<Vec<SParam>> {
    let base = Axis::uniform(lo, hi, steps.max(1))?.points();
    let mut out = Vec::with_capacity(base.len() * copies);
    for n in 0..copies {
        for &t in &base {
            out.push(SParam::from_t(t + n as f64 * period)?);
        }
    }
    Ok(out)
}

/// Certifies the global bound for s ∈ τ⁻¹(I_P^♯), I_P^♯ truncated to `copies` periods.
///
/// First checks c₀ ≤ 1 − cos θt ≤ c₂ and sin θt ≤ c₁ at 10³ points of every copy
/// of I for every nonzero speed, then certifies M_s ≤ C as in the small-time case.
pub fn certify_global_periodic(
    spec: &BlockSpec,
    options: &PeriodicOptions,
    keep_records: bool,
) -> Result<CertificationReport> {
    let mut report = CertificationReport::new("global bound, periodic times");
    if !(options.epsilon > 0.0 && options.epsilon <= 0.1) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 0.1], got {}",
            options.epsilon
        )));
    }
    if options.copies == 0 {
        return Err(Error::InvalidInput("at least one period copy is required".into()));
    }
    if spec.theta().iter().all(|&t| t == 0.0) {
        report.notes.push("no rotating plane: the bound holds with C = 1".into());
        report.set_constants(1.0, 1.0);
        report.worst_ratio = 1.0;
        report.finalize();
        return Ok(report);
    }
    let period = period_of(spec).ok_or_else(|| {
        Error::Precondition("the rotation group is not periodic (speeds are incommensurable)".into())
    })?;
    let (lo, hi) = periodic_interval(spec, options.epsilon).expect("nonzero speed");
    let delta = lo;

    let mut envelope_failures = 0usize;
    for (j, (theta, _)) in distinct_speeds(spec).into_iter().enumerate() {
        let env = Envelope::new(theta, delta, options.epsilon);
        for n in 0..options.copies {
            for k in 0..ENVELOPE_SAMPLES {
                let t = lo + (hi - lo) * k as f64 / (ENVELOPE_SAMPLES - 1) as f64 + n as f64 * period;
                let one_minus_cos = 1.0 - (theta * t).cos();
                let sin = (theta * t).sin();
                if one_minus_cos < env.c0 - ENVELOPE_SLACK
                    || one_minus_cos > env.c2 + ENVELOPE_SLACK
                    || sin > env.c1 + ENVELOPE_SLACK
                {
                    envelope_failures += 1;
                    report.add_violation(Violation {
                        s: SParam::from_t(t)?.s,
                        x: Vec::new(),
                        y: Vec::new(),
                        ratio: f64::NAN,
                    });
                }
            }
        }
        report.diagnostics.insert(format!("envelope_c0_{j}"), env.c0);
        report.diagnostics.insert(format!("envelope_c1_{j}"), env.c1);
        report.diagnostics.insert(format!("envelope_c2_{j}"), env.c2);
    }

    let coarse_s = periodic_s(lo, hi, options.interval_steps, period, options.copies)?;
    let fine_s = periodic_s(lo, hi, 2 * options.interval_steps, period, options.copies)?;
    let window = TimeWindow::Copies { lo, hi, period };
    let time_step = (hi - lo) / options.interval_steps.max(1) as f64;
    let outcome = certify_planes(
        spec,
        &coarse_s,
        &fine_s,
        &options.grid,
        window,
        time_step,
        Decomposition::Three,
        keep_records,
    );

    report.grid = vec![
        format!(
            "t: I = [{lo}, {hi}] with {} points, {} period copies",
            options.interval_steps + 1,
            options.copies
        ),
        format!("plane radii: {}", options.grid.plane.radius.describe()),
        format!("plane angles: {}", options.grid.plane.angle.describe()),
        format!("spot checks: {} (seed {})", options.grid.spot_checks, options.grid.seed),
    ];
    report.diagnostics.insert("period".into(), period);
    report.diagnostics.insert("delta".into(), delta);
    report.diagnostics.insert("epsilon".into(), options.epsilon);
    report.diagnostics.insert("copies".into(), options.copies as f64);
    report
        .diagnostics
        .insert("envelope_samples".into(), (ENVELOPE_SAMPLES * options.copies) as f64);
    report
        .diagnostics
        .insert("envelope_failures".into(), envelope_failures as f64);
    fill_global_report(&mut report, spec, outcome, &coarse_s, &options.grid);
    report.finalize();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Comparison with the operator T
// ---------------------------------------------------------------------------

/// min{(1 + |x|)^d, (|x| sin ϑ)^{−d}}; the first branch when the angle is undefined.
pub fn comparison_shape(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as i32;
    let nx = norm(x);
    let ny = norm(y);
    let first = (1.0 + nx).powi(d);
    if nx == 0.0 || ny == 0.0 {
        return first;
    }
    let sin = angle_between(x, y).sin().abs();
    let second = if sin == 0.0 { f64::INFINITY } else { (nx * sin).powi(-d) };
    first.min(second)
}

/// e^{|x|²}·min{(1 + |x|)^d, (|x| sin ϑ)^{−d}}.
pub fn comparison_bound_t(x: &[f64], y: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>()).exp() * comparison_shape(x, y)
}

/// Grid for the comparison certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonGrid {
    pub dim: usize,
    pub s: Axis,
    pub plane: PlaneGrid,
}

impl Default for ComparisonGrid {
    fn default() -> Self {
        Self {
            dim: 2,
            s: Axis::Geometric {
                lo: 1e-6,
                hi: 1.0,
                steps: 600,
            },
            plane: PlaneGrid::default(),
        }
    }
}

/// log[s^{−d/2} e^{−Q_s(x,y)/(40s)}] in the plane.
fn log_comparison_kernel(d: usize, s: f64, log_s: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let (p, m) = (1.0 + s, 1.0 - s);
    let a = p * x[0] - m * y[0];
    let b = p * x[1] - m * y[1];
    -0.5 * d as f64 * log_s - GLOBAL_EXPONENT * (a * a + b * b) / s
}

/// (log sup, argmax s) of s^{−d/2} e^{−Q_s(x,y)/(40s)} over the given s-values.
fn log_sup_over_s(d: usize, s_values: &[(f64, f64)], x: [f64; 2], y: [f64; 2]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &(s, log_s) in s_values {
        let v = log_comparison_kernel(d, s, log_s, x, y);
        if v > best.0 {
            best = (v, s);
        }
    }
    best
}

/// log of the comparison ratio at (s, r₁, r₂, φ); −∞ inside L.
fn log_comparison_ratio(d: usize, s: f64, r1: f64, r2: f64, angle: f64) -> f64 {
    let x = [r1, 0.0];
    let y = [r2 * angle.cos(), r2 * angle.sin()];
    if local_region(&x, &y) {
        return f64::NEG_INFINITY;
    }
    let (xd, yd) = embed(d, x, y);
    log_comparison_kernel(d, s, s.ln(), x, y) - comparison_shape(&xd, &yd).ln()
}

/// Smallest ρ > 0 with (x, x + ρ(cos ψ, sin ψ)) outside L, where x = (r₁, 0).
/// Beyond ρ = 1 every pair is outside L.
fn exit_distance(r1: f64, psi: f64) -> f64 {
    const SCAN: usize = 64;
    let (c, sn) = (psi.cos(), psi.sin());
    let outside = |rho: f64| !local_region(&[r1, 0.0], &[r1 + rho * c, rho * sn]);
    let mut prev = 0.0;
    for k in 1..=SCAN {
        let rho = k as f64 / SCAN as f64;
        if outside(rho) {
            let (mut lo, mut hi) = (prev, rho);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if outside(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        prev = rho;
    }
    1.0
}

/// Local search in coordinates adapted to the boundary of L: y = x + ρ(cos ψ, sin ψ)
/// with ρ = exit_distance(r₁, ψ)·e^v, v ≥ 0. Returns the value and (s, r₁, r₂, φ).
fn polish_near_boundary(
    d: usize,
    start: (f64, f64, f64, f64),
    s_range: (f64, f64),
    r_range: (f64, f64),
    steps: (f64, f64, f64),
) -> (f64, (f64, f64, f64, f64)) {
    let (s, r1, r2, a) = start;
    let y = [r2 * a.cos(), r2 * a.sin()];
    let psi = (y[1]).atan2(y[0] - r1);
    let rho = ((y[0] - r1).powi(2) + y[1] * y[1]).sqrt();
    let v0 = (rho / exit_distance(r1, psi)).ln().max(0.0);
    let to_plane = |v: &[f64]| -> Option<(f64, f64, f64)> {
        let rho = exit_distance(v[1], v[2]) * v[3].exp();
        let y = [v[1] + rho * v[2].cos(), rho * v[2].sin()];
        let r2 = (y[0] * y[0] + y[1] * y[1]).sqrt();
        (r2 <= r_range.1).then(|| (v[1], r2, y[1].atan2(y[0])))
    };
    let f = |v: &[f64]| match to_plane(v) {
        Some((r1, r2, a)) => log_comparison_ratio(d, v[0].exp(), r1, r2, a),
        None => f64::NEG_INFINITY,
    };
    let (psi_lo, psi_hi, psi_step) = if d == 1 {
        (psi, psi, 0.0)
    } else {
        (-2.0 * std::f64::consts::TAU, 2.0 * std::f64::consts::TAU, steps.2)
    };
    let lower = [s_range.0.ln(), r_range.0, psi_lo, 0.0];
    let upper = [s_range.1.ln(), r_range.1, psi_hi, (2.0 * r_range.1 + 1.0).ln() + 20.0];
    let (v, val) = compass_maximize(
        f,
        &[s.ln(), r1, psi, v0],
        &lower,
        &upper,
        &[steps.0, steps.1, psi_step, 1.0],
        POLISH_TOL,
    );
    match to_plane(&v) {
        Some((r1, r2, a)) if val.is_finite() => (val, (v[0].exp(), r1, r2, a)),
        _ => (f64::NEG_INFINITY, start),
    }
}

struct ComparisonPass {
    constant: f64,
    points: usize,
    rows: Vec<GridRecord>,
    /// (s, r₁, r₂, φ) of the largest ratio.
    arg: (f64, f64, f64, f64),
}

fn comparison_pass(grid: &ComparisonGrid, plane: &PlaneGrid, s_axis: &Axis, keep_rows: bool) -> ComparisonPass {
    let d = grid.dim;
    let s_values: Vec<(f64, f64)> = s_axis.points().into_iter().map(|s| (s, s.ln())).collect();
    let radii = plane.radius.points();
    let angles: Vec<f64> = if d == 1 {
        vec![0.0, std::f64::consts::PI]
    } else {
        plane.angle.points()
    };
    let cells: Vec<(f64, f64, f64)> = radii
        .iter()
        .flat_map(|&r1| {
            let angles = angles.clone();
            radii
                .iter()
                .flat_map(move |&r2| angles.clone().into_iter().map(move |a| (r1, r2, a)))
        })
        .collect();
    let evaluated: Vec<Option<(f64, f64, GridRecord)>> = cells
        .par_iter()
        .map(|&(r1, r2, a)| {
            let x = [r1, 0.0];
            let y = [r2 * a.cos(), r2 * a.sin()];
            if local_region(&x, &y) {
                return None;
            }
            let (ls, s) = log_sup_over_s(d, &s_values, x, y);
            // The comparison shape only depends on |x| and the angle.
            let (xd, yd) = embed(d, x, y);
            let shape = comparison_shape(&xd, &yd);
            let lr = ls - shape.ln();
            Some((
                lr,
                s,
                GridRecord {
                    s,
                    norm_x: r1,
                    norm_y: r2,
                    angle: a,
                    region: RegionLabel::Global.to_string(),
                    kernel: ls.exp(),
                    bound: shape,
                    ratio: lr.exp(),
                },
            ))
        })
        .collect();
    let mut count = 0;
    let mut rows = Vec::new();
    let mut starts: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    for (lr, s, rec) in evaluated.into_iter().flatten() {
        count += s_values.len();
        starts.push((lr, s, rec.norm_x, rec.norm_y, rec.angle));
        if keep_rows {
            rows.push(rec);
        }
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.truncate(POLISH_STARTS);

    let (s_lo, s_hi) = axis_range(s_axis);
    let (r_lo, r_hi) = axis_range(&plane.radius);
    let r_step = (r_hi - r_lo) / radii.len().saturating_sub(1).max(1) as f64;
    let u_step = (s_hi / s_lo).ln() / s_values.len().saturating_sub(1).max(1) as f64;
    let a_step = if d == 1 {
        0.0
    } else {
        std::f64::consts::TAU / angles.len() as f64
    };
    let polished: Vec<(f64, (f64, f64, f64, f64))> = starts
        .par_iter()
        .map(|&(lr, s, r1, r2, a)| {
            let f = |v: &[f64]| log_comparison_ratio(d, v[0].exp(), v[1], v[2], v[3]);
            let (a_lo, a_hi) = if d == 1 {
                (a, a)
            } else {
                (-2.0 * std::f64::consts::TAU, 2.0 * std::f64::consts::TAU)
            };
            let lower = [s_lo.ln(), r_lo, r_lo, a_lo];
            let upper = [s_hi.ln(), r_hi, r_hi, a_hi];
            let steps = [u_step, r_step, r_step, a_step];
            let (v, val) = compass_maximize(f, &[s.ln(), r1, r2, a], &lower, &upper, &steps, POLISH_TOL);
            let mut best = (lr, (s, r1, r2, a));
            if val > best.0 {
                best = (val, (v[0].exp(), v[1], v[2], v[3]));
            }
            let edge = polish_near_boundary(d, best.1, (s_lo, s_hi), (r_lo, r_hi), (u_step, r_step, a_step));
            if edge.0 > best.0 {
                best = edge;
            }
            best
        })
        .collect();
    let (worst, arg) = polished
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::NEG_INFINITY, (0.0, 0.0, 0.0, 0.0)));
    ComparisonPass {
        constant: worst.exp(),
        points: count,
        rows,
        arg,
    }
}

fn embed(d: usize, x: [f64; 2], y: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    if d == 1 {
        return (vec![x[0]], vec![y[0]]);
    }
    let mut xd = vec![0.0; d];
    let mut yd = vec![0.0; d];
    xd[..2].copy_from_slice(&x);
    yd[..2].copy_from_slice(&y);
    (xd, yd)
}

/// Certifies sup_{0<s≤1} s^{−d/2} e^{−Q_s/(40s)} ≤ C·min{(1 + |x|)^d, (|x| sin ϑ)^{−d}}
/// on the grid points of G. Q_s only sees |x|, |y| and the angle, so the pairs
/// live in one plane for every d ≥ 2; d = 1 uses the two collinear configurations.
pub fn certify_comparison(grid: &ComparisonGrid, keep_records: bool) -> Result<CertificationReport> {
    if grid.dim == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    match grid.s {
        Axis::Geometric { lo, hi, .. } if lo > 0.0 && hi <= 1.0 => {}
        _ => {
            return Err(Error::InvalidInput(
                "comparison s-axis must be geometric inside (0, 1]".into(),
            ))
        }
    }
    let coarse = comparison_pass(grid, &grid.plane, &grid.s, keep_records);
    if coarse.points == 0 {
        return Err(Error::InvalidInput("comparison grid has no point in G".into()));
    }
    let fine = comparison_pass(grid, &grid.plane.refined(), &grid.s.refined(), false);
    let (c, arg) = (coarse.constant, coarse.arg);
    let mut report = CertificationReport::new("comparison with the operator T");
    report.grid = vec![
        format!("dimension {}", grid.dim),
        format!("s: {}", grid.s.describe()),
        format!("plane radii: {}", grid.plane.radius.describe()),
        format!("plane angles: {}", grid.plane.angle.describe()),
    ];
    report.points = coarse.points;
    report.refined_points = fine.points;
    report.worst_ratio = c;
    report.set_constants(c, fine.constant);
    if exceeds(fine.constant, c) {
        let (_, r1, r2, a) = fine.arg;
        report.add_violation(Violation {
            s: fine.arg.0,
            x: vec![r1, 0.0],
            y: vec![r2 * a.cos(), r2 * a.sin()],
            ratio: fine.constant,
        });
    }
    report.regions.insert(
        RegionLabel::Global.to_string(),
        RegionSummary {
            points: coarse.points,
            worst: c,
        },
    );
    report.diagnostics.insert("worst_s".into(), arg.0);
    report.diagnostics.insert("worst_norm_x".into(), arg.1);
    report.diagnostics.insert("worst_norm_y".into(), arg.2);
    report.diagnostics.insert("worst_angle".into(), arg.3);
    let rows = coarse.rows;
    report.records = rows;
    report.finalize();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{log_kernel_block, tau};

    #[test]
    fn plane_formula_matches_kernel() {
        let theta = 1.3;
        let spec = BlockSpec::new(vec![theta], 2).unwrap();
        for s in [1e-4, 0.01, 0.05] {
            let sp = SParam::from_s(s).unwrap();
            let pc = PlaneCoefficients::new(sp, theta);
            for (r1, r2, a) in [(1.0, 2.0, 0.3), (0.5, 0.2, -2.0), (3.0, 3.1, -0.01)] {
                let (_, lr) = pc.evaluate(r1, r2, f64::cos(a), f64::sin(a));
                let x = [r1, 0.0];
                let y = [r2 * f64::cos(a), r2 * f64::sin(a)];
                let lk = log_kernel_block(&spec, tau(s).unwrap(), &x, &y).unwrap();
                let lb = -s.ln() + r1 * r1 - sp.quadratic_form(&x, &y) / (40.0 * s);
                assert!((lr - (lk - lb)).abs() < 1e-9 * (1.0 + lk.abs()), "s={s}");
            }
        }
    }

    #[test]
    fn eigenvalue_matches_direct_form() {
        let sp = SParam::from_s(0.03).unwrap();
        let pc = PlaneCoefficients::new(sp, 2.0);
        let lam = pc.form_max_eigenvalue();
        // The Rayleigh quotient of random vectors never exceeds λ_max.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let z: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
            let n2: f64 = z.iter().map(|v| v * v).sum();
            let r1 = (z[0] * z[0] + z[1] * z[1]).sqrt();
            // Rotate so that ξ lies on the first axis.
            let (c0, s0) = if r1 > 0.0 { (z[0] / r1, z[1] / r1) } else { (1.0, 0.0) };
            let eta = [c0 * z[2] + s0 * z[3], -s0 * z[2] + c0 * z[3]];
            let r2 = (eta[0] * eta[0] + eta[1] * eta[1]).sqrt();
            let (lm, _) = if r2 > 0.0 {
                pc.evaluate(r1, r2, eta[0] / r2, eta[1] / r2)
            } else {
                pc.evaluate(r1, 0.0, 1.0, 0.0)
            };
            assert!(lm / n2 <= lam + 1e-12);
        }
    }

    #[test]
    fn comparison_shape_branches() {
        assert_eq!(comparison_shape(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert_eq!(comparison_shape(&[2.0, 0.0], &[3.0, 0.0]), 9.0);
        assert_eq!(comparison_bound_t(&[0.0, 0.0], &[3.0, 1.0]), 1.0);
        let v = comparison_shape(&[2.0, 0.0], &[0.0, 1.0]);
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn trivial_speeds_give_unit_constant() {
        let spec = BlockSpec::new(vec![0.0], 2).unwrap();
        let grid = GlobalGrid {
            s_per_decade: 20,
            plane: PlaneGrid {
                radius: Axis::Uniform { lo: 0.0, hi: 6.0, steps: 6 },
                angle: Axis::Periodic { start: -std::f64::consts::PI, steps: 8 },
            },
            spot_checks: 2000,
            ..GlobalGrid::default()
        };
        let r = certify_global_small_time(&spec, 0.05, &grid, false).unwrap();
        assert_eq!(r.constant, 1.0);
        assert!(r.worst_ratio <= 1.0);
        assert!(r.passed);
        assert!(certify_global_small_time(&spec, 1.0, &grid, false).is_err());
        let p = certify_global_periodic(&spec, &PeriodicOptions::default(), false).unwrap();
        assert!(p.passed && p.constant == 1.0);
    }

    #[test]
    fn aperiodic_speeds_are_a_precondition_error() {
        let spec = BlockSpec::new(vec![1.0, 2f64.sqrt()], 4).unwrap();
        assert!(matches!(
            certify_global_periodic(&spec, &PeriodicOptions::default(), false),
            Err(Error::Precondition(_))
        ));
    }
}
