//! Empirical weak-type ratios and the L¹ unboundedness probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{covariance_at, invariant_measure, OuParams};
use crate::kernels::{GeneralKernel, T_MIN};
use crate::matrix::{expm, Matrix};
use crate::maximal::semigroup::GaussianBump;
use crate::maximal::timeset::s_geometric;

/// Options of [`weak_type_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakTypeOptions {
    /// A = [0, t_max].
    pub t_max: f64,
    pub t_min: f64,
    pub t_per_decade: usize,
    /// Radial cells per spatial grid, log-spaced around the bump center.
    pub radial_steps: usize,
    pub angle_steps: usize,
    pub r_min: f64,
    /// Radius of the box in standard deviations of γ∞.
    pub box_sigmas: f64,
}

impl Default for WeakTypeOptions {
    fn default() -> Self {
        Self {
            t_max: 1.0,
            t_min: 1e-7,
            t_per_decade: 40,
            radial_steps: 200,
            angle_steps: 128,
            r_min: 1e-4,
            box_sigmas: 6.0,
        }
    }
}

/// Ratios sup_α α·γ∞{H_{*,A} f > α}/‖f‖₁ for each member of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeResult {
    pub widths: Vec<f64>,
    pub ratios: Vec<f64>,
    pub l1_norms: Vec<f64>,
    /// γ∞ mass not covered by the spatial grid (largest over the family).
    pub truncation_mass: f64,
    pub spatial_points: usize,
    pub time_points: usize,
}

impl WeakTypeResult {
    /// Largest ratio of a member to the running maximum of the earlier members.
    pub fn max_growth(&self) -> f64 {
        let mut run = f64::NEG_INFINITY;
        let mut worst: f64 = 1.0;
        for (k, &r) in self.ratios.iter().enumerate() {
            if k > 0 && run > 0.0 {
                worst = worst.max(r / run);
            }
            run = run.max(r);
        }
        worst
    }
}

struct TimeStep {
    etb: Vec<f64>,
    s_inv: Vec<f64>,
    log_scale: f64,
}

/// sup_α α·μ{M > α} for a discrete measure: max_k M_(k)·Σ_{i≤k} μ_i over values
/// sorted in decreasing order.
pub fn level_set_ratio(values: &[f64], weights: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut mass = 0.0;
    let mut best: f64 = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let v = values[idx[k]];
        // Ties enter the level set together.
        while k < idx.len() && values[idx[k]] == v {
            mass += weights[idx[k]];
            k += 1;
        }
        best = best.max(v * mass);
    }
    best
}

fn inverse_small(m: &Matrix) -> Result<(Vec<f64>, f64)> {
    let d = m.nrows();
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let inv = chol.inverse();
    Ok(((0..d * d).map(|k| inv[(k / d, k % d)]).collect(), log_det))
}

/// Polar cells around `center`: (point, γ∞ mass) pairs and the uncovered mass.
fn spatial_grid(
    params: &OuParams,
    center: &[f64],
    opts: &WeakTypeOptions,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = params.dim();
    let gi = invariant_measure(params)?;
    let sigma = nalgebra::SymmetricEigen::new(params.q_inf().clone())
        .eigenvalues
        .max()
        .sqrt();
    let c_norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r_max = opts.box_sigmas * sigma + c_norm;
    let n = opts.radial_steps;
    let edges: Vec<f64> = (0..=n)
        .map(|k| opts.r_min * (r_max / opts.r_min).powf(k as f64 / n as f64))
        .collect();
    let mut pts = vec![center.to_vec()];
    let mut w = vec![0.0];
    let dirs: Vec<Vec<f64>> = match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..opts.angle_steps)
            .map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + 0.5) / opts.angle_steps as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => unreachable!("checked by caller"),
    };
    // Central disc of radius r_min.
    w[0] = gi.density(center)
        * if d == 1 {
            2.0 * opts.r_min
        } else {
            std::f64::consts::PI * opts.r_min * opts.r_min
        };
    // Cell masses by 3-point Gauss–Legendre in the radius; M is sampled at the
    // geometric cell center.
    const GL: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
    let dphi = std::f64::consts::TAU / opts.angle_steps as f64;
    for e in edges.windows(2) {
        let (a, b) = (e[0], e[1]);
        let r = (a * b).sqrt();
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for dir in &dirs {
            let mut mass = 0.0;
            for (z, gw) in GL {
                let rr = mid + half * z;
                let q: Vec<f64> = center.iter().zip(dir).map(|(c, u)| c + rr * u).collect();
                let jac = if d == 1 { 1.0 } else { rr * dphi };
                mass += gw * half * jac * gi.density(&q);
            }
            let p: Vec<f64> = center.iter().zip(dir).map(|(c, u)| c + r * u).collect();
            w.push(mass);
            pts.push(p);
        }
    }
    Ok((pts, w))
}

/// Empirical weak-type ratios of H_{*,A}, A = [0, t_max], on a family of
/// Gaussian bumps normalized in L¹(γ∞). The maximal function is computed in
/// closed form on a t-grid geometric in s; level-set measures come from a polar
/// grid around each bump center covering a ball of `box_sigmas` standard
/// deviations of γ∞.
pub fn weak_type_ratio(
    params: &OuParams,
    family: &[GaussianBump],
    opts: &WeakTypeOptions,
) -> Result<WeakTypeResult> {
    let d = params.dim();
    if d > 2 {
        return Err(Error::Capability(format!(
            "weak-type ratios are computed for d <= 2, got d = {d}"
        )));
    }
    if family.is_empty() {
        return Err(Error::InvalidInput("function family is empty".into()));
    }
    if !(opts.t_max > opts.t_min && opts.t_min >= T_MIN) {
        return Err(Error::InvalidInput("need t_min >= t_min of kernels and t_max > t_min".into()));
    }
    let times = s_geometric(opts.t_min, opts.t_max, opts.t_per_decade)?;
    let mut result = WeakTypeResult {
        widths: Vec::new(),
        ratios: Vec::new(),
        l1_norms: Vec::new(),
        truncation_mass: 0.0,
        spatial_points: 0,
        time_points: times.len() + 1,
    };
    let covs: Vec<(Vec<f64>, Matrix)> = times
        .iter()
        .map(|&t| {
            let e = expm(&(params.b() * t))?;
            let etb = (0..d * d).map(|k| e[(k / d, k % d)]).collect();
            Ok((etb, covariance_at(params, t)?))
        })
        .collect::<Result<_>>()?;

    for bump in family {
        if bump.center.len() != d {
            return Err(Error::InvalidInput("bump center has the wrong dimension".into()));
        }
        let norm = bump.l1_norm(params)?;
        let w2 = bump.width * bump.width;
        let steps: Vec<TimeStep> = covs
            .iter()
            .map(|(etb, q)| {
                let s = q + Matrix::identity(d, d) * w2;
                let (s_inv, log_det_s) = inverse_small(&s)?;
                Ok(TimeStep {
                    etb: etb.clone(),
                    s_inv,
                    log_scale: -0.5 * (log_det_s - d as f64 * w2.ln()),
                })
            })
            .collect::<Result<_>>()?;
        let (pts, weights) = spatial_grid(params, &bump.center, opts)?;
        let maximal: Vec<f64> = pts
            .par_iter()
            .map(|x| {
                let mut best = bump.eval(x);
                let mut m = [0.0; 2];
                for st in &steps {
                    for (i, mi) in m.iter_mut().enumerate().take(d) {
                        let row = &st.etb[i * d..(i + 1) * d];
                        *mi = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() - bump.center[i];
                    }
                    let mut quad = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            quad += m[i] * st.s_inv[i * d + j] * m[j];
                        }
                    }
                    best = best.max((st.log_scale - 0.5 * quad).exp());
                }
                best / norm
            })
            .collect();
        let covered: f64 = weights.iter().sum();
        result.truncation_mass = result.truncation_mass.max((1.0 - covered).abs());
        result.spatial_points = pts.len();
        result.widths.push(bump.width);
        result.l1_norms.push(norm);
        result.ratios.push(level_set_ratio(&maximal, &weights));
    }
    Ok(result)
}

/// Result of the L¹ unboundedness probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Probe {
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    pub argmax_t: Vec<f64>,
    /// Least-squares slope of log sup_t h_t(x, 0) against log |x|.
    pub slope: f64,
    pub intercept: f64,
    /// argmax_t / (|x|²/d) for each radius.
    pub argmax_ratio: Vec<f64>,
}

/// sup over t ∈ (0, T] of h_t(r e₁, 0) for each radius r, and the log-log slope.
pub fn l1_unboundedness_probe(params: &OuParams, t_max: f64, radii: &[f64], per_decade: usize) -> Result<L1Probe> {
    if radii.len() < 2 {
        return Err(Error::InvalidInput("at least two radii are needed for a slope".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidInput("radii must lie in (0, 1]".into()));
    }
    let d = params.dim();
    let times = s_geometric(T_MIN, t_max, per_decade)?;
    let zero = vec![0.0; d];
    let points: Vec<Vec<f64>> = radii
        .iter()
        .map(|&r| {
            let mut x = vec![0.0; d];
            x[0] = r;
            x
        })
        .collect();
    let per_t: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| {
            let k = GeneralKernel::new(params, t)?;
            points.iter().map(|x| k.log_eval(x, &zero)).collect()
        })
        .collect::<Result<_>>()?;
    let mut sups = Vec::with_capacity(radii.len());
    let mut argmax_t = Vec::with_capacity(radii.len());
    for i in 0..radii.len() {
        let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
        for (row, &t) in per_t.iter().zip(&times) {
            if row[i] > best {
                best = row[i];
                at = t;
            }
        }
        sups.push(best.exp());
        argmax_t.push(at);
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = sups.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    Ok(L1Probe {
        radii: radii.to_vec(),
        argmax_ratio: argmax_t
            .iter()
            .zip(radii)
            .map(|(t, r)| t / (r * r / d as f64))
            .collect(),
        sups,
        argmax_t,
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_set_ratio_of_constant_is_total_mass() {
        let v = vec![1.0; 5];
        let w = vec![0.2; 5];
        assert!((level_set_ratio(&v, &w) - 1.0).abs() < 1e-15);
        // Two levels: max(3·0.1, 1·0.5).
        let r = level_set_ratio(&[3.0, 1.0, 1.0], &[0.1, 0.2, 0.2]);
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_function_has_ratio_near_one() {
        let p = OuParams::rotation(&[1.0], 2).unwrap();
        // A very wide bump is the constant 1 up to O(1/w²).
        let bump = GaussianBump::new(vec![0.0, 0.0], 1e4).unwrap();
        let opts = WeakTypeOptions {
            radial_steps: 60,
            angle_steps: 32,
            t_per_decade: 5,
            ..WeakTypeOptions::default()
        };
        let r = weak_type_ratio(&p, &[bump], &opts).unwrap();
        assert!(r.ratios[0] <= 1.0 + 1e-6 && r.ratios[0] > 0.99, "{:?}", r.ratios);
        assert!(r.truncation_mass < 1e-3);
    }

    #[test]
    fn probe_in_one_dimension() {
        let p = OuParams::symmetric(1).unwrap();
        let radii: Vec<f64> = (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
        let probe = l1_unboundedness_probe(&p, 1.0, &radii, 200).unwrap();
        assert!((probe.slope + 1.0).abs() < 0.1, "slope {}", probe.slope);
        assert!(probe.argmax_ratio.iter().all(|&r| r > 0.25 && r < 4.0));
    }
}
