use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a certification grid. Refinement doubles the number of steps and
/// always yields a superset of the original points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Axis {
    /// `steps + 1` points from `lo` to `hi` inclusive.
    Uniform { lo: f64, hi: f64, steps: usize },
    /// `steps + 1` points `hi·(lo/hi)^{k/steps}`, both endpoints included.
    Geometric { lo: f64, hi: f64, steps: usize },
    /// `steps` angles `start + 2πk/steps`.
    Periodic { start: f64, steps: usize },
}

impl Axis {
    pub fn uniform(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        check_range(lo, hi)?;
        Ok(Axis::Uniform { lo, hi, steps })
    }

    pub fn geometric(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        check_range(lo, hi)?;
        if lo <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "geometric axis needs a positive lower end, got {lo}"
            )));
        }
        Ok(Axis::Geometric { lo, hi, steps })
    }

    /// Geometric axis with about `per_decade` points per factor of ten.
    pub fn per_decade(lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        let decades = if lo > 0.0 && hi > lo { (hi / lo).log10() } else { 0.0 };
        let steps = ((decades * per_decade as f64).ceil() as usize).max(1);
        Self::geometric(lo, hi, steps)
    }

    pub fn angles(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("angle axis needs at least one point".into()));
        }
        Ok(Axis::Periodic {
            start: -std::f64::consts::PI,
            steps,
        })
    }

    pub fn points(&self) -> Vec<f64> {
        match *self {
            Axis::Uniform { lo, hi, steps } => {
                if steps == 0 {
                    return vec![lo];
                }
                (0..=steps)
                    .map(|k| {
                        if k == steps {
                            hi
                        } else {
                            lo + (hi - lo) * k as f64 / steps as f64
                        }
                    })
                    .collect()
            }
            Axis::Geometric { lo, hi, steps } => {
                if steps == 0 {
                    return vec![hi];
                }
                let ratio = (lo / hi).ln();
                (0..=steps)
                    .map(|k| {
                        if k == steps {
                            lo
                        } else {
                            hi * (ratio * k as f64 / steps as f64).exp()
                        }
                    })
                    .collect()
            }
            Axis::Periodic { start, steps } => (0..steps)
                .map(|k| start + std::f64::consts::TAU * k as f64 / steps as f64)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Axis::Uniform { steps, .. } | Axis::Geometric { steps, .. } => steps + 1,
            Axis::Periodic { steps, .. } => steps,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn refined(&self) -> Self {
        match *self {
            Axis::Uniform { lo, hi, steps } => Axis::Uniform {
                lo,
                hi,
                steps: (2 * steps).max(1),
            },
            Axis::Geometric { lo, hi, steps } => Axis::Geometric {
                lo,
                hi,
                steps: (2 * steps).max(1),
            },
            Axis::Periodic { start, steps } => Axis::Periodic {
                start,
                steps: 2 * steps,
            },
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Axis::Uniform { lo, hi, steps } => format!("uniform [{lo}, {hi}] x{}", steps + 1),
            Axis::Geometric { lo, hi, steps } => format!("geometric [{lo:e}, {hi}] x{}", steps + 1),
            Axis::Periodic { steps, .. } => format!("angles x{steps}"),
        }
    }
}

/// Bounded compass search for a local maximum of `f`, starting at `start` with
/// per-coordinate initial steps. A successful move doubles that coordinate's step
/// (up to its initial value), a sweep without improvement halves every step, and
/// the search stops once every step is below `tol` times its initial value.
/// Infeasible points may return −∞. Returns the best point and value.
pub fn compass_maximize<F>(f: F, start: &[f64], lower: &[f64], upper: &[f64], steps: &[f64], tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    const MAX_EVALUATIONS: usize = 1_000_000;
    let mut x = start.to_vec();
    let mut best = f(&x);
    let mut step = steps.to_vec();
    let mut scale = 1.0;
    let mut trial = x.clone();
    let mut evaluations = 1;
    while scale > tol && evaluations < MAX_EVALUATIONS {
        let mut moved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[i] = (x[i] + sign * step[i]).clamp(lower[i], upper[i]);
                if trial[i] == x[i] {
                    continue;
                }
                let v = f(&trial);
                evaluations += 1;
                if v > best {
                    best = v;
                    x.copy_from_slice(&trial);
                    step[i] = (2.0 * step[i]).min(steps[i]);
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
        scale = steps
            .iter()
            .zip(&step)
            .filter(|(s0, _)| **s0 > 0.0)
            .map(|(s0, s)| s / s0)
            .fold(0.0, f64::max);
    }
    (x, best)
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::InvalidInput(format!("invalid axis range [{lo}, {hi}]")));
    }
    Ok(())
}

/// Deterministic unit directions in ℝ^d. The first n directions never depend on
/// how many are requested, so a longer list refines a shorter one.
pub fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => [1.0, -1.0].iter().take(count.max(1)).map(|&v| vec![v]).collect(),
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * van_der_corput(k as u64);
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Coordinate axes first, then a low-discrepancy fill mapped through normals.
            let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
            for k in 0..count {
                if k < 2 * dim {
                    let mut v = vec![0.0; dim];
                    v[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                    out.push(v);
                    continue;
                }
                let idx = (k - 2 * dim) as u64 + 1;
                let mut v: Vec<f64> = (0..dim)
                    .map(|j| {
                        let u = halton(idx, PRIMES[j % PRIMES.len()]);
                        let u2 = halton(idx, PRIMES[(j + dim) % PRIMES.len()]);
                        let r = (-2.0 * (1.0 - u).ln()).sqrt();
                        r * (std::f64::consts::TAU * u2).cos()
                    })
                    .collect();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if n > 0.0 {
                    v.iter_mut().for_each(|a| *a /= n);
                } else {
                    v[0] = 1.0;
                }
                out.push(v);
            }
            out
        }
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn van_der_corput(i: u64) -> f64 {
    halton(i, 2)
}
