use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{tau, tau_inv, BlockSpec, T_MIN};
use crate::matrix::expm;

/// Default points per decade of s for time grids.
pub const DEFAULT_PER_DECADE: usize = 200;
/// Default number of period copies in periodic time sets.
pub const DEFAULT_COPIES: usize = 8;
/// Minimum number of grid points inside a short interval I.
const MIN_INTERVAL_POINTS: usize = 16;

/// Which family of times a maximal operator ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSetKind {
    /// [0, T].
    Interval { t_max: f64 },
    /// ∪_{n<copies} (I + nP) with I = [lo, hi].
    Translates {
        period: f64,
        lo: f64,
        hi: f64,
        copies: usize,
    },
    /// [0, T] together with the translates of I.
    Full {
        t_max: f64,
        period: f64,
        lo: f64,
        hi: f64,
        copies: usize,
    },
}

/// A finite grid of positive times, sorted and free of duplicates, optionally
/// together with t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSet {
    pub kind: TimeSetKind,
    pub includes_zero: bool,
    pub times: Vec<f64>,
}

impl TimeSet {
    /// [0, T] sampled geometrically in s = τ⁻¹(t) from τ⁻¹(t_min) to τ⁻¹(T).
    pub fn interval(t_max: f64, per_decade: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > T_MIN) {
            return Err(Error::InvalidInput(format!(
                "interval end must be finite and above {T_MIN}, got {t_max}"
            )));
        }
        let times = s_geometric(T_MIN, t_max, per_decade)?;
        Ok(Self {
            kind: TimeSetKind::Interval { t_max },
            includes_zero: true,
            times,
        })
    }

    /// The first `copies` translates I + nP, n = 0..copies−1, of I = [lo, hi].
    pub fn translates(period: f64, lo: f64, hi: f64, copies: usize, per_decade: usize) -> Result<Self> {
        check_interval(period, lo, hi, copies)?;
        let base = interval_grid(lo, hi, per_decade)?;
        let mut times = Vec::with_capacity(base.len() * copies);
        for n in 0..copies {
            times.extend(base.iter().map(|t| t + n as f64 * period));
        }
        Ok(Self {
            kind: TimeSetKind::Translates {
                period,
                lo,
                hi,
                copies,
            },
            includes_zero: false,
            times: sorted_unique(times),
        })
    }

    /// [0, T] ∪ (I_P^♯ truncated to `copies` periods).
    pub fn full(
        t_max: f64,
        period: f64,
        lo: f64,
        hi: f64,
        copies: usize,
        per_decade: usize,
    ) -> Result<Self> {
        let a = Self::interval(t_max, per_decade)?;
        let b = Self::translates(period, lo, hi, copies, per_decade)?;
        let mut times = a.times;
        times.extend(b.times);
        Ok(Self {
            kind: TimeSetKind::Full {
                t_max,
                period,
                lo,
                hi,
                copies,
            },
            includes_zero: true,
            times: sorted_unique(times),
        })
    }

    /// Number of grid times, counting t = 0 when present.
    pub fn len(&self) -> usize {
        self.times.len() + usize::from(self.includes_zero)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// s = τ⁻¹(t) for every positive grid time.
    pub fn s_values(&self) -> Vec<f64> {
        self.times.iter().map(|&t| tau_inv(t).expect("positive")).collect()
    }
}

fn check_interval(period: f64, lo: f64, hi: f64, copies: usize) -> Result<()> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidInput(format!("period must be positive, got {period}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidInput(format!("invalid interval [{lo}, {hi}]")));
    }
    if copies == 0 {
        return Err(Error::InvalidInput("at least one period copy is required".into()));
    }
    Ok(())
}

/// Times τ(s) for s geometric between τ⁻¹(lo) and τ⁻¹(hi), both included.
pub fn s_geometric(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    let (s_lo, s_hi) = (tau_inv(lo)?, tau_inv(hi)?);
    let steps = (((s_hi / s_lo).log10() * per_decade as f64).ceil() as usize).max(1);
    let mut out: Vec<f64> = (0..=steps)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == steps {
                hi
            } else {
                let s = s_lo * ((s_hi / s_lo).ln() * k as f64 / steps as f64).exp();
                tau(s).expect("s in (0,1)")
            }
        })
        .collect();
    out.dedup();
    Ok(out)
}

fn interval_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if hi == lo {
        return Ok(vec![lo]);
    }
    let g = s_geometric(lo, hi, per_decade)?;
    if g.len() >= MIN_INTERVAL_POINTS {
        return Ok(g);
    }
    let n = MIN_INTERVAL_POINTS - 1;
    Ok((0..=n)
        .map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 })
        .collect())
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Shape of the covering produced by [`translate_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Truncated,
    Full,
}

/// A covering of the time range by translated windows and its union grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Windows (a, b) of [0, T] of length at most t0.
    pub windows: Vec<(f64, f64)>,
    /// Offsets nP of the copies of I, empty for truncated schedules.
    pub offsets: Vec<f64>,
    pub times: TimeSet,
}

/// Covers [0, T] by max(1, ⌈T/t0⌉) translates of (0, t0) and, for full
/// schedules, adds `copies` translates of I by multiples of the period.
pub fn translate_schedule(
    kind: ScheduleKind,
    t0: f64,
    t_max: f64,
    period: Option<f64>,
    interval: Option<(f64, f64)>,
    copies: usize,
    per_decade: usize,
) -> Result<Schedule> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::InvalidInput(format!("window length t0 must be positive, got {t0}")));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t_max}")));
    }
    let count = ((t_max / t0).ceil() as usize).max(1);
    let windows: Vec<(f64, f64)> = (0..count)
        .map(|k| (k as f64 * t0, ((k + 1) as f64 * t0).min(t_max)))
        .collect();

    let mut times = Vec::new();
    for &(a, b) in &windows {
        let len = b - a;
        if len <= T_MIN {
            times.push(b);
            continue;
        }
        times.extend(s_geometric(T_MIN, len, per_decade)?.into_iter().map(|t| a + t));
    }
    let base = TimeSet {
        kind: TimeSetKind::Interval { t_max },
        includes_zero: true,
        times: sorted_unique(times),
    };

    match kind {
        ScheduleKind::Truncated => Ok(Schedule {
            windows,
            offsets: Vec::new(),
            times: base,
        }),
        ScheduleKind::Full => {
            let (period, (lo, hi)) = match (period, interval) {
                (Some(p), Some(i)) => (p, i),
                _ => {
                    return Err(Error::InvalidInput(
                        "full schedules need both a period and an interval".into(),
                    ))
                }
            };
            let copies_set = TimeSet::translates(period, lo, hi, copies, per_decade)?;
            let offsets = (0..copies).map(|n| n as f64 * period).collect();
            let mut all = base.times;
            all.extend(copies_set.times);
            Ok(Schedule {
                windows,
                offsets,
                times: TimeSet {
                    kind: TimeSetKind::Full {
                        t_max,
                        period,
                        lo,
                        hi,
                        copies,
                    },
                    includes_zero: true,
                    times: sorted_unique(all),
                },
            })
        }
    }
}

/// Largest denominator tried when recognizing a speed ratio as rational.
const MAX_DENOMINATOR: i64 = 10_000;
/// Relative tolerance on rational recognition.
const RATIO_TOL: f64 = 1e-9;
/// Required accuracy of e^{PR(Θ)} = I.
const PERIOD_CHECK_TOL: f64 = 1e-8;

/// Best rational approximation p/q with q ≤ MAX_DENOMINATOR via continued fractions.
fn rationalize(x: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= RATIO_TOL * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = v - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 > 0 && (x - h1 as f64 / k1 as f64).abs() <= RATIO_TOL * x.abs().max(1.0) {
        Some((h1, k1))
    } else {
        None
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Smallest P > 0 with e^{PR(Θ)} = I, when the nonzero speeds are commensurable.
pub fn period_of(spec: &BlockSpec) -> Option<f64> {
    let nonzero: Vec<f64> = spec.theta().iter().copied().filter(|&t| t > 0.0).collect();
    let first = *nonzero.first()?;
    let mut fracs = Vec::with_capacity(nonzero.len());
    for &th in &nonzero {
        fracs.push(rationalize(th / first)?);
    }
    let mut lcm = 1i64;
    for &(_, q) in &fracs {
        lcm = lcm / gcd(lcm, q) * q;
        if lcm > MAX_DENOMINATOR * MAX_DENOMINATOR {
            return None;
        }
    }
    let g = fracs.iter().fold(0i64, |g, &(p, q)| gcd(g, p * (lcm / q)));
    if g == 0 {
        return None;
    }
    let period = std::f64::consts::TAU * lcm as f64 / (first * g as f64);
    let e = expm(&(spec.generator() * period)).ok()?;
    let d = spec.dim();
    let err = (e - crate::matrix::Matrix::identity(d, d)).norm();
    (err < PERIOD_CHECK_TOL).then_some(period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn periods() {
        let p = period_of(&BlockSpec::new(vec![1.0], 2).unwrap()).unwrap();
        assert!((p - TAU).abs() < 1e-12);
        let p = period_of(&BlockSpec::new(vec![2.0, 3.0], 4).unwrap()).unwrap();
        assert!((p - TAU).abs() < 1e-12);
        let p = period_of(&BlockSpec::new(vec![2.0, 4.0], 5).unwrap()).unwrap();
        assert!((p - TAU / 2.0).abs() < 1e-12);
        let p = period_of(&BlockSpec::new(vec![0.5, 0.0], 4).unwrap()).unwrap();
        assert!((p - 2.0 * TAU).abs() < 1e-12);
        assert!(period_of(&BlockSpec::new(vec![1.0, 2f64.sqrt()], 4).unwrap()).is_none());
        assert!(period_of(&BlockSpec::new(vec![0.0], 2).unwrap()).is_none());
    }

    #[test]
    fn window_counts() {
        let s = translate_schedule(ScheduleKind::Truncated, 0.3, 1.0, None, None, 0, 20).unwrap();
        assert_eq!(s.windows.len(), 4);
        assert!((s.windows[3].1 - 1.0).abs() < 1e-15);
        let s = translate_schedule(ScheduleKind::Truncated, 2.0, 1.0, None, None, 0, 20).unwrap();
        assert_eq!(s.windows.len(), 1);
        assert!(translate_schedule(ScheduleKind::Truncated, 0.0, 1.0, None, None, 0, 20).is_err());
        assert!(translate_schedule(ScheduleKind::Full, 0.3, 1.0, None, None, 3, 20).is_err());
    }

    #[test]
    fn full_schedule_contains_three_copies() {
        let s = translate_schedule(
            ScheduleKind::Full,
            0.3,
            1.0,
            Some(TAU),
            Some((0.1, 0.11)),
            3,
            20,
        )
        .unwrap();
        assert_eq!(s.offsets, vec![0.0, TAU, 2.0 * TAU]);
        let base = TimeSet::translates(TAU, 0.1, 0.11, 1, 20).unwrap().times;
        for off in &s.offsets {
            for t in &base {
                assert!(s.times.times.iter().any(|u| (u - (t + off)).abs() < 1e-12));
            }
        }
        let covered = |t: f64| {
            t <= 1.0 || s.offsets.iter().any(|o| t >= 0.1 + o - 1e-12 && t <= 0.11 + o + 1e-12)
        };
        assert!(s.times.times.iter().all(|&t| covered(t)));
    }

    #[test]
    fn interval_grid_is_geometric_in_s() {
        let ts = TimeSet::interval(1.0, 10).unwrap();
        assert!(ts.includes_zero);
        assert_eq!(ts.times[0], T_MIN);
        assert_eq!(*ts.times.last().unwrap(), 1.0);
        let s = ts.s_values();
        let r: Vec<f64> = s.windows(2).map(|w| w[1] / w[0]).collect();
        for w in r.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-9);
        }
    }
}
