//! Exact Monte Carlo for the Ornstein–Uhlenbeck process.
//!
//! Transitions are drawn as e^{tB}x − Y with Y ∼ N(0, Q_t), so there is no
//! time step and no discretization error. Random streams follow the batch
//! layout of [`GaussianMeasure::sample`], which keeps every result independent
//! of the number of worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{covariance_at, invariant_measure, measure_at, OuParams, SAMPLE_BATCH};
use crate::matrix::{expm, Matrix, Vector};
use crate::maximal::report::fmt17;

/// Derives an independent seed for a secondary stream.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_time_and_count(t: f64, n: usize) -> Result<()> {
    if t.is_nan() || t <= 0.0 || t.is_infinite() {
        return Err(Error::Domain(format!("time must be positive and finite, got {t}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    Ok(())
}

fn check_point(params: &OuParams, x: &[f64]) -> Result<()> {
    if x.len() != params.dim() {
        return Err(Error::InvalidInput(format!(
            "point has dimension {}, expected {}",
            x.len(),
            params.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("point has non-finite coordinates".into()));
    }
    Ok(())
}

/// `n` exact draws of the process at time `t` started from `x`.
pub fn transition_sample(params: &OuParams, t: f64, x: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_time_and_count(t, n)?;
    check_point(params, x)?;
    let mean = expm(&(params.b() * t))? * Vector::from_column_slice(x);
    let noise = measure_at(params, t)?.sample(n, seed);
    Ok(noise
        .into_iter()
        .map(|y| mean.iter().zip(&y).map(|(m, v)| m - v).collect())
        .collect())
}

/// Monte Carlo estimate of H_t f(x) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// |estimate − value| in units of the standard error; 0 when both agree exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.estimate - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Sample mean and standard error of f over the samples, summed in fixed chunks.
pub fn mean_and_error<F>(samples: &[Vec<f64>], f: F) -> Estimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = samples.len();
    let values: Vec<f64> = samples.par_iter().map(|y| f(y)).collect();
    let sum: f64 = values.par_chunks(SAMPLE_BATCH).map(|c| c.iter().sum::<f64>()).collect::<Vec<_>>().iter().sum();
    let mean = sum / n as f64;
    let ss: f64 = values
        .par_chunks(SAMPLE_BATCH)
        .map(|c| c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
    Estimate {
        estimate: mean,
        std_error: (var / n as f64).sqrt(),
        n,
    }
}

/// Monte Carlo form of H_t f(x) = E f(e^{tB}x − Y).
pub fn empirical_semigroup<F>(params: &OuParams, t: f64, f: F, x: &[f64], n: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let samples = transition_sample(params, t, x, n, seed)?;
    let est = mean_and_error(&samples, &f);
    if !est.estimate.is_finite() {
        return Err(Error::Numeric("integrand is not finite on the sampled points".into()));
    }
    Ok(est)
}

/// Where the ergodicity check starts its draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErgodicStart {
    /// Every draw starts at this point.
    Point(Vec<f64>),
    /// Every draw starts at an independent γ∞ draw.
    Stationary,
}

/// Moments of the draws at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRow {
    pub t: f64,
    pub mean: Vec<f64>,
    /// Exact mean of the law at time t.
    pub expected_mean: Vec<f64>,
    /// max_i |mean_i − expected_i| / (4·σ_i/√n).
    pub mean_envelope_ratio: f64,
    /// ‖M̂_t − Q∞‖_F/‖Q∞‖_F with M̂_t the empirical second moment.
    pub second_moment_error: f64,
    /// The same quantity for the exact law at time t.
    pub expected_second_moment_error: f64,
    /// Standard error of the empirical relative error.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub n: usize,
    pub seed: u64,
    pub start: ErgodicStart,
    pub rows: Vec<ErgodicRow>,
    pub means_within_envelope: bool,
    /// No increase of the second-moment error beyond 3 noise levels between
    /// consecutive times.
    pub monotone_decay: bool,
    pub passed: bool,
}

/// Frobenius standard error of the empirical second moment of N(m, Σ) at n draws,
/// relative to ‖Q∞‖_F.
fn second_moment_noise(second: &Matrix, q_inf: &Matrix, n: usize) -> f64 {
    // Var(X_i X_j) ≤ M_ii M_jj + M_ij² for a Gaussian with second moment M.
    let d = second.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += second[(i, i)] * second[(j, j)] + second[(i, j)] * second[(i, j)];
        }
    }
    (acc / n as f64).sqrt() / q_inf.norm()
}

/// Empirical first and second moments at each time, compared with 0 and Q∞.
pub fn ergodic_check(params: &OuParams, t_values: &[f64], n: usize, seed: u64) -> Result<ErgodicReport> {
    ergodic_check_from(params, &ErgodicStart::Point(vec![0.0; params.dim()]), t_values, n, seed)
}

pub fn ergodic_check_from(
    params: &OuParams,
    start: &ErgodicStart,
    t_values: &[f64],
    n: usize,
    seed: u64,
) -> Result<ErgodicReport> {
    if t_values.is_empty() {
        return Err(Error::InvalidInput("at least one time is required".into()));
    }
    if t_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }
    let d = params.dim();
    let q_inf = params.q_inf().clone();
    let starts: Option<Vec<Vec<f64>>> = match start {
        ErgodicStart::Point(x) => {
            check_point(params, x)?;
            None
        }
        ErgodicStart::Stationary => {
            check_time_and_count(1.0, n)?;
            Some(invariant_measure(params)?.sample(n, derive_seed(seed, u64::MAX)))
        }
    };

    let mut rows = Vec::with_capacity(t_values.len());
    for (k, &t) in t_values.iter().enumerate() {
        check_time_and_count(t, n)?;
        let etb = expm(&(params.b() * t))?;
        let step_seed = derive_seed(seed, k as u64);
        let (draws, expected_mean, expected_second) = match (&starts, start) {
            (None, ErgodicStart::Point(x)) => {
                let draws = transition_sample(params, t, x, n, step_seed)?;
                let m = &etb * Vector::from_column_slice(x);
                let second = covariance_at(params, t)? + &m * m.transpose();
                (draws, m, second)
            }
            (Some(xs), _) => {
                let noise = measure_at(params, t)?.sample(n, step_seed);
                let draws: Vec<Vec<f64>> = xs
                    .par_iter()
                    .zip(noise.par_iter())
                    .map(|(x, y)| {
                        let m = &etb * Vector::from_column_slice(x);
                        m.iter().zip(y).map(|(a, b)| a - b).collect()
                    })
                    .collect();
                (draws, Vector::zeros(d), q_inf.clone())
            }
            _ => unreachable!("starts are sampled exactly for the stationary case"),
        };
        let mut mean = vec![0.0; d];
        let mut second = Matrix::zeros(d, d);
        for i in 0..d {
            mean[i] = mean_and_error(&draws, |y| y[i]).estimate;
            for j in i..d {
                let v = mean_and_error(&draws, |y| y[i] * y[j]).estimate;
                second[(i, j)] = v;
                second[(j, i)] = v;
            }
        }
        let mut envelope = 0.0f64;
        for i in 0..d {
            let var = expected_second[(i, i)] - expected_mean[i] * expected_mean[i];
            let width = 4.0 * (var / n as f64).sqrt();
            envelope = envelope.max((mean[i] - expected_mean[i]).abs() / width);
        }
        let q_norm = q_inf.norm();
        rows.push(ErgodicRow {
            t,
            mean,
            expected_mean: expected_mean.iter().copied().collect(),
            mean_envelope_ratio: envelope,
            second_moment_error: (&second - &q_inf).norm() / q_norm,
            expected_second_moment_error: (&expected_second - &q_inf).norm() / q_norm,
            noise: second_moment_noise(&expected_second, &q_inf, n),
        });
    }
    let means_within_envelope = rows.iter().all(|r| r.mean_envelope_ratio <= 1.0);
    let monotone_decay = rows
        .windows(2)
        .all(|w| w[1].second_moment_error <= w[0].second_moment_error + 3.0 * (w[0].noise + w[1].noise));
    Ok(ErgodicReport {
        n,
        seed,
        start: start.clone(),
        rows,
        means_within_envelope,
        monotone_decay,
        passed: means_within_envelope && monotone_decay,
    })
}

/// One trajectory observed at increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PathSample {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![fmt17(*t)];
            row.extend(x.iter().map(|v| fmt17(*v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Exact path started at `x0` at time 0, observed at `times` (non-negative and
/// strictly increasing). Each increment is an exact transition.
pub fn sample_path(params: &OuParams, x0: &[f64], times: &[f64], seed: u64) -> Result<PathSample> {
    check_point(params, x0)?;
    if times.is_empty() {
        return Err(Error::InvalidInput("at least one observation time is required".into()));
    }
    if times[0] < 0.0 || !times.iter().all(|t| t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "observation times must be finite, non-negative and strictly increasing".into(),
        ));
    }
    let d = params.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vector::from_column_slice(x0);
    let mut prev = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - prev;
        if dt > 0.0 {
            let etb = expm(&(params.b() * dt))?;
            let chol = measure_at(params, dt)?.cholesky_factor().clone();
            let z = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            x = etb * x - chol * z;
        }
        states.push(x.iter().copied().collect());
        prev = t;
    }
    Ok(PathSample {
        times: times.to_vec(),
        states,
        seed,
    })
}

/// One row per draw, columns x0..x{d−1}.
pub fn write_samples_csv<W: Write>(samples: &[Vec<f64>], out: &mut W) -> std::io::Result<()> {
    let d = samples.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for y in samples {
        let row: Vec<String> = y.iter().map(|v| fmt17(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maximal::{apply_semigroup, GaussianBump};

    fn rotation() -> OuParams {
        OuParams::rotation(&[1.0], 2).unwrap()
    }

    #[test]
    fn transition_mean_and_covariance() {
        let p = rotation();
        let (t, x, n) = (0.6, [1.5, -0.5], 100_000);
        let s = transition_sample(&p, t, &x, n, 17).unwrap();
        let m = expm(&(p.b() * t)).unwrap() * Vector::from_column_slice(&x);
        let qt = covariance_at(&p, t).unwrap();
        let env = 4.0 * (qt.trace() / n as f64).sqrt();
        for i in 0..2 {
            let mean = mean_and_error(&s, |y| y[i]).estimate;
            assert!((mean - m[i]).abs() < env);
        }
        for i in 0..2 {
            for j in 0..2 {
                let c = mean_and_error(&s, |y| (y[i] - m[i]) * (y[j] - m[j])).estimate;
                assert!((c - qt[(i, j)]).abs() < 0.05 * qt.norm());
            }
        }
    }

    #[test]
    fn constant_function_has_no_variance() {
        let e = empirical_semigroup(&rotation(), 0.3, |_| 1.0, &[0.2, 0.1], 5000, 1).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.z_score(1.0), 0.0);
    }

    #[test]
    fn linear_function_and_bump() {
        let p = rotation();
        let x = [0.4, -1.1];
        let t = 0.7;
        let m = expm(&(p.b() * t)).unwrap() * Vector::from_column_slice(&x);
        let e = empirical_semigroup(&p, t, |y| 2.0 * y[0] - y[1], &x, 100_000, 5).unwrap();
        assert!(e.z_score(2.0 * m[0] - m[1]) < 3.0);

        let bump = GaussianBump::new(vec![0.3, 0.2], 0.5).unwrap();
        let e = empirical_semigroup(&p, t, |y| bump.eval(y), &x, 100_000, 9).unwrap();
        let q = apply_semigroup(&p, t, |y| bump.eval(y), &x).unwrap();
        assert!(e.z_score(q) < 3.0);
    }

    #[test]
    fn sampling_is_reproducible_across_worker_counts() {
        let p = rotation();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| empirical_semigroup(&p, 0.5, |y| y[0].sin(), &[1.0, 0.0], 20_000, 3).unwrap());
        let b = four.install(|| empirical_semigroup(&p, 0.5, |y| y[0].sin(), &[1.0, 0.0], 20_000, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn ergodic_moments_converge() {
        let p = rotation();
        let late = 10.0 / p.spectral_abscissa().abs();
        let r = ergodic_check(&p, &[0.1, 0.5, 1.0, 3.0, late], 100_000, 2).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.rows.last().unwrap().second_moment_error < 0.03);

        let r = ergodic_check_from(&p, &ErgodicStart::Stationary, &[0.2, 1.0, 4.0], 100_000, 4).unwrap();
        assert!(r.means_within_envelope);
        for row in &r.rows {
            assert!(row.second_moment_error < 4.0 * row.noise);
        }
    }

    #[test]
    fn path_starts_at_initial_point_and_is_reproducible() {
        let p = rotation();
        let path = sample_path(&p, &[1.0, 2.0], &[0.0, 0.1, 0.5, 2.0], 8).unwrap();
        assert_eq!(path.states[0], vec![1.0, 2.0]);
        assert_eq!(path, sample_path(&p, &[1.0, 2.0], &[0.0, 0.1, 0.5, 2.0], 8).unwrap());
        assert!(sample_path(&p, &[1.0, 2.0], &[0.5, 0.1], 8).is_err());
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x0,x1\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = rotation();
        assert!(matches!(transition_sample(&p, 0.0, &[0.0, 0.0], 10, 1), Err(Error::Domain(_))));
        assert!(matches!(transition_sample(&p, 1.0, &[0.0, 0.0], 0, 1), Err(Error::InvalidInput(_))));
        assert!(matches!(transition_sample(&p, 1.0, &[0.0], 10, 1), Err(Error::InvalidInput(_))));
        assert!(ergodic_check(&p, &[1.0, 0.5], 10, 1).is_err());
    }
}
