//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use oumax::config::RunConfig;
use oumax::gaussian::OuParams;
use oumax::kernels::{
    log_factor_2d, log_kernel_general, log_kernel_symmetric, plane, tau, tau_inv, BlockSpec,
};
use oumax::matrix::{expm, from_rows, skew_canonical_form, to_rows, Matrix, Vector};
use oumax::maximal::certify::certify_comparison;
use oumax::maximal::report::write_records_csv;
use oumax::maximal::{
    apply_semigroup, certify_global_periodic, certify_global_small_time, certify_local_bound,
    l1_unboundedness_probe, maximal_scan, polynomial_certificates, split_maximal, weak_type_ratio,
    CertificationReport, GaussianBump, PolyRegion, TimeSet,
};
use oumax::mc::{ergodic_check_from, sample_path, transition_sample, write_samples_csv, ErgodicStart};
use oumax::normal::{building_blocks, normality_of, reduce_to_standard};
use oumax::Error;
use serde_json::{json, Value};

use crate::{Bump, Cli, Command, List, Model};

/// An error with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::Domain(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<ExitCode, Failure>;

/// Where results go, resolved from flags and configuration.
struct Sinks {
    output: Option<PathBuf>,
    csv: Option<PathBuf>,
}

impl Sinks {
    fn json(&self, value: &Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).expect("values serialize");
        match &self.output {
            Some(path) => std::fs::write(path, text + "\n").map_err(|e| io_failure(path, e)),
            None => {
                let mut out = std::io::stdout().lock();
                match writeln!(out, "{text}").and_then(|_| out.flush()) {
                    // A closed pipe (e.g. `| head`) is not an error of the run.
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure {
                        code: 1,
                        message: format!("stdout: {e}"),
                    }),
                    _ => Ok(()),
                }
            }
        }
    }

    fn csv<F>(&self, write: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let Some(path) = &self.csv else {
            return Ok(());
        };
        let file = File::create(path).map_err(|e| io_failure(path, e))?;
        let mut out = BufWriter::new(file);
        write(&mut out).and_then(|_| out.flush()).map_err(|e| io_failure(path, e))
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn exit(passed: bool) -> Outcome {
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_json_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        }
    }
}

/// Applies `--theta`/`--dim` on top of the configuration.
fn apply_model(cfg: &mut RunConfig, model: &Model) {
    if let Some(List(theta)) = &model.theta {
        cfg.params = None;
        cfg.theta = Some(theta.clone());
    }
    if model.dim.is_some() {
        cfg.dim = model.dim;
    }
}

fn params(cfg: &RunConfig) -> Result<OuParams, Failure> {
    cfg.ou_params()?
        .ok_or_else(|| Failure::usage("no operator given: pass --theta or set `params` or `theta` in the config"))
}

fn block_spec(cfg: &RunConfig) -> Result<BlockSpec, Failure> {
    if cfg.params.is_some() {
        return Err(Failure::usage("this command needs a block operator: use `theta`, not `params`"));
    }
    cfg.block_spec()?
        .ok_or_else(|| Failure::usage("no rotation speeds given: pass --theta or set `theta` in the config"))
}

fn point(flag: Option<&List>, cfg: Option<&Vec<f64>>, name: &str, d: usize, default_zero: bool) -> Result<Vec<f64>, Failure> {
    let p = match (flag, cfg) {
        (Some(List(v)), _) => v.clone(),
        (None, Some(v)) => v.clone(),
        (None, None) if default_zero => vec![0.0; d],
        (None, None) => return Err(Failure::usage(format!("missing --{name}"))),
    };
    if p.len() != d {
        return Err(Failure::usage(format!("--{name} has dimension {}, expected {d}", p.len())));
    }
    Ok(p)
}

fn bump(b: &Bump, d: usize) -> Result<GaussianBump, Failure> {
    let center = point(b.center.as_ref(), None, "center", d, true)?;
    Ok(GaussianBump::new(center, b.width)?)
}

fn time(flag: Option<f64>, cfg: Option<f64>, name: &str) -> Result<f64, Failure> {
    flag.or(cfg).ok_or_else(|| Failure::usage(format!("missing --{name}")))
}

fn matrix_json(m: &Matrix) -> Value {
    json!(to_rows(m))
}

pub fn run(cli: Cli) -> Outcome {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    let sinks = Sinks {
        output: cli.output.or_else(|| cfg.output.clone()),
        csv: cli.csv.or_else(|| cfg.csv.clone()),
    };
    let keep = sinks.csv.is_some();
    match cli.command {
        Command::Kernel { model, t, s, x, y } => {
            apply_model(&mut cfg, &model);
            let t = match s {
                Some(s) => tau(s)?,
                None => time(t, cfg.t, "t")?,
            };
            kernel(&cfg, t, x.as_ref(), y.as_ref(), &sinks)
        }
        Command::Canonical { matrix, model } => {
            apply_model(&mut cfg, &model);
            canonical(&cfg, matrix.as_deref(), &sinks)
        }
        Command::Normality { model } => {
            apply_model(&mut cfg, &model);
            normality(&cfg, &sinks)
        }
        Command::Blocks { model } => {
            apply_model(&mut cfg, &model);
            blocks(&cfg, &sinks)
        }
        Command::Apply { model, t, x, bump: b } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let t = time(t, cfg.t, "t")?;
            let x = point(x.as_ref(), cfg.x.as_ref(), "x", p.dim(), false)?;
            let f = bump(&b, p.dim())?;
            let quadrature = apply_semigroup(&p, t, |y: &[f64]| f.eval(y), &x)?;
            let closed = f.semigroup(&p, t, &x)?;
            sinks.json(&json!({
                "t": t, "x": x, "bump": to_value(&f),
                "quadrature": quadrature, "closed_form": closed,
                "abs_error": (quadrature - closed).abs(),
            }))?;
            exit(true)
        }
        Command::Maximal {
            model,
            x,
            t_max,
            per_decade,
            bump: b,
        } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let x = point(x.as_ref(), cfg.x.as_ref(), "x", p.dim(), false)?;
            let f = bump(&b, p.dim())?;
            let times = TimeSet::interval(t_max.or(cfg.t_max).unwrap_or(1.0), per_decade)?;
            let scan = maximal_scan(&p, |y: &[f64]| f.eval(y), &x, &times)?;
            let split = split_maximal(&p, |y: &[f64]| f.eval(y), &x, &times)?;
            sinks.json(&json!({
                "x": x, "bump": to_value(&f), "time_points": times.len(),
                "scan": to_value(&scan), "local": to_value(&split.local), "global": to_value(&split.global),
                "split_bound_holds": scan.value <= split.local.value + split.global.value + 1e-12,
            }))?;
            exit(true)
        }
        Command::CertifyLocal { model } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let grid = cfg.local_grid.unwrap_or_default();
            report(certify_local_bound(&p, &grid, keep)?, &sinks)
        }
        Command::CertifyGlobal { model, s_max } => {
            apply_model(&mut cfg, &model);
            let spec = block_spec(&cfg)?;
            let s_max = s_max.or(cfg.s_max).unwrap_or(oumax::maximal::certify::DEFAULT_S_MAX);
            let grid = cfg.global_grid.unwrap_or_default();
            report(certify_global_small_time(&spec, s_max, &grid, keep)?, &sinks)
        }
        Command::CertifyPeriodic { model } => {
            apply_model(&mut cfg, &model);
            let spec = block_spec(&cfg)?;
            let opts = cfg.periodic.unwrap_or_default();
            report(certify_global_periodic(&spec, &opts, keep)?, &sinks)
        }
        Command::CertifyRegions { region } => certify_regions(&cfg, region.as_deref(), keep, &sinks),
        Command::WeakType {
            model,
            center,
            members,
            t_max,
            max_growth,
        } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let mut default_center = vec![0.0; p.dim()];
            default_center[0] = 0.5;
            let c = match center {
                Some(List(c)) => c,
                None => default_center,
            };
            if members < 2 {
                return Err(Failure::usage("--members must be at least 2"));
            }
            let family = (0..members)
                .map(|k| GaussianBump::new(c.clone(), 2f64.powi(-(k as i32))))
                .collect::<Result<Vec<_>, _>>()?;
            let mut opts = cfg.weak_type.unwrap_or_default();
            if let Some(t) = t_max.or(cfg.t_max) {
                opts.t_max = t;
            }
            let r = weak_type_ratio(&p, &family, &opts)?;
            let growth = r.max_growth();
            let passed = growth <= max_growth;
            sinks.json(&json!({
                "t_max": opts.t_max, "center": c, "result": to_value(&r),
                "max_growth": growth, "tolerated_growth": max_growth, "passed": passed,
            }))?;
            exit(passed)
        }
        Command::L1Probe {
            model,
            t_max,
            radii,
            per_decade,
        } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let radii = match radii {
                Some(List(r)) => r,
                None => (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect(),
            };
            let probe = l1_unboundedness_probe(&p, t_max.or(cfg.t_max).unwrap_or(1.0), &radii, per_decade)?;
            sinks.json(&json!({
                "dim": p.dim(), "probe": to_value(&probe), "expected_slope": -(p.dim() as f64),
            }))?;
            exit(true)
        }
        Command::Simulate {
            model,
            x,
            t,
            times,
            n,
            seed,
        } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let x = point(x.as_ref(), cfg.x.as_ref(), "x", p.dim(), true)?;
            let seed = seed.or(cfg.seed).unwrap_or(0);
            let times = times.map(|List(v)| v).or_else(|| cfg.times.clone());
            simulate(&p, &x, t.or(cfg.t), times, n.or(cfg.n), seed, &sinks)
        }
        Command::Ergodic {
            model,
            times,
            n,
            seed,
            stationary,
        } => {
            apply_model(&mut cfg, &model);
            let p = params(&cfg)?;
            let times = times
                .map(|List(v)| v)
                .or_else(|| cfg.times.clone())
                .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]);
            let start = if stationary {
                ErgodicStart::Stationary
            } else {
                ErgodicStart::Point(point(None, cfg.x.as_ref(), "x", p.dim(), true)?)
            };
            let r = ergodic_check_from(&p, &start, &times, n.or(cfg.n).unwrap_or(10_000), seed.or(cfg.seed).unwrap_or(0))?;
            sinks.json(&to_value(&r))?;
            exit(r.passed)
        }
    }
}

fn kernel(cfg: &RunConfig, t: f64, x: Option<&List>, y: Option<&List>, sinks: &Sinks) -> Outcome {
    let p = params(cfg)?;
    let d = p.dim();
    let x = point(x, cfg.x.as_ref(), "x", d, false)?;
    let y = point(y, cfg.y.as_ref(), "y", d, false)?;
    let log_general = log_kernel_general(&p, t, &x, &y)?;
    let mut out = json!({
        "t": t, "s": tau_inv(t)?, "x": x, "y": y,
        "value": log_general.exp(), "log_value": log_general,
    });
    if cfg.params.is_none() {
        // Block operator: symmetric kernel times one rotation factor per plane.
        let spec = block_spec(cfg)?;
        let log_sym = log_kernel_symmetric(t, &x, &y)?;
        let mut log_product = log_sym;
        let mut factors = Vec::new();
        for (j, &theta) in spec.theta().iter().enumerate() {
            let lf = log_factor_2d(theta, t, plane(&x, j), plane(&y, j))?;
            log_product += lf;
            factors.push(json!({"plane": j, "theta": theta, "value": lf.exp(), "log_value": lf}));
        }
        out["decomposition"] = json!({
            "symmetric": log_sym.exp(),
            "factors": factors,
            "product": log_product.exp(),
            "log_relative_error": (log_product - log_general).abs(),
        });
    }
    sinks.json(&out)?;
    exit(true)
}

fn parse_matrix(text: &str) -> Result<Matrix, Failure> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| Failure::usage(format!("--matrix: expected JSON rows: {e}")))?;
    Ok(from_rows(&rows)?)
}

fn canonical(cfg: &RunConfig, matrix: Option<&str>, sinks: &Sinks) -> Outcome {
    let r = match matrix {
        Some(text) => parse_matrix(text)?,
        None => {
            let p = params(cfg)?;
            match p.shorthand() {
                Some(s) => s.r.clone(),
                None => reduce_to_standard(&p)?.r,
            }
        }
    };
    let form = skew_canonical_form(&r)?;
    let residual = (form.reconstruct() - &r).norm();
    sinks.json(&json!({
        "g": matrix_json(&form.g), "theta": form.theta, "reconstruction_residual": residual,
    }))?;
    exit(true)
}

fn normality(cfg: &RunConfig, sinks: &Sinks) -> Outcome {
    let p = params(cfg)?;
    let form = reduce_to_standard(&p)?;
    let report = normality_of(&form);
    sinks.json(&json!({
        "d_lambda": form.d_lambda, "r": matrix_json(&form.r), "b_tilde": matrix_json(&form.b_tilde),
        "m": matrix_json(&form.m), "report": to_value(&report),
    }))?;
    exit(true)
}

fn blocks(cfg: &RunConfig, sinks: &Sinks) -> Outcome {
    let p = params(cfg)?;
    let form = reduce_to_standard(&p)?;
    let blocks = building_blocks(&form)?;
    let drift_residual = (blocks.assembled_drift() - &form.b_tilde).norm();
    let mut list = Vec::new();
    for b in &blocks.blocks {
        let restricted = b.restricted_r();
        let theta = skew_canonical_form(&restricted)?.theta;
        list.push(json!({
            "alpha": b.alpha, "indices": b.indices, "r": matrix_json(&restricted), "theta": theta,
        }));
    }
    sinks.json(&json!({
        "d_lambda": form.d_lambda, "m": matrix_json(&form.m), "blocks": list, "drift_residual": drift_residual,
    }))?;
    exit(true)
}

fn report(r: CertificationReport, sinks: &Sinks) -> Outcome {
    sinks.csv(|out| r.write_csv(out))?;
    sinks.json(&to_value(&r))?;
    exit(r.passed)
}

fn certify_regions(cfg: &RunConfig, region: Option<&str>, keep: bool, sinks: &Sinks) -> Outcome {
    let all = ["r5-small-time", "r2-periodic", "r3-periodic", "comparison"];
    let selected: Vec<&str> = match region {
        Some(r) if all.contains(&r) => vec![r],
        Some(r) => {
            return Err(Failure::usage(format!(
                "unknown region `{r}`; expected one of {}",
                all.join(", ")
            )))
        }
        None => all.to_vec(),
    };
    let opts = cfg.polynomial.unwrap_or_default();
    let mut reports = Vec::new();
    for name in selected {
        let r = if name == "comparison" {
            certify_comparison(&cfg.comparison_grid.unwrap_or_default(), keep)?
        } else {
            polynomial_certificates(name.parse::<PolyRegion>()?, &opts)?
        };
        reports.push(r);
    }
    let records: Vec<_> = reports.iter().flat_map(|r| r.records.iter().cloned()).collect();
    sinks.csv(|out| write_records_csv(&records, out))?;
    let passed = reports.iter().all(|r| r.passed);
    sinks.json(&json!({"reports": reports.iter().map(to_value).collect::<Vec<_>>(), "passed": passed}))?;
    exit(passed)
}

fn simulate(
    p: &OuParams,
    x: &[f64],
    t: Option<f64>,
    times: Option<Vec<f64>>,
    n: Option<usize>,
    seed: u64,
    sinks: &Sinks,
) -> Outcome {
    if let Some(times) = times {
        let path = sample_path(p, x, &times, seed)?;
        sinks.csv(|out| path.write_csv(out))?;
        sinks.json(&json!({
            "kind": "path", "seed": seed, "x0": x, "times": path.times,
            "final_state": path.states.last(),
        }))?;
        return exit(true);
    }
    let t = t.ok_or_else(|| Failure::usage("simulate needs --t or --times"))?;
    let n = n.unwrap_or(1000);
    let samples = transition_sample(p, t, x, n, seed)?;
    let d = p.dim();
    let mut mean = vec![0.0; d];
    for y in &samples {
        for (m, v) in mean.iter_mut().zip(y) {
            *m += v / n as f64;
        }
    }
    let expected = expm(&(p.b() * t))? * Vector::from_column_slice(x);
    sinks.csv(|out| write_samples_csv(&samples, out))?;
    sinks.json(&json!({
        "kind": "transition", "seed": seed, "t": t, "n": n, "x": x,
        "mean": mean, "expected_mean": expected.as_slice(),
    }))?;
    exit(true)
}
