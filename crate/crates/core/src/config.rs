//! Run configuration and the small text formats accepted on the command line.
//!
//! A configuration is a JSON object. Every key is optional and unknown keys are
//! rejected with an error naming the key. Grid and option blocks may override a
//! subset of their fields; the rest keep their defaults.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::gaussian::OuParams;
use crate::kernels::BlockSpec;
use crate::maximal::{ComparisonGrid, GlobalGrid, LocalGrid, PeriodicOptions, PolyOptions, WeakTypeOptions};

/// Parses a comma-separated list of finite numbers, e.g. `1,0` or ` 0.5, -2e-3 `.
pub fn parse_number_list(text: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidInput("empty list".into()));
    }
    trimmed
        .split(',')
        .map(|item| {
            let item = item.trim();
            let v: f64 = item
                .parse()
                .map_err(|_| Error::InvalidInput(format!("`{item}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("`{item}` is not finite")));
            }
            Ok(v)
        })
        .collect()
}

/// A point of ℝ^d written as `x1,...,xd`.
pub fn parse_point(text: &str) -> Result<Vec<f64>> {
    parse_number_list(text)
}

/// Points separated by `;`, all of the same dimension, e.g. `1,0;0,1`.
pub fn parse_point_list(text: &str) -> Result<Vec<Vec<f64>>> {
    let points: Vec<Vec<f64>> = text.split(';').map(parse_point).collect::<Result<_>>()?;
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::InvalidInput(format!(
            "points have mixed dimensions {d} and {}",
            p.len()
        )));
    }
    Ok(points)
}

/// Rotation speeds written as `θ1,...,θk`, each non-negative.
pub fn parse_theta_list(text: &str) -> Result<Vec<f64>> {
    let theta = parse_number_list(text)?;
    if let Some(v) = theta.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidInput(format!("speeds must be non-negative, got {v}")));
    }
    Ok(theta)
}

/// Options shared by every subcommand. Command-line flags override these values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    /// General parameters `{"Q", "B"}` or `{"alpha", "R"}`.
    pub params: Option<OuParams>,
    /// Block shorthand: speeds of B = −I + R(Θ) with Q = I.
    pub theta: Option<Vec<f64>>,
    pub dim: Option<usize>,
    pub t: Option<f64>,
    pub t_max: Option<f64>,
    pub s_max: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub times: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub local_grid: Option<LocalGrid>,
    pub global_grid: Option<GlobalGrid>,
    pub periodic: Option<PeriodicOptions>,
    pub comparison_grid: Option<ComparisonGrid>,
    pub polynomial: Option<PolyOptions>,
    pub weak_type: Option<WeakTypeOptions>,
}

const KEYS: &[&str] = &[
    "params",
    "theta",
    "dim",
    "t",
    "t_max",
    "s_max",
    "x",
    "y",
    "times",
    "n",
    "seed",
    "threads",
    "output",
    "csv",
    "local_grid",
    "global_grid",
    "periodic",
    "comparison_grid",
    "polynomial",
    "weak_type",
];

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    obj.get(key)
        .map(|v| {
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(format!("key `{key}`: {e}")))
        })
        .transpose()
}

fn finite_list(v: Option<Vec<f64>>, key: &str) -> Result<Option<Vec<f64>>> {
    if let Some(list) = &v {
        if list.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("key `{key}`: entries must be finite")));
        }
    }
    Ok(v)
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidInput("configuration must be a JSON object".into()))?;
        if let Some(key) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidInput(format!("unknown key `{key}`")));
        }
        let params = obj
            .get("params")
            .map(|v| {
                OuParams::from_json_value(v).map_err(|e| match e {
                    Error::InvalidInput(m) => Error::InvalidInput(format!("key `params`: {m}")),
                    other => other,
                })
            })
            .transpose()?;
        let config = Self {
            params,
            theta: finite_list(field(obj, "theta")?, "theta")?,
            dim: field(obj, "dim")?,
            t: field(obj, "t")?,
            t_max: field(obj, "t_max")?,
            s_max: field(obj, "s_max")?,
            x: finite_list(field(obj, "x")?, "x")?,
            y: finite_list(field(obj, "y")?, "y")?,
            times: finite_list(field(obj, "times")?, "times")?,
            n: field(obj, "n")?,
            seed: field(obj, "seed")?,
            threads: field(obj, "threads")?,
            output: field(obj, "output")?,
            csv: field(obj, "csv")?,
            local_grid: field(obj, "local_grid")?,
            global_grid: field(obj, "global_grid")?,
            periodic: field(obj, "periodic")?,
            comparison_grid: field(obj, "comparison_grid")?,
            polynomial: field(obj, "polynomial")?,
            weak_type: field(obj, "weak_type")?,
        };
        if config.params.is_some() && config.theta.is_some() {
            return Err(Error::InvalidInput(
                "key `theta` cannot be combined with key `params`".into(),
            ));
        }
        if let Some(theta) = &config.theta {
            if theta.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidInput("key `theta`: speeds must be non-negative".into()));
            }
        }
        if config.threads == Some(0) {
            return Err(Error::InvalidInput("key `threads`: must be at least 1".into()));
        }
        Ok(config)
    }

    /// The block operator given by `theta` and `dim`; `dim` defaults to 2·len(theta).
    pub fn block_spec(&self) -> Result<Option<BlockSpec>> {
        match &self.theta {
            Some(theta) => {
                let dim = self.dim.unwrap_or(2 * theta.len());
                BlockSpec::new(theta.clone(), dim).map(Some)
            }
            None => Ok(None),
        }
    }

    /// The process parameters: `params` if given, else the block shorthand.
    pub fn ou_params(&self) -> Result<Option<OuParams>> {
        if let Some(p) = &self.params {
            return Ok(Some(p.clone()));
        }
        self.block_spec()?.map(|spec| spec.params()).transpose()
    }
}
