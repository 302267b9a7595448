use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative change of the estimated constant allowed under grid doubling.
pub const STABILITY_TOL: f64 = 0.05;
/// Violating points kept verbatim in a report; the count is always exact.
pub const MAX_LISTED_VIOLATIONS: usize = 32;

/// One evaluated grid point, in the fixed CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub s: f64,
    pub norm_x: f64,
    pub norm_y: f64,
    pub angle: f64,
    pub region: String,
    pub kernel: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// A grid point where the refined grid exceeded the coarse constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub s: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ratio: f64,
}

/// Worst value over one labelled part of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub points: usize,
    pub worst: f64,
}

/// Outcome of a grid certification.
///
/// `constant` is the estimated C on the base grid and `refined_constant` the
/// same estimate after every axis is doubled. A run passes when the constant is
/// finite, `relative_change` is within `stability_tol` (when stability is
/// required) and no violations were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub name: String,
    pub grid: Vec<String>,
    pub points: usize,
    pub refined_points: usize,
    pub worst_ratio: f64,
    pub constant: f64,
    pub refined_constant: f64,
    pub relative_change: f64,
    pub stability_tol: f64,
    pub stability_required: bool,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    pub regions: BTreeMap<String, RegionSummary>,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub passed: bool,
    #[serde(skip)]
    pub records: Vec<GridRecord>,
}

impl CertificationReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            grid: Vec::new(),
            points: 0,
            refined_points: 0,
            worst_ratio: 0.0,
            constant: 0.0,
            refined_constant: 0.0,
            relative_change: 0.0,
            stability_tol: STABILITY_TOL,
            stability_required: true,
            violation_count: 0,
            violations: Vec::new(),
            regions: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
            passed: false,
            records: Vec::new(),
        }
    }

    /// Records the coarse and refined constants and sets `relative_change`.
    pub fn set_constants(&mut self, coarse: f64, refined: f64) {
        self.constant = coarse;
        self.refined_constant = refined;
        self.relative_change = relative_change(coarse, refined);
    }

    pub fn add_violation(&mut self, v: Violation) {
        self.violation_count += 1;
        if self.violations.len() < MAX_LISTED_VIOLATIONS {
            self.violations.push(v);
        }
    }

    pub fn stable(&self) -> bool {
        !self.stability_required || self.relative_change <= self.stability_tol
    }

    /// Sets `passed` from finiteness, stability and the violation count, and
    /// returns it.
    pub fn finalize(&mut self) -> bool {
        self.passed = self.constant.is_finite()
            && self.refined_constant.is_finite()
            && self.worst_ratio.is_finite()
            && self.stable()
            && self.violation_count == 0;
        self.passed
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("report: {e}")))
    }

    /// Writes the grid records as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write_records_csv(&self.records, out)
    }
}

/// |refined − coarse| / max(|coarse|, |refined|), with 0 when both vanish.
pub fn relative_change(coarse: f64, refined: f64) -> f64 {
    let scale = coarse.abs().max(refined.abs());
    if scale == 0.0 {
        0.0
    } else {
        (refined - coarse).abs() / scale
    }
}

pub const CSV_HEADER: &str = "s,norm_x,norm_y,angle,region,kernel,bound,ratio";

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

pub fn write_records_csv<W: Write>(records: &[GridRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt17(r.s),
            fmt17(r.norm_x),
            fmt17(r.norm_y),
            fmt17(r.angle),
            r.region,
            fmt17(r.kernel),
            fmt17(r.bound),
            fmt17(r.ratio)
        )?;
    }
    Ok(())
}
