use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::wedge;

/// Label of a pair (x, y) in one of the decompositions used by the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    #[serde(rename = "L")]
    Local,
    #[serde(rename = "G")]
    Global,
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Local => "L",
            RegionLabel::Global => "G",
            RegionLabel::R1 => "R1",
            RegionLabel::R2 => "R2",
            RegionLabel::R3 => "R3",
            RegionLabel::R4 => "R4",
            RegionLabel::R5 => "R5",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// |x − y| ≤ min(1, |x + y|⁻¹), inclusive.
pub fn local_region(x: &[f64], y: &[f64]) -> bool {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    let diff = diff.sqrt();
    let sum = sum.sqrt();
    // |x − y|·|x + y| ≤ 1 avoids dividing by a vanishing |x + y|.
    diff <= 1.0 && diff * sum <= 1.0
}

pub fn local_or_global(x: &[f64], y: &[f64]) -> RegionLabel {
    if local_region(x, y) {
        RegionLabel::Local
    } else {
        RegionLabel::Global
    }
}

fn dot2(x: [f64; 2], y: [f64; 2]) -> f64 {
    x[0] * y[0] + x[1] * y[1]
}

/// |sin ϑ| for the angle between x and y; zero when either vector vanishes.
pub fn abs_sin_angle(x: [f64; 2], y: [f64; 2]) -> f64 {
    let n = norm(&x) * norm(&y);
    if n == 0.0 {
        0.0
    } else {
        (wedge(x, y).abs() / n).min(1.0)
    }
}

/// Five-set decomposition of ℝ² × ℝ² used for small times.
///
/// R1: ⟨x,y⟩ < 0. R2: ⟨x,y⟩ ≥ 0, x∧y ≥ 0. The remaining pairs have ⟨x,y⟩ ≥ 0
/// and x∧y < 0 and split into R3 (|x − y| ≥ β|y|), R4 (|x − y| < β|y| and
/// |sin ϑ| ≥ δ) and R5 (|x − y| < β|y| and |sin ϑ| < δ).
pub fn classify_region_five(x: [f64; 2], y: [f64; 2], beta: f64, delta: f64) -> Result<RegionLabel> {
    for (name, v) in [("beta", beta), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    let ip = dot2(x, y);
    if ip < 0.0 {
        return Ok(RegionLabel::R1);
    }
    if wedge(x, y) >= 0.0 {
        return Ok(RegionLabel::R2);
    }
    let diff = norm(&[x[0] - y[0], x[1] - y[1]]);
    if diff >= beta * norm(&y) {
        return Ok(RegionLabel::R3);
    }
    if abs_sin_angle(x, y) >= delta {
        Ok(RegionLabel::R4)
    } else {
        Ok(RegionLabel::R5)
    }
}

/// Three-set decomposition used for periodic times.
///
/// R1: ⟨x,y⟩ ≥ 0, x∧y ≥ 0. R2: ⟨x,y⟩ ≥ 0, x∧y < 0. R3: ⟨x,y⟩ < 0.
pub fn classify_region_three(x: [f64; 2], y: [f64; 2]) -> RegionLabel {
    if dot2(x, y) < 0.0 {
        RegionLabel::R3
    } else if wedge(x, y) >= 0.0 {
        RegionLabel::R1
    } else {
        RegionLabel::R2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_examples() {
        assert!(local_region(&[0.3, -2.0], &[0.3, -2.0]));
        assert!(!local_region(&[3.0], &[0.0]));
        assert!(local_region(&[1.04], &[0.96]));
        // Boundary |x − y| = 1 with |x + y| = 1 is included.
        assert!(local_region(&[1.0], &[0.0]));
    }

    #[test]
    fn five_examples() {
        let (b, d) = (0.05, 0.05);
        assert_eq!(classify_region_five([1.0, 0.0], [-1.0, 0.0], b, d).unwrap(), RegionLabel::R1);
        assert_eq!(classify_region_five([1.0, 0.0], [0.0, 1.0], b, d).unwrap(), RegionLabel::R2);
        let eta = {
            let n = (1.0f64 + 1e-6).sqrt();
            [1.0 / n, 1e-3 / n]
        };
        let xi = [1.0, 0.0];
        assert!(wedge(xi, eta) > 0.0);
        // Swap roles so that ξ∧η < 0.
        assert_eq!(classify_region_five(eta, xi, b, d).unwrap(), RegionLabel::R5);
        assert_eq!(classify_region_five([1.0, 0.5], [1.0, 0.0], b, d).unwrap(), RegionLabel::R3);
        assert!(classify_region_five(xi, eta, 1.0, d).is_err());
        assert!(classify_region_five(xi, eta, b, 0.0).is_err());
    }

    #[test]
    fn three_examples() {
        assert_eq!(classify_region_three([1.0, 0.0], [0.0, 1.0]), RegionLabel::R1);
        assert_eq!(classify_region_three([0.0, 1.0], [1.0, 0.0]), RegionLabel::R2);
        assert_eq!(classify_region_three([1.0, 0.0], [-1.0, 0.2]), RegionLabel::R3);
    }
}
