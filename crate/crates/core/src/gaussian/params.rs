use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::gaussian::covariance::lyapunov_solve;
use crate::matrix::{
    ensure_square_finite, from_rows, hurwitz_check, is_skew, rotation_generator, to_rows, Matrix,
    ALGEBRAIC_TOL,
};

/// Diffusion matrix Q and Hurwitz drift B of an Ornstein–Uhlenbeck operator
/// ½tr(Q∇²) + ⟨Bx, ∇⟩, together with its invariant covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct OuParams {
    q: Matrix,
    b: Matrix,
    q_inf: Matrix,
    abscissa: f64,
    shorthand: Option<BlockShorthand>,
}

/// The (α, R) description of Q = I, B = (R − I)/(2α).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockShorthand {
    pub alpha: f64,
    pub r: Matrix,
}

impl OuParams {
    pub fn new(q: Matrix, b: Matrix) -> Result<Self> {
        let d = ensure_square_finite(&q, "Q")?;
        if ensure_square_finite(&b, "B")? != d {
            return Err(Error::InvalidInput(format!(
                "Q is {d}x{d} but B is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if (&q - q.transpose()).norm() > ALGEBRAIC_TOL * (1.0 + q.norm()) {
            return Err(Error::InvalidInput("Q is not symmetric".into()));
        }
        let q = (&q + q.transpose()) * 0.5;
        if q.clone().cholesky().is_none() {
            return Err(Error::InvalidInput("Q is not positive definite".into()));
        }
        if b.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput("B must be nonzero".into()));
        }
        let spec = hurwitz_check(&b)?;
        if !spec.hurwitz {
            return Err(Error::InvalidInput(format!(
                "B is not Hurwitz (spectral abscissa {})",
                spec.abscissa
            )));
        }
        let q_inf = lyapunov_solve(&b, &q)?;
        Ok(Self {
            q,
            b,
            q_inf,
            abscissa: spec.abscissa,
            shorthand: None,
        })
    }

    /// Q = I and B = (R − I)/(2α) with R skew-symmetric.
    pub fn block(alpha: f64, r: Matrix) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        let d = ensure_square_finite(&r, "R")?;
        if !is_skew(&r, ALGEBRAIC_TOL) {
            return Err(Error::InvalidInput("R must be skew-symmetric".into()));
        }
        let b = (&r - Matrix::identity(d, d)) / (2.0 * alpha);
        let mut p = Self::new(Matrix::identity(d, d), b)?;
        p.shorthand = Some(BlockShorthand { alpha, r });
        Ok(p)
    }

    /// Q = I, B = −I: the symmetric operator ½Δ − ⟨x, ∇⟩.
    pub fn symmetric(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Self::new(Matrix::identity(dim, dim), -Matrix::identity(dim, dim))
    }

    /// Q = I, B = −I + R(Θ).
    pub fn rotation(theta: &[f64], dim: usize) -> Result<Self> {
        let r = rotation_generator(theta, dim)?;
        Self::block(0.5, r)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// Q∞, the solution of B·X + X·Bᵀ + Q = 0.
    pub fn q_inf(&self) -> &Matrix {
        &self.q_inf
    }

    /// Largest real part of the spectrum of B (negative).
    pub fn spectral_abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn shorthand(&self) -> Option<&BlockShorthand> {
        self.shorthand.as_ref()
    }

    /// Parses `{"Q": [[..]], "B": [[..]]}` or `{"alpha": a, "R": [[..]]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidInput("parameters must be a JSON object".into()))?;
        if let Some(key) = obj
            .keys()
            .find(|k| !matches!(k.as_str(), "Q" | "B" | "alpha" | "R"))
        {
            return Err(Error::InvalidInput(format!("unknown key `{key}`")));
        }
        let general = obj.contains_key("Q") || obj.contains_key("B");
        let block = obj.contains_key("alpha") || obj.contains_key("R");
        match (general, block) {
            (true, true) => Err(Error::InvalidInput(
                "key `alpha`/`R` cannot be combined with `Q`/`B`".into(),
            )),
            (true, false) => {
                let q = matrix_field(obj, "Q")?;
                let b = matrix_field(obj, "B")?;
                Self::new(q, b).map_err(|e| prefix_key(e, "Q/B"))
            }
            (false, true) => {
                let alpha = obj
                    .get("alpha")
                    .ok_or_else(|| Error::InvalidInput("missing key `alpha`".into()))?
                    .as_f64()
                    .ok_or_else(|| Error::InvalidInput("key `alpha`: expected a number".into()))?;
                let r = matrix_field(obj, "R")?;
                Self::block(alpha, r).map_err(|e| prefix_key(e, "alpha/R"))
            }
            (false, false) => Err(Error::InvalidInput(
                "missing keys: expected `Q` and `B`, or `alpha` and `R`".into(),
            )),
        }
    }

    /// JSON form; block-shorthand inputs serialize back to the shorthand.
    pub fn to_json_value(&self) -> Value {
        match &self.shorthand {
            Some(s) => serde_json::json!({"alpha": s.alpha, "R": to_rows(&s.r)}),
            None => serde_json::json!({"Q": to_rows(&self.q), "B": to_rows(&self.b)}),
        }
    }
}

fn prefix_key(e: Error, key: &str) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("key `{key}`: {m}")),
        other => other,
    }
}

fn matrix_field(obj: &Map<String, Value>, key: &str) -> Result<Matrix> {
    let v = obj
        .get(key)
        .ok_or_else(|| Error::InvalidInput(format!("missing key `{key}`")))?;
    let rows = v
        .as_array()
        .ok_or_else(|| Error::InvalidInput(format!("key `{key}`: expected an array of rows")))?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| {
            Error::InvalidInput(format!("key `{key}`: row {i} is not an array"))
        })?;
        let vals = row
            .iter()
            .map(|x| x.as_f64())
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| {
                Error::InvalidInput(format!("key `{key}`: row {i} has a non-numeric entry"))
            })?;
        parsed.push(vals);
    }
    let m = from_rows(&parsed).map_err(|e| prefix_key(e, key))?;
    ensure_square_finite(&m, key).map_err(|e| prefix_key(e, key))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_general_form() {
        let p = OuParams::from_json_str(r#"{"Q": [[1,0],[0,1]], "B": [[-1,1],[0,-1]]}"#).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.shorthand().is_none());
    }

    #[test]
    fn parses_block_shorthand() {
        let p = OuParams::from_json_str(r#"{"alpha": 0.5, "R": [[0,1],[-1,0]]}"#).unwrap();
        assert_eq!(p.b()[(0, 0)], -1.0);
        assert_eq!(p.b()[(0, 1)], 1.0);
        let back = OuParams::from_json_value(&p.to_json_value()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn errors_name_the_offending_key() {
        let e = OuParams::from_json_str(r#"{"Q": [[1]], "B": [[-1]], "beta": 2}"#).unwrap_err();
        assert!(e.to_string().contains("`beta`"));
        let e = OuParams::from_json_str(r#"{"Q": [[1, 0]], "B": [[-1]]}"#).unwrap_err();
        assert!(e.to_string().contains("`Q`"), "{e}");
        let e = OuParams::from_json_str(r#"{"alpha": "x", "R": [[0]]}"#).unwrap_err();
        assert!(e.to_string().contains("`alpha`"));
        let e = OuParams::from_json_str(r#"{"Q": [[1]]}"#).unwrap_err();
        assert!(e.to_string().contains("`B`"));
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(OuParams::new(Matrix::identity(2, 2), rotation_generator(&[1.0], 2).unwrap()).is_err());
        assert!(OuParams::new(-Matrix::identity(2, 2), -Matrix::identity(2, 2)).is_err());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(OuParams::new(asym, -Matrix::identity(2, 2)).is_err());
        assert!(OuParams::block(0.5, Matrix::identity(2, 2)).is_err());
    }
}
