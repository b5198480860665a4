//! The prescribed curvature function `F` and numeric checks of its
//! structural hypotheses on the annulus `R₁ < |X| < R₂`.

mod conditions;
mod expr;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use conditions::{
    boundary_directions, check_conditions, positivity_scan, verify_concavity, verify_condition_a,
    ChordReport, ChordWitness, ConditionA, ConditionReport, PositivityReport, CHORD_TOLERANCE,
};
pub use expr::{parse, BinOp, EvalError, Expr, Func, ParseError, ParseErrorKind, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unsupported dimension n = {0}; expected 1 or 2")]
    UnsupportedDim(usize),
    #[error("invalid annulus ({r1}, {r2}); need 0 < R1 < R2")]
    BadAnnulus { r1: f64, r2: f64 },
    #[error("variable x{index} does not exist in R^{ambient}")]
    VariableOutOfRange { index: usize, ambient: usize },
    #[error("F is not finite on the closed annulus: {0}")]
    NotFinite(EvalError),
}

/// Radial levels × directions used to vet finiteness on the closed annulus.
const VET_LEVELS: usize = 9;
const VET_DIRECTIONS: usize = 512;

/// Parsed `F` together with the dimension and annulus it is posed on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSpec {
    source: String,
    ast: Expr,
    dim: usize,
    r1: f64,
    r2: f64,
}

impl CurvatureSpec {
    pub fn new(text: &str, dim: usize, r1: f64, r2: f64) -> Result<Self, SpecError> {
        if dim != 1 && dim != 2 {
            return Err(SpecError::UnsupportedDim(dim));
        }
        if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r1 < r2) {
            return Err(SpecError::BadAnnulus { r1, r2 });
        }
        let ast = parse(text)?;
        for var in ast.variables() {
            if let Some(k) = var.coordinate() {
                if k > dim {
                    return Err(SpecError::VariableOutOfRange {
                        index: k + 1,
                        ambient: dim + 1,
                    });
                }
            }
        }
        let spec = Self {
            source: text.to_string(),
            ast,
            dim,
            r1,
            r2,
        };
        let dirs = boundary_directions(dim, VET_DIRECTIONS);
        for k in 0..VET_LEVELS {
            let r = r1 + (r2 - r1) * k as f64 / (VET_LEVELS - 1) as f64;
            for d in &dirs {
                let p: Vec<f64> = d[..=dim].iter().map(|c| c * r).collect();
                spec.evaluate(&p).map_err(SpecError::NotFinite)?;
            }
        }
        Ok(spec)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn annulus(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    /// `F(point)` for a point of R^{n+1}.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.len() != self.dim + 1 || point.iter().any(|v| !v.is_finite()) {
            return Err(EvalError {
                what: format!("expected a finite point of R^{}", self.dim + 1),
                point: point.to_vec(),
            });
        }
        self.ast.evaluate(point)
    }

    /// `F` at a padded 3-vector; only the first `n + 1` components are used.
    pub fn evaluate_embedded(&self, point: &[f64; 3]) -> Result<f64, EvalError> {
        self.ast.evaluate(&point[..=self.dim])
    }

    /// Whether `|point|` lies strictly inside the annulus.
    pub fn in_annulus(&self, point: &[f64]) -> bool {
        let r = point.iter().map(|v| v * v).sum::<f64>().sqrt();
        r > self.r1 && r < self.r2
    }
}

impl fmt::Display for CurvatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
