//! Machine-readable run reports.

use std::path::{Path, PathBuf};

use anyhow::Context;
use harmflow::curvature::ConditionReport;
use harmflow::flow::{AdmissibilityReport, ExitState, InvariantSummary};
use harmflow::stationary::ConvergenceReport;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_MAX_TIME: u8 = 1;
pub const EXIT_INVARIANT: u8 = 2;
pub const EXIT_BLOW_UP: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;
pub const EXIT_WARNINGS: u8 = 5;
pub const EXIT_NEWTON: u8 = 6;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
}

impl ErrorReport {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            key: None,
            line: None,
            position: None,
        }
    }
}

impl From<&ConfigError> for ErrorReport {
    fn from(e: &ConfigError) -> Self {
        Self {
            kind: "config",
            message: e.to_string(),
            key: e.key.clone(),
            line: e.line,
            position: e.position,
        }
    }
}

/// Verdict of the condition checks, with the warnings that drive exit 5.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionVerdict {
    pub barrier: bool,
    pub positivity: bool,
    /// `concave`, `convex`, `affine` or `neither`, from the chord test.
    pub shape: &'static str,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub exit: ExitState,
    pub final_residual: f64,
    pub final_t: f64,
    pub steps: usize,
    pub certified: bool,
    pub under_resolved: bool,
    pub warning_count: usize,
    pub invariants: InvariantSummary,
    /// `sup |E_dt(u) − u|` at the final state.
    pub final_step_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySummary {
    pub converged: bool,
    pub residual_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ConvergenceReport>,
    /// Sup-norm distance between the solution and a field-file guess.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_with_guess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guess_convexity_margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: &'static str,
    pub exit_code: u8,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ConditionVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationarySummary>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            exit_code: EXIT_OK,
            status: "ok".into(),
            config: None,
            error: None,
            conditions: None,
            verdict: None,
            initial_radius: None,
            admissibility: None,
            flow: None,
            stationary: None,
            artifacts: Vec::new(),
        }
    }

    pub fn fail(mut self, code: u8, status: &str, error: ErrorReport) -> Self {
        self.exit_code = code;
        self.status = status.into();
        self.error = Some(error);
        self
    }

    pub fn config_error(self, e: &ConfigError) -> Self {
        self.fail(EXIT_CONFIG, "config_error", e.into())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_json() + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
