//! Time integration of the support-function flow `∂u/∂t = Δu + n u − F(X(u))`
//! with invariant monitoring.

mod admissibility;
mod consistency;
mod monitor;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::curvature::{check_conditions, ConditionReport, CurvatureSpec};
use crate::geometry::{GeometryError, SupportField};
use crate::residual::{Forcing, ResidualError};
use crate::sphere::{DomainError, ScalarField, SphereDomain};

pub use admissibility::{
    check_initial_admissibility, suggest_initial_radius, AdmissibilityReport, INITIAL_G_TOLERANCE,
};
pub use consistency::g_evolution_residual;
pub use monitor::{
    energy_bound, monitor_invariants, spectral_tail, DiagnosticsRecord, Monitor, MonitorFinding,
    MonitorTolerances, Severity,
};

/// Spectral-tail fraction above which the resolution is considered too low.
pub const WATCHDOG_THRESHOLD: f64 = 1e-3;
/// Gap kept from the annulus walls by the automatic initial radius.
pub const DEFAULT_RADIUS_SLACK: f64 = 0.05;
const WATCHDOG_EVERY: usize = 10;
const MAX_WARNINGS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dt = {dt} must lie in (0, {cap}) for n = {dim}")]
    DtOutOfRange { dt: f64, cap: f64, dim: usize },
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("initial data is not admissible (convex: {}, G >= 0: {}, inside annulus: {})",
        .0.convex, .0.expanding, .0.inside_annulus)]
    Inadmissible(AdmissibilityReport),
    #[error("curvature function fails the required conditions: {0}")]
    StrictConditions(String),
    #[error("no admissible constant initial radius with slack {epsilon}")]
    NoAdmissibleRadius { epsilon: f64 },
    #[error("non-finite values produced at step {step}")]
    NonFinite { step: usize },
    #[error("need at least 3 consecutive states, got {got}")]
    InsufficientStates { got: usize },
    #[error("states around step {step} are not consecutive with a fixed dt")]
    IrregularWindow { step: usize },
}

/// Hard cap `1/(2n)` on the time step.
pub fn dt_cap(dim: usize) -> f64 {
    1.0 / (2.0 * dim as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveDt {
    pub dt_min: f64,
    pub dt_max: f64,
    /// Target sup-norm change of `u` per step.
    pub target_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed,
    Adaptive(AdaptiveDt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Implicit `Δ + n`, explicit `F`.
    ImexEuler,
    /// Richardson extrapolation of two half steps against one full step.
    ImexExtrapolated,
}

#[derive(Debug, Clone)]
pub enum InitialData {
    Constant(f64),
    /// Smallest admissible constant radius with [`DEFAULT_RADIUS_SLACK`].
    Auto,
    Field(SupportField),
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub domain: Arc<SphereDomain>,
    pub spec: Arc<CurvatureSpec>,
    pub initial: InitialData,
    pub dt: f64,
    pub dt_policy: DtPolicy,
    pub scheme: TimeScheme,
    pub t_max: f64,
    pub stationarity_tol: f64,
    pub tolerances: MonitorTolerances,
    /// Keep a field snapshot every this many steps (plus first and last).
    pub snapshot_every: Option<usize>,
    pub allow_inadmissible: bool,
    /// Refuse to run unless the barrier condition and positivity hold.
    pub strict_conditions: bool,
    pub chord_samples: usize,
    pub seed: u64,
    pub max_steps: usize,
}

impl FlowConfig {
    pub fn new(
        domain: Arc<SphereDomain>,
        spec: Arc<CurvatureSpec>,
        initial: InitialData,
        dt: f64,
        t_max: f64,
    ) -> Self {
        let tolerances = MonitorTolerances::for_problem(&domain, &spec);
        let stationarity_tol = if domain.dim() == 1 { 1e-8 } else { 1e-6 };
        Self {
            domain,
            spec,
            initial,
            dt,
            dt_policy: DtPolicy::Fixed,
            scheme: TimeScheme::ImexEuler,
            t_max,
            stationarity_tol,
            tolerances,
            snapshot_every: None,
            allow_inadmissible: false,
            strict_conditions: false,
            chord_samples: 1000,
            seed: 0,
            max_steps: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let n = self.domain.dim();
        if self.spec.dim() != n {
            return Err(ResidualError::DimensionMismatch {
                spec: self.spec.dim(),
                domain: n,
            }
            .into());
        }
        let cap = dt_cap(n);
        let dt_ok = |dt: f64| dt.is_finite() && dt > 0.0 && dt < cap;
        if !dt_ok(self.dt) {
            return Err(FlowError::DtOutOfRange { dt: self.dt, cap, dim: n });
        }
        if let DtPolicy::Adaptive(a) = self.dt_policy {
            if !dt_ok(a.dt_max) {
                return Err(FlowError::DtOutOfRange { dt: a.dt_max, cap, dim: n });
            }
            if !(a.dt_min > 0.0 && a.dt_min <= self.dt && self.dt <= a.dt_max) {
                return Err(FlowError::InvalidConfig("adaptive dt needs 0 < dt_min <= dt <= dt_max".into()));
            }
            if !(a.target_change > 0.0) {
                return Err(FlowError::InvalidConfig("adaptive target_change must be positive".into()));
            }
        }
        if !(self.t_max > 0.0) {
            return Err(FlowError::InvalidConfig("t_max must be positive".into()));
        }
        if !(self.stationarity_tol > 0.0) {
            return Err(FlowError::InvalidConfig("stationarity_tol must be positive".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(FlowError::InvalidConfig("snapshot_every must be at least 1".into()));
        }
        if let InitialData::Field(u) = &self.initial {
            let d = u.domain();
            if d.dim() != n || d.resolution() != self.domain.resolution() {
                return Err(DomainError::Mismatch {
                    dim: n,
                    res: self.domain.resolution(),
                    got_dim: d.dim(),
                    got_res: d.resolution(),
                }
                .into());
            }
        }
        Ok(())
    }
}

/// The evolving support function with its cached forcing and diagnostics.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: SupportField,
    pub t: f64,
    pub dt: f64,
    pub step_index: usize,
    /// Running `Σ ∫ ((u_new − u_old)/dt)² dt`.
    pub energy_accumulator: f64,
    pub diagnostics: DiagnosticsRecord,
    forcing: Forcing,
    bartnik_tol: f64,
}

impl FlowState {
    pub fn new(u: SupportField, spec: &CurvatureSpec, dt: f64) -> Result<Self, FlowError> {
        let bartnik = MonitorTolerances::for_problem(u.domain(), spec).bartnik;
        Self::assemble(u, spec, 0.0, dt, 0, 0.0, bartnik)
    }

    fn assemble(
        u: SupportField,
        spec: &CurvatureSpec,
        t: f64,
        dt: f64,
        step_index: usize,
        energy_accumulator: f64,
        bartnik_tol: f64,
    ) -> Result<Self, FlowError> {
        let forcing = Forcing::of(&u, spec)?;
        let mut state = Self {
            u,
            t,
            dt,
            step_index,
            energy_accumulator,
            diagnostics: DiagnosticsRecord {
                step: 0,
                t: 0.0,
                dt: 0.0,
                residual_sup: 0.0,
                g_min: 0.0,
                convexity_margin: 0.0,
                radial_min: 0.0,
                radial_max: 0.0,
                energy_accumulator: 0.0,
                bartnik_pass: false,
            },
            forcing,
            bartnik_tol,
        };
        state.diagnostics = DiagnosticsRecord::of(&state, bartnik_tol);
        Ok(state)
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    /// `G = Δu + n u − F(X)` at the nodes.
    pub fn g(&self) -> ScalarField {
        ScalarField::new(self.u.domain().clone(), self.forcing.g.clone()).expect("finite G")
    }
}

/// `(I − dt(Δ + n)) v = u − dt F`.
fn euler_values(u: &[f64], forcing: &[f64], domain: &SphereDomain, dt: f64) -> Result<Vec<f64>, DomainError> {
    let rhs: Vec<f64> = u.iter().zip(forcing).map(|(u, f)| u - dt * f).collect();
    domain.solve_shifted(&rhs, dt, domain.dim() as f64)
}

fn to_support(values: Vec<f64>, domain: &Arc<SphereDomain>, step: usize) -> Result<SupportField, FlowError> {
    let field = ScalarField::new(domain.clone(), values).map_err(|_| FlowError::NonFinite { step })?;
    Ok(SupportField::new(field)?)
}

/// Result of advancing a state once: the next state and the plain IMEX
/// Euler increment `E_dt(u) − u` taken from the same data.
struct Advance {
    next: FlowState,
    euler_change: f64,
}

fn advance(state: &FlowState, spec: &CurvatureSpec, dt: f64, scheme: TimeScheme) -> Result<Advance, FlowError> {
    let domain = state.u.domain();
    let u = state.u.values();
    let step = state.step_index + 1;
    let full = euler_values(u, &&state.forcing.forcing, domain, dt)?;
    let euler_change = sup_diff(&full, u);
    let new_values = match scheme {
        TimeScheme::ImexEuler => full,
        TimeScheme::ImexExtrapolated => {
            let h1 = euler_values(u, &&state.forcing.forcing, domain, 0.5 * dt)?;
            let h1_field = to_support(h1, domain, step)?;
            let f1 = Forcing::of(&h1_field, spec)?;
            let h2 = euler_values(h1_field.values(), &f1.forcing, domain, 0.5 * dt)?;
            h2.iter().zip(&full).map(|(a, b)| 2.0 * a - b).collect()
        }
    };
    if new_values.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::NonFinite { step });
    }
    let rate: f64 = {
        let d: Vec<f64> = new_values.iter().zip(u).map(|(a, b)| ((a - b) / dt).powi(2)).collect();
        domain.integrate_values(&d)
    };
    let new_u = to_support(new_values, domain, step)?;
    let next = FlowState::assemble(
        new_u,
        spec,
        state.t + dt,
        dt,
        step,
        state.energy_accumulator + rate * dt,
        state.bartnik_tol,
    )?;
    Ok(Advance { next, euler_change })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// One IMEX Euler step with the state's `dt`.
pub fn step(state: &FlowState, spec: &CurvatureSpec) -> Result<FlowState, FlowError> {
    Ok(advance(state, spec, state.dt, TimeScheme::ImexEuler)?.next)
}

/// One step of the chosen scheme with the state's `dt`.
pub fn step_with(state: &FlowState, spec: &CurvatureSpec, scheme: TimeScheme) -> Result<FlowState, FlowError> {
    Ok(advance(state, spec, state.dt, scheme)?.next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ExitState {
    Converged { residual: f64 },
    MaxTimeReached { t: f64, residual: f64 },
    InvariantViolation { monitor: Monitor, step: usize, t: f64, value: f64, bound: f64 },
    BlowUp { step: usize, t: f64, reason: String },
}

impl ExitState {
    pub fn name(&self) -> &'static str {
        match self {
            ExitState::Converged { .. } => "converged",
            ExitState::MaxTimeReached { .. } => "max_time_reached",
            ExitState::InvariantViolation { .. } => "invariant_violation",
            ExitState::BlowUp { .. } => "blow_up",
        }
    }
}

/// Worst values of each monitored quantity over the recorded steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantSummary {
    pub min_convexity_margin: f64,
    pub min_radial: f64,
    pub max_radial: f64,
    pub min_g: f64,
    pub max_energy: f64,
    pub energy_bound: f64,
}

impl InvariantSummary {
    fn start(spec: &CurvatureSpec) -> Self {
        Self {
            min_convexity_margin: f64::INFINITY,
            min_radial: f64::INFINITY,
            max_radial: f64::NEG_INFINITY,
            min_g: f64::INFINITY,
            max_energy: 0.0,
            energy_bound: energy_bound(spec),
        }
    }

    fn absorb(&mut self, r: &DiagnosticsRecord) {
        self.min_convexity_margin = self.min_convexity_margin.min(r.convexity_margin);
        self.min_radial = self.min_radial.min(r.radial_min);
        self.max_radial = self.max_radial.max(r.radial_max);
        self.min_g = self.min_g.min(r.g_min);
        self.max_energy = self.max_energy.max(r.energy_accumulator);
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: SupportField,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit: ExitState,
    pub final_state: FlowState,
    pub history: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub admissibility: AdmissibilityReport,
    pub conditions: ConditionReport,
    /// Barrier condition and admissibility both held, so monitor breaches trip.
    pub certified: bool,
    pub under_resolved: bool,
    pub initial_radius: Option<f64>,
    pub warnings: Vec<MonitorFinding>,
    pub warning_count: usize,
    pub summary: InvariantSummary,
    /// `sup |E_dt(u) − u|` at the final state.
    pub final_step_change: f64,
}

/// Step-by-step driver; [`run`] drives it to completion.
pub struct FlowRunner {
    config: FlowConfig,
    state: FlowState,
    history: Vec<DiagnosticsRecord>,
    snapshots: Vec<Snapshot>,
    admissibility: AdmissibilityReport,
    conditions: ConditionReport,
    certified: bool,
    under_resolved: bool,
    initial_radius: Option<f64>,
    warnings: Vec<MonitorFinding>,
    warning_count: usize,
    summary: InvariantSummary,
    initial_margin: f64,
    final_step_change: f64,
    exit: Option<ExitState>,
}

impl FlowRunner {
    pub fn new(config: FlowConfig) -> Result<Self, FlowError> {
        config.validate()?;
        let spec = config.spec.clone();
        let conditions = check_conditions(&spec, config.chord_samples, config.seed);
        if config.strict_conditions {
            let mut failed = Vec::new();
            if !conditions.condition_a.strict {
                failed.push("barrier condition");
            }
            if !conditions.positivity.pass {
                failed.push("positivity");
            }
            if !failed.is_empty() {
                return Err(FlowError::StrictConditions(failed.join(", ")));
            }
        }
        let (u0, initial_radius) = match &config.initial {
            InitialData::Constant(r) => (SupportField::sphere(config.domain.clone(), *r)?, None),
            InitialData::Auto => {
                let r = suggest_initial_radius(&spec, DEFAULT_RADIUS_SLACK)?;
                (SupportField::sphere(config.domain.clone(), r)?, Some(r))
            }
            InitialData::Field(u) => (u.clone(), None),
        };
        let admissibility = check_initial_admissibility(&u0, &spec)?;
        if !admissibility.pass && !config.allow_inadmissible {
            return Err(FlowError::Inadmissible(admissibility));
        }
        let state = FlowState::assemble(u0, &spec, 0.0, config.dt, 0, 0.0, config.tolerances.bartnik)?;
        let certified = admissibility.pass && conditions.condition_a.strict;
        let mut runner = Self {
            initial_margin: state.diagnostics.convexity_margin,
            history: Vec::new(),
            snapshots: Vec::new(),
            admissibility,
            conditions,
            certified,
            under_resolved: false,
            initial_radius,
            warnings: Vec::new(),
            warning_count: 0,
            summary: InvariantSummary::start(&spec),
            final_step_change: f64::NAN,
            exit: None,
            config,
            state,
        };
        runner.watchdog();
        runner.record();
        if runner.config.snapshot_every.is_some() {
            runner.snapshot();
        }
        Ok(runner)
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn exit(&self) -> Option<&ExitState> {
        self.exit.as_ref()
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    fn snapshot(&mut self) {
        self.snapshots.push(Snapshot {
            step: self.state.step_index,
            t: self.state.t,
            u: self.state.u.clone(),
        });
    }

    fn watchdog(&mut self) {
        let tail = spectral_tail(&self.config.domain, self.state.u.values());
        if tail > WATCHDOG_THRESHOLD {
            self.under_resolved = true;
        }
    }

    /// Records the current diagnostics and applies the monitors.
    fn record(&mut self) {
        let rec = self.state.diagnostics;
        self.history.push(rec);
        self.summary.absorb(&rec);
        let findings = monitor_invariants(&rec, &self.config.spec, &self.config.tolerances);
        let enforce = self.certified && !self.under_resolved;
        for f in findings {
            if f.severity == Severity::Trip && enforce && self.exit.is_none() {
                self.exit = Some(ExitState::InvariantViolation {
                    monitor: f.monitor,
                    step: f.step,
                    t: f.t,
                    value: f.value,
                    bound: f.bound,
                });
            } else {
                self.warning_count += 1;
                if self.warnings.len() < MAX_WARNINGS {
                    self.warnings.push(f);
                }
            }
        }
    }

    fn near_bound(&self, rec: &DiagnosticsRecord) -> bool {
        let (r1, r2) = self.config.spec.annulus();
        rec.convexity_margin < 0.1 * self.initial_margin
            || rec.radial_min < 1.1 * r1 * r1
            || rec.radial_max > 0.9 * r2 * r2
            || rec.energy_accumulator > 0.9 * self.summary.energy_bound
    }

    /// Advances one step. Returns `false` once the run has finished.
    pub fn step_once(&mut self) -> bool {
        if self.exit.is_some() {
            return false;
        }
        let tol = self.config.stationarity_tol;
        let t_max = self.config.t_max;
        let residual = self.state.diagnostics.residual_sup;
        let dt = self.state.dt;
        let stop_t = self.state.t >= t_max * (1.0 - 1e-12) || self.state.step_index >= self.config.max_steps;
        if stop_t && residual >= tol {
            self.exit = Some(ExitState::MaxTimeReached {
                t: self.state.t,
                residual,
            });
            return false;
        }
        let spec = self.config.spec.clone();
        let adv = match advance(&self.state, &spec, dt, self.config.scheme) {
            Ok(a) => a,
            Err(e) => {
                self.exit = Some(self.failure_exit(e));
                return false;
            }
        };
        self.final_step_change = adv.euler_change;
        if residual < tol && adv.euler_change < dt * tol {
            self.exit = Some(ExitState::Converged { residual });
            return false;
        }
        if stop_t {
            self.exit = Some(ExitState::MaxTimeReached {
                t: self.state.t,
                residual,
            });
            return false;
        }
        let change = sup_diff(adv.next.u.values(), self.state.u.values());
        self.state = adv.next;
        let (_, r2) = spec.annulus();
        if self.state.diagnostics.radial_max > 100.0 * r2 * r2 {
            self.exit = Some(ExitState::BlowUp {
                step: self.state.step_index,
                t: self.state.t,
                reason: format!("radial extent |X|² = {} escaped", self.state.diagnostics.radial_max),
            });
        }
        if self.state.step_index % WATCHDOG_EVERY == 0 {
            self.watchdog();
        }
        self.record();
        if let Some(k) = self.config.snapshot_every {
            if self.state.step_index % k == 0 {
                self.snapshot();
            }
        }
        if let DtPolicy::Adaptive(a) = self.config.dt_policy {
            let rec = self.state.diagnostics;
            let new_dt = if self.near_bound(&rec) {
                (dt * 0.5).max(a.dt_min)
            } else if change < 0.25 * a.target_change {
                (dt * 1.2).min(a.dt_max)
            } else {
                dt
            };
            self.state.dt = new_dt;
        }
        self.exit.is_none()
    }

    fn failure_exit(&self, e: FlowError) -> ExitState {
        let step = self.state.step_index + 1;
        let t = self.state.t + self.state.dt;
        match e {
            FlowError::Geometry(GeometryError::NonPositiveSupport { value, .. }) => ExitState::InvariantViolation {
                monitor: Monitor::Positivity,
                step,
                t,
                value,
                bound: 0.0,
            },
            other => ExitState::BlowUp {
                step,
                t,
                reason: other.to_string(),
            },
        }
    }

    pub fn finish(mut self) -> RunOutcome {
        while self.step_once() {}
        if let Some(k) = self.config.snapshot_every {
            if self.snapshots.last().map(|s| s.step) != Some(self.state.step_index) && k > 0 {
                self.snapshot();
            }
        }
        RunOutcome {
            exit: self.exit.expect("finished run has an exit state"),
            final_state: self.state,
            history: self.history,
            snapshots: self.snapshots,
            admissibility: self.admissibility,
            conditions: self.conditions,
            certified: self.certified,
            under_resolved: self.under_resolved,
            initial_radius: self.initial_radius,
            warnings: self.warnings,
            warning_count: self.warning_count,
            summary: self.summary,
            final_step_change: self.final_step_change,
        }
    }
}

/// Runs the flow until stationarity, `t_max`, or a monitor trip.
pub fn run(config: FlowConfig) -> Result<RunOutcome, FlowError> {
    Ok(FlowRunner::new(config)?.finish())
}
