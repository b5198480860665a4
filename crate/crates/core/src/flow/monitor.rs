//! Per-step diagnostics and the invariant monitors.

use std::f64::consts::PI;

use serde::Serialize;

use crate::curvature::CurvatureSpec;
use crate::geometry::extremal_report;
use crate::sphere::SphereDomain;

use super::FlowState;

/// One row of the diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    /// `sup |G|`, equal to `sup |∂u/∂t|`.
    pub residual_sup: f64,
    pub g_min: f64,
    pub convexity_margin: f64,
    /// Extremes of `|X|²` over the nodes.
    pub radial_min: f64,
    pub radial_max: f64,
    pub energy_accumulator: f64,
    pub bartnik_pass: bool,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "step,t,dt,residual_sup,G_min,convexity_margin,radial_min,radial_max,energy_accum";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.t,
            self.dt,
            self.residual_sup,
            self.g_min,
            self.convexity_margin,
            self.radial_min,
            self.radial_max,
            self.energy_accumulator
        )
    }

    pub(crate) fn of(state: &FlowState, bartnik_tol: f64) -> Self {
        let forcing = state.forcing();
        let geom = &forcing.geometry;
        let (radial_min, radial_max) = geom.radial_range();
        Self {
            step: state.step_index,
            t: state.t,
            dt: state.dt,
            residual_sup: forcing.sup_residual(),
            g_min: forcing.min_g(),
            convexity_margin: geom.convexity_margin(),
            radial_min,
            radial_max,
            energy_accumulator: state.energy_accumulator,
            bartnik_pass: extremal_report(state.u.domain(), geom, bartnik_tol).map(|r| r.pass).unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    Convexity,
    RadialInner,
    RadialOuter,
    GMin,
    Energy,
    Positivity,
}

impl std::fmt::Display for Monitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Monitor::Convexity => "convexity",
            Monitor::RadialInner => "radial_inner",
            Monitor::RadialOuter => "radial_outer",
            Monitor::GMin => "g_min",
            Monitor::Energy => "energy",
            Monitor::Positivity => "positivity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Breach within the discretization band.
    Warn,
    /// Breach beyond the band.
    Trip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorFinding {
    pub monitor: Monitor,
    pub severity: Severity,
    pub step: usize,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

/// Width of the tolerance band of each monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorTolerances {
    pub convexity: f64,
    pub radial: f64,
    pub g_min: f64,
    /// Relative slack on the energy bound.
    pub energy: f64,
    /// Tolerance of the extremal-point check.
    pub bartnik: f64,
}

impl MonitorTolerances {
    /// Bands of ten times the measured operator error, scaled by the annulus.
    pub fn for_problem(domain: &SphereDomain, spec: &CurvatureSpec) -> Self {
        let (_, r2) = spec.annulus();
        let band = 10.0 * domain.operator_error();
        Self {
            convexity: (band * r2).max(1e-9),
            radial: (band * r2 * r2).max(1e-9),
            g_min: 1e-7,
            energy: 1e-9,
            bartnik: 1e-3,
        }
    }
}

/// `(n + 2) R₂² vol(Sⁿ)`.
pub fn energy_bound(spec: &CurvatureSpec) -> f64 {
    let n = spec.dim();
    let (_, r2) = spec.annulus();
    let vol = if n == 1 { 2.0 * PI } else { 4.0 * PI };
    (n as f64 + 2.0) * r2 * r2 * vol
}

/// Compares a record against the bounds the flow is expected to respect.
pub fn monitor_invariants(
    record: &DiagnosticsRecord,
    spec: &CurvatureSpec,
    tol: &MonitorTolerances,
) -> Vec<MonitorFinding> {
    let (r1, r2) = spec.annulus();
    let mut out = Vec::new();
    let mut flag = |monitor, value: f64, bound: f64, breached: bool, tripped: bool| {
        if breached {
            out.push(MonitorFinding {
                monitor,
                severity: if tripped { Severity::Trip } else { Severity::Warn },
                step: record.step,
                t: record.t,
                value,
                bound,
            });
        }
    };
    let m = record.convexity_margin;
    flag(Monitor::Convexity, m, 0.0, m <= 0.0, m < -tol.convexity);
    let lo = record.radial_min;
    flag(Monitor::RadialInner, lo, r1 * r1, lo <= r1 * r1, lo < r1 * r1 - tol.radial);
    let hi = record.radial_max;
    flag(Monitor::RadialOuter, hi, r2 * r2, hi >= r2 * r2, hi > r2 * r2 + tol.radial);
    let g = record.g_min;
    flag(Monitor::GMin, g, -tol.g_min, g < -1e-3 * tol.g_min, g < -tol.g_min);
    let e = record.energy_accumulator;
    let eb = energy_bound(spec);
    flag(Monitor::Energy, e, eb, e > eb, e > eb * (1.0 + tol.energy));
    out
}

/// Fraction of spectral energy carried by the top decile of degrees.
pub fn spectral_tail(domain: &SphereDomain, values: &[f64]) -> f64 {
    let spectrum = domain.degree_spectrum(values);
    let lmax = domain.max_degree();
    let cut = (0.9 * lmax as f64).ceil() as usize;
    let total: f64 = spectrum.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    spectrum[cut.min(lmax)..].iter().sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> DiagnosticsRecord {
        DiagnosticsRecord {
            step: 3,
            t: 0.3,
            dt: 0.1,
            residual_sup: 0.0,
            g_min: 0.0,
            convexity_margin: 1.0,
            radial_min: 1.0,
            radial_max: 1.0,
            energy_accumulator: 0.0,
            bartnik_pass: true,
        }
    }

    fn tol() -> MonitorTolerances {
        MonitorTolerances {
            convexity: 1e-9,
            radial: 1e-9,
            g_min: 1e-7,
            energy: 1e-9,
            bartnik: 1e-3,
        }
    }

    #[test]
    fn round_stationary_state_is_clean() {
        let spec = CurvatureSpec::new("3*r-1", 2, 0.5, 2.0).unwrap();
        assert!(monitor_invariants(&record(), &spec, &tol()).is_empty());
    }

    #[test]
    fn trips_and_warnings() {
        let spec = CurvatureSpec::new("3*r-1", 2, 0.5, 2.0).unwrap();
        let mut r = record();
        r.g_min = -1e-9;
        r.radial_max = 5.0;
        r.convexity_margin = -1e-12;
        let f = monitor_invariants(&r, &spec, &tol());
        let find = |m| f.iter().find(|x| x.monitor == m).unwrap().severity;
        assert_eq!(find(Monitor::GMin), Severity::Warn);
        assert_eq!(find(Monitor::RadialOuter), Severity::Trip);
        assert_eq!(find(Monitor::Convexity), Severity::Warn);
        r.energy_accumulator = 1e3;
        r.radial_min = 0.1;
        let f = monitor_invariants(&r, &spec, &tol());
        assert!(f.iter().any(|x| x.monitor == Monitor::Energy && x.severity == Severity::Trip));
        assert!(f.iter().any(|x| x.monitor == Monitor::RadialInner && x.severity == Severity::Trip));
    }

    #[test]
    fn energy_bound_values() {
        let spec = CurvatureSpec::new("2*r-1.5", 1, 1.0, 3.0).unwrap();
        assert!((energy_bound(&spec) - 3.0 * 9.0 * 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn csv_row_matches_header_width() {
        let cols = DiagnosticsRecord::CSV_HEADER.split(',').count();
        assert_eq!(record().csv_row().split(',').count(), cols);
    }

    #[test]
    fn spectral_tail_of_smooth_and_rough_fields() {
        let d = SphereDomain::build(1, 64).unwrap();
        let smooth: Vec<f64> = d.nodes().iter().map(|x| 1.0 + 0.1 * x[0]).collect();
        assert!(spectral_tail(&d, &smooth) < 1e-20);
        let rough: Vec<f64> = (0..64).map(|j| if j % 2 == 0 { 1.0 } else { 1.1 }).collect();
        assert!(spectral_tail(&d, &rough) > 1e-3);
    }
}
