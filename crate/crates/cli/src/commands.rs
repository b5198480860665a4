//! The `check`, `flow` and `stationary` subcommands.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use harmflow::curvature::{check_conditions, ConditionReport, CurvatureSpec};
use harmflow::flow::{
    check_initial_admissibility, run, suggest_initial_radius, ExitState, FlowError, RunOutcome,
    DEFAULT_RADIUS_SLACK,
};
use harmflow::geometry::{convexity_margin, SupportField};
use harmflow::io::{save_field, write_diagnostics, write_snapshot};
use harmflow::stationary::{solve, NewtonConfig, StationaryError};

use crate::config::{self, ConfigError, Initial, Overrides, RunConfig};
use crate::report::{
    ConditionVerdict, ErrorReport, FlowSummary, RunReport, StationarySummary, EXIT_BLOW_UP,
    EXIT_CONFIG, EXIT_INVARIANT, EXIT_MAX_TIME, EXIT_NEWTON, EXIT_OK, EXIT_WARNINGS,
};

/// Chords drawn by the concavity test.
pub const CHORD_SAMPLES: usize = 1000;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const FINAL_FIELD_FILE: &str = "final_field.txt";
pub const FLOW_REPORT_FILE: &str = "report.json";
pub const STATIONARY_FIELD_FILE: &str = "stationary_field.txt";
pub const STATIONARY_REPORT_FILE: &str = "stationary_report.json";

fn shape(c: &ConditionReport) -> &'static str {
    match (c.chords.concave, c.chords.convex) {
        (true, true) => "affine",
        (true, false) => "concave",
        (false, true) => "convex",
        (false, false) => "neither",
    }
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}

/// Warnings from the condition checks. Concavity alone does not warn: a
/// convex or concave `F` is accepted and the failing chord is noted.
pub fn verdict(c: &ConditionReport) -> ConditionVerdict {
    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    let a = &c.condition_a;
    if !a.strict {
        warnings.push(format!(
            "condition (a) fails: min(F - nR2) = {:.6} on the outer sphere, min(nR1 - F) = {:.6} on the inner sphere{}",
            a.outer_margin,
            a.inner_margin,
            if a.weak { " (the non-strict form holds)" } else { "" }
        ));
    }
    if !c.positivity.pass {
        warnings.push(format!(
            "F is not positive on the annulus: min {:.6} at {}",
            c.positivity.min_value,
            fmt_point(&c.positivity.argmin)
        ));
    }
    let s = shape(c);
    let chord = |w: &Option<harmflow::curvature::ChordWitness>| {
        w.as_ref().map_or(String::new(), |w| {
            format!(" chord {} to {} (defect {:.3e})", fmt_point(&w.p), fmt_point(&w.q), w.defect)
        })
    };
    match s {
        "neither" => warnings.push(format!(
            "F is neither concave nor convex on the annulus: concavity{}; convexity{}",
            chord(&c.chords.concavity_witness),
            chord(&c.chords.convexity_witness)
        )),
        "convex" => notes.push(format!("F is convex, not concave:{}", chord(&c.chords.concavity_witness))),
        "concave" => notes.push(format!("F is concave, not convex:{}", chord(&c.chords.convexity_witness))),
        _ => {}
    }
    ConditionVerdict {
        barrier: a.strict,
        positivity: c.positivity.pass,
        shape: s,
        warnings,
        notes,
    }
}

fn load_config(path: &Path, overrides: &Overrides, report: &mut RunReport) -> Result<RunConfig, ConfigError> {
    let cfg = config::load(path, overrides)?;
    report.config = Some(cfg.clone());
    Ok(cfg)
}

pub fn check(path: &Path, overrides: &Overrides) -> RunReport {
    let mut report = RunReport::new("check");
    let cfg = match load_config(path, overrides, &mut report) {
        Ok(c) => c,
        Err(e) => return report.config_error(&e),
    };
    let spec = cfg.spec();
    let conditions = check_conditions(&spec, CHORD_SAMPLES, cfg.seed);
    let mut v = verdict(&conditions);
    report.conditions = Some(conditions);

    let domain = cfg.domain();
    let u0 = match &cfg.initial {
        Initial::Auto => match suggest_initial_radius(&spec, DEFAULT_RADIUS_SLACK) {
            Ok(r) => {
                report.initial_radius = Some(r);
                Some(SupportField::sphere(domain.clone(), r).expect("positive radius"))
            }
            Err(e) => {
                v.warnings.push(e.to_string());
                None
            }
        },
        Initial::Radius(r) => Some(SupportField::sphere(domain.clone(), *r).expect("positive radius")),
        Initial::File(p) => match config::load_support_field(p, &domain, "initial") {
            Ok(u) => Some(u),
            Err(e) => return report.config_error(&e),
        },
    };
    if let Some(u0) = u0 {
        match check_initial_admissibility(&u0, &spec) {
            Ok(a) => {
                if !a.pass {
                    v.warnings.push(format!(
                        "initial data is not admissible: convexity margin {:.6}, min G {:.3e}, radial margins {:.6} / {:.6}",
                        a.convexity_margin, a.g_min, a.inner_margin, a.outer_margin
                    ));
                }
                report.admissibility = Some(a);
            }
            Err(e) => v.warnings.push(format!("initial data cannot be evaluated: {e}")),
        }
    }
    if !v.warnings.is_empty() {
        report.exit_code = EXIT_WARNINGS;
        report.status = "warnings".into();
    }
    report.verdict = Some(v);
    report
}

pub fn print_check_summary(report: &RunReport) {
    if let (Some(c), Some(v)) = (&report.conditions, &report.verdict) {
        let a = &c.condition_a;
        eprintln!(
            "condition (a): {} (outer margin {:.6}, inner margin {:.6})",
            if a.strict { "pass" } else { "fail" },
            a.outer_margin,
            a.inner_margin
        );
        eprintln!(
            "chord test: {} ({} chords, seed {})",
            v.shape, c.chords.accepted, c.chords.seed
        );
        eprintln!(
            "positivity: {} (min F {:.6})",
            if c.positivity.pass { "pass" } else { "fail" },
            c.positivity.min_value
        );
        if let Some(r) = report.initial_radius {
            eprintln!("initial radius: {r}");
        }
        if let Some(a) = &report.admissibility {
            eprintln!(
                "admissibility: {} (convexity {:.6}, min G {:.3e}, radial {:.6} / {:.6})",
                if a.pass { "pass" } else { "fail" },
                a.convexity_margin,
                a.g_min,
                a.inner_margin,
                a.outer_margin
            );
        }
        for n in &v.notes {
            eprintln!("note: {n}");
        }
        for w in &v.warnings {
            eprintln!("warning: {w}");
        }
    }
    print_error(report);
}

pub fn print_error(report: &RunReport) {
    if let Some(e) = &report.error {
        eprintln!("error: {}", e.message);
    }
}

fn exit_code(exit: &ExitState) -> u8 {
    match exit {
        ExitState::Converged { .. } => EXIT_OK,
        ExitState::MaxTimeReached { .. } => EXIT_MAX_TIME,
        ExitState::InvariantViolation { .. } => EXIT_INVARIANT,
        ExitState::BlowUp { .. } => EXIT_BLOW_UP,
    }
}

fn flow_error_kind(e: &FlowError) -> &'static str {
    match e {
        FlowError::Inadmissible(_) => "inadmissible",
        FlowError::StrictConditions(_) => "strict_conditions",
        FlowError::NoAdmissibleRadius { .. } => "no_admissible_radius",
        _ => "validation",
    }
}

/// Removes snapshot files left by an earlier run in the same directory.
fn clear_snapshots(dir: &Path) -> anyhow::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("snapshot_") && name.ends_with(".csv") {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn write_flow_artifacts(out: &RunOutcome, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut artifacts = Vec::new();
    let diag = dir.join(DIAGNOSTICS_FILE);
    write_diagnostics(BufWriter::new(fs::File::create(&diag)?), &out.history)?;
    artifacts.push(diag);
    let snaps = dir.join(SNAPSHOT_DIR);
    clear_snapshots(&snaps)?;
    if !out.snapshots.is_empty() {
        fs::create_dir_all(&snaps)?;
        for s in &out.snapshots {
            let p = snaps.join(format!("snapshot_{:06}.csv", s.step));
            write_snapshot(BufWriter::new(fs::File::create(&p)?), &s.u)?;
            artifacts.push(p);
        }
    }
    let field = dir.join(FINAL_FIELD_FILE);
    save_field(&field, out.final_state.u.field())?;
    artifacts.push(field);
    artifacts.push(dir.join(FLOW_REPORT_FILE));
    Ok(artifacts)
}

pub fn flow(path: &Path, overrides: &Overrides, allow_inadmissible: bool) -> RunReport {
    let mut report = RunReport::new("flow");
    let cfg = match load_config(path, overrides, &mut report) {
        Ok(c) => c,
        Err(e) => return report.config_error(&e),
    };
    let flow_cfg = match cfg.flow_config(allow_inadmissible) {
        Ok(c) => c,
        Err(e) => return report.config_error(&e),
    };
    let out = match run(flow_cfg) {
        Ok(o) => o,
        Err(e) => {
            if let FlowError::Inadmissible(a) = &e {
                report.admissibility = Some(*a);
            }
            let kind = flow_error_kind(&e);
            let report = report.fail(EXIT_CONFIG, kind, ErrorReport::new(kind, e.to_string()));
            // The directory is only written when it can be created.
            if fs::create_dir_all(&cfg.output_dir).is_ok() {
                let _ = report.write(&cfg.output_dir.join(FLOW_REPORT_FILE));
            }
            return report;
        }
    };
    report.exit_code = exit_code(&out.exit);
    report.status = out.exit.name().into();
    report.conditions = Some(out.conditions.clone());
    report.verdict = Some(verdict(&out.conditions));
    report.admissibility = Some(out.admissibility);
    report.initial_radius = out.initial_radius;
    let last = out.history.last().expect("history has the initial record");
    report.flow = Some(FlowSummary {
        exit: out.exit.clone(),
        final_residual: last.residual_sup,
        final_t: out.final_state.t,
        steps: out.final_state.step_index,
        certified: out.certified,
        under_resolved: out.under_resolved,
        warning_count: out.warning_count,
        invariants: out.summary,
        final_step_change: out.final_step_change,
    });
    match write_flow_artifacts(&out, &cfg.output_dir) {
        Ok(a) => report.artifacts = a,
        Err(e) => {
            return report.fail(EXIT_CONFIG, "io_error", ErrorReport::new("io", format!("{e:#}")));
        }
    }
    if let Err(e) = report.write(&cfg.output_dir.join(FLOW_REPORT_FILE)) {
        return report.fail(EXIT_CONFIG, "io_error", ErrorReport::new("io", format!("{e:#}")));
    }
    report
}

pub fn print_flow_summary(report: &RunReport) {
    if let Some(f) = &report.flow {
        eprintln!(
            "exit: {} after {} steps, t = {:.6}, residual {:.3e}",
            report.status, f.steps, f.final_t, f.final_residual
        );
        eprintln!(
            "invariants: min convexity {:.6}, |X|² in [{:.6}, {:.6}], min G {:.3e}, energy {:.6} (bound {:.3})",
            f.invariants.min_convexity_margin,
            f.invariants.min_radial,
            f.invariants.max_radial,
            f.invariants.min_g,
            f.invariants.max_energy,
            f.invariants.energy_bound
        );
        if !f.certified {
            eprintln!("note: hypotheses not certified; monitor breaches are reported as warnings");
        }
        if f.under_resolved {
            eprintln!("note: resolution too low for certified invariant verdicts");
        }
        if f.warning_count > 0 {
            eprintln!("monitor warnings: {}", f.warning_count);
        }
    }
    if let Some(v) = &report.verdict {
        for w in &v.warnings {
            eprintln!("warning: {w}");
        }
    }
    print_error(report);
}

/// Newton guess: a radius, `auto`, or a field file.
#[derive(Debug, Clone)]
pub enum Guess {
    FromConfig,
    Given(String),
}

pub struct StationaryOptions {
    pub guess: Guess,
    pub residual_tol: Option<f64>,
    pub max_iterations: Option<usize>,
}

fn resolve_guess(
    cfg: &RunConfig,
    spec: &CurvatureSpec,
    guess: &Guess,
) -> Result<(SupportField, bool, Option<f64>), ConfigError> {
    let domain = cfg.domain();
    let initial = match guess {
        Guess::FromConfig => cfg.initial.clone(),
        Guess::Given(s) if s == "auto" => Initial::Auto,
        Guess::Given(s) => match s.parse::<f64>() {
            Ok(r) => Initial::Radius(r),
            Err(_) => Initial::File(PathBuf::from(s)),
        },
    };
    let bad = |m: String| ConfigError {
        key: Some("guess".into()),
        line: None,
        position: None,
        message: m,
    };
    match initial {
        Initial::Auto => {
            let r = suggest_initial_radius(spec, DEFAULT_RADIUS_SLACK).map_err(|e| bad(e.to_string()))?;
            Ok((SupportField::sphere(domain, r).expect("positive radius"), false, Some(r)))
        }
        Initial::Radius(r) => {
            let u = SupportField::sphere(domain, r).map_err(|e| bad(e.to_string()))?;
            Ok((u, false, None))
        }
        Initial::File(p) => Ok((config::load_support_field(&p, &domain, "guess")?, true, None)),
    }
}

pub fn stationary(path: &Path, overrides: &Overrides, opts: &StationaryOptions) -> RunReport {
    let mut report = RunReport::new("stationary");
    let cfg = match load_config(path, overrides, &mut report) {
        Ok(c) => c,
        Err(e) => return report.config_error(&e),
    };
    let spec = cfg.spec();
    let (guess, from_file, radius) = match resolve_guess(&cfg, &spec, &opts.guess) {
        Ok(g) => g,
        Err(e) => return report.config_error(&e),
    };
    report.initial_radius = radius;
    let mut newton = NewtonConfig::new(guess.clone());
    if let Some(t) = opts.residual_tol {
        newton.residual_tol = t;
    }
    if let Some(m) = opts.max_iterations {
        newton.max_iterations = m;
    }
    let residual_tol = newton.residual_tol;
    let guess_margin = convexity_margin(&guess);
    let mut summary = StationarySummary {
        converged: false,
        residual_tol,
        report: None,
        agreement_with_guess: None,
        guess_convexity_margin: Some(guess_margin),
    };
    let result = solve(&newton, &spec);
    let outcome = match result {
        Ok((u, rep)) => {
            summary.converged = rep.residual < residual_tol;
            if from_file {
                summary.agreement_with_guess = Some(u.field().sup_distance(guess.field()));
            }
            summary.report = Some(rep);
            Ok(u)
        }
        Err(e) => Err(e),
    };
    report.stationary = Some(summary);
    let dir = &cfg.output_dir;
    match outcome {
        Ok(u) => {
            let field = dir.join(STATIONARY_FIELD_FILE);
            let written = fs::create_dir_all(dir)
                .map_err(anyhow::Error::from)
                .and_then(|_| save_field(&field, u.field()).map_err(anyhow::Error::from));
            if let Err(e) = written {
                return report.fail(EXIT_CONFIG, "io_error", ErrorReport::new("io", format!("{e:#}")));
            }
            report.artifacts = vec![field, dir.join(STATIONARY_REPORT_FILE)];
            report.status = "converged".into();
        }
        Err(e) => {
            let kind = match e {
                StationaryError::GuessNotConvex { .. } => "guess_not_convex",
                StationaryError::MaxIterations { .. } => "max_iterations",
                StationaryError::LineSearch { .. } => "line_search",
                StationaryError::ConvexityLost { .. } => "convexity_lost",
                _ => "newton",
            };
            report = report.fail(EXIT_NEWTON, kind, ErrorReport::new(kind, e.to_string()));
            report.artifacts = vec![dir.join(STATIONARY_REPORT_FILE)];
        }
    }
    if fs::create_dir_all(dir).is_ok() {
        if let Err(e) = report.write(&dir.join(STATIONARY_REPORT_FILE)) {
            return report.fail(EXIT_CONFIG, "io_error", ErrorReport::new("io", format!("{e:#}")));
        }
    }
    report
}

pub fn print_stationary_summary(report: &RunReport) {
    if let Some(s) = &report.stationary {
        if let Some(r) = &s.report {
            eprintln!(
                "newton: {} iterations, residual {:.3e}, convexity margin {:.6}, |X|² in [{:.6}, {:.6}]",
                r.iterations, r.residual, r.convexity_margin, r.radial_min, r.radial_max
            );
        }
        if let Some(m) = s.guess_convexity_margin {
            eprintln!("guess convexity margin: {m:.6}");
        }
        if let Some(d) = s.agreement_with_guess {
            eprintln!("sup distance to guess: {d:.3e}");
        }
    }
    print_error(report);
}
