//! Acceptance suite. Prints one line per criterion and exits nonzero if any fails.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use harmflow::curvature::{check_conditions, verify_concavity, verify_condition_a, CurvatureSpec};
use harmflow::flow::{
    check_initial_admissibility, g_evolution_residual, run, step, ExitState, FlowConfig,
    FlowRunner, FlowState, InitialData, RunOutcome, TimeScheme,
};
use harmflow::geometry::{
    convexity_margin, embed, extremal_point_check, second_fundamental_form, SupportField,
};
use harmflow::sphere::{ScalarField, SphereDomain};
use harmflow::stationary::{solve, NewtonConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn spec(f: &str, dim: usize, r1: f64, r2: f64) -> Arc<CurvatureSpec> {
    Arc::new(CurvatureSpec::new(f, dim, r1, r2).unwrap())
}

fn benchmark_one(dt: f64) -> FlowConfig {
    let d = SphereDomain::build(1, 64).unwrap();
    FlowConfig::new(d, spec("2*r-1.5", 1, 1.0, 3.0), InitialData::Constant(1.2), dt, 40.0)
}

fn benchmark_two() -> FlowConfig {
    let d = SphereDomain::build(2, 48).unwrap();
    FlowConfig::new(d, spec("3*r-1", 2, 0.5, 2.0), InitialData::Constant(0.8), 0.01, 40.0)
}

fn sup_error(u: &SupportField, exact: f64) -> f64 {
    u.values().iter().fold(0.0, |m, v| m.max((v - exact).abs()))
}

fn converged(out: &RunOutcome) -> Option<f64> {
    match out.exit {
        ExitState::Converged { residual } => Some(residual),
        _ => None,
    }
}

/// Band-limited noise in degrees 1..=4 with amplitude `eps/l²` per coefficient.
fn noise(d: &Arc<SphereDomain>, eps: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let coefs: Vec<f64> = d
        .coefficient_degrees()
        .iter()
        .map(|&l| {
            if (1..=4).contains(&l) {
                eps * rng.gen_range(-1.0..1.0) / (l * l) as f64
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::from_coefficients(d.clone(), &coefs).into_values()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut cfg = benchmark_one(1e-3);
    cfg.scheme = TimeScheme::ImexExtrapolated;
    let mut runner = FlowRunner::new(cfg).unwrap();
    let mut worst: f64 = 0.0;
    loop {
        let s = runner.state();
        worst = worst.max(sup_error(&s.u, 1.5 - 0.3 * (-s.t).exp()));
        if !runner.step_once() {
            break;
        }
    }
    let out = runner.finish();
    let elapsed = start.elapsed().as_secs_f64();
    let residual = converged(&out);
    Verdict::new(
        worst < 1e-5 && residual.is_some_and(|r| r < 1e-8) && elapsed < 5.0,
        format!(
            "sup trajectory error {worst:.3e}, exit {}, residual {:.3e}, {elapsed:.2} s",
            out.exit.name(),
            out.history.last().unwrap().residual_sup
        ),
    )
}

fn criterion_2(out: &RunOutcome, elapsed: f64) -> Verdict {
    let err = sup_error(&out.final_state.u, 1.0);
    Verdict::new(
        converged(out).is_some() && err < 1e-5 && elapsed < 60.0,
        format!("exit {}, sup |u - 1| {err:.3e}, {elapsed:.2} s", out.exit.name()),
    )
}

/// Checks every recorded step of a run against the invariant bounds.
fn invariants_hold(out: &RunOutcome, spec: &CurvatureSpec, dim: usize) -> Result<(), String> {
    let (r1, r2) = spec.annulus();
    let bound = (dim as f64 + 2.0) * r2 * r2 * if dim == 1 { 2.0 * PI } else { 4.0 * PI };
    if matches!(out.exit, ExitState::InvariantViolation { .. } | ExitState::BlowUp { .. }) {
        return Err(format!("exit {:?}", out.exit));
    }
    for r in &out.history {
        if !(r.convexity_margin > 0.0) {
            return Err(format!("step {}: convexity margin {}", r.step, r.convexity_margin));
        }
        if !(r.radial_min > r1 * r1 && r.radial_max < r2 * r2) {
            return Err(format!("step {}: radial range [{}, {}]", r.step, r.radial_min, r.radial_max));
        }
        if !(r.g_min >= -1e-7) {
            return Err(format!("step {}: G_min {}", r.step, r.g_min));
        }
        if !(r.energy_accumulator <= bound) {
            return Err(format!("step {}: energy {}", r.step, r.energy_accumulator));
        }
    }
    Ok(())
}

fn criterion_3(bench_one: &RunOutcome, bench_two: &RunOutcome) -> Verdict {
    let mut failures = Vec::new();
    let s1 = spec("2*r-1.5", 1, 1.0, 3.0);
    let s2 = spec("3*r-1", 2, 0.5, 2.0);
    if let Err(e) = invariants_hold(bench_one, &s1, 1) {
        failures.push(format!("benchmark 1: {e}"));
    }
    if let Err(e) = invariants_hold(bench_two, &s2, 2) {
        failures.push(format!("benchmark 2: {e}"));
    }
    let energy = bench_one.final_state.energy_accumulator;
    let closed = 2.0 * PI * 0.045;
    let energy_rel = (energy - closed).abs() / closed;
    if energy_rel >= 0.01 {
        failures.push(format!("benchmark 1 energy {energy} vs {closed}"));
    }

    // Ten perturbed fields per dimension, seeded, kept only if admissible.
    let cases = [
        (SphereDomain::build(1, 64).unwrap(), s1, 1.2, 0.05, 0.01),
        (SphereDomain::build(2, 16).unwrap(), s2, 0.8, 0.05, 0.01),
    ];
    let mut ran = 0;
    let mut skipped = 0;
    for (d, sp, r0, eps, dt) in cases {
        let mut seed = 0u64;
        let mut accepted = 0;
        while accepted < 10 && seed < 1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seed += 1;
            let values = noise(&d, eps, &mut rng).iter().map(|v| r0 + v).collect();
            let Ok(u0) = SupportField::new(ScalarField::new(d.clone(), values).unwrap()) else {
                skipped += 1;
                continue;
            };
            if !check_initial_admissibility(&u0, &sp).unwrap().pass {
                skipped += 1;
                continue;
            }
            accepted += 1;
            let out = run(FlowConfig::new(d.clone(), sp.clone(), InitialData::Field(u0), dt, 40.0)).unwrap();
            if let Err(e) = invariants_hold(&out, &sp, d.dim()) {
                failures.push(format!("n={} seed {}: {e}", d.dim(), seed - 1));
            }
            ran += 1;
        }
    }
    if ran < 20 {
        failures.push(format!("only {ran} admissible perturbed fields"));
    }
    Verdict::new(
        failures.is_empty(),
        format!(
            "{ran} perturbed runs ({skipped} inadmissible draws skipped), benchmark 1 energy off by {:.2}%{}",
            100.0 * energy_rel,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn criterion_4() -> Verdict {
    let d = SphereDomain::build(2, 48).unwrap();
    let sp = spec("3*r-1+0.1*x3", 2, 0.5, 2.0);
    let mut cfg = FlowConfig::new(d, sp.clone(), InitialData::Constant(0.8), 0.02, 60.0);
    cfg.stationarity_tol = 1e-8;
    let out = run(cfg).unwrap();
    let flow_u = out.final_state.u.clone();
    let (u, rep) = match solve(&NewtonConfig::new(flow_u.clone()), &sp) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("flow exit {}, Newton failed: {e}", out.exit.name())),
    };
    let dist = u.field().sup_distance(flow_u.field());
    let (r1, r2) = sp.annulus();
    let inside = rep.radial_min >= r1 * r1 && rep.radial_max <= r2 * r2;
    Verdict::new(
        converged(&out).is_some() && dist < 1e-6 && rep.residual < 1e-10 && rep.convexity_margin > 0.0 && inside,
        format!(
            "flow exit {}, |flow - Newton| {dist:.3e}, Newton residual {:.3e}, margin {:.4}, radial [{:.4}, {:.4}]",
            out.exit.name(),
            rep.residual,
            rep.convexity_margin,
            rep.radial_min,
            rep.radial_max
        ),
    )
}

fn convex_field(d: &Arc<SphereDomain>, rng: &mut ChaCha8Rng) -> SupportField {
    loop {
        let values = noise(d, 0.3, rng).iter().map(|v| 1.0 + v).collect();
        let u = SupportField::new(ScalarField::new(d.clone(), values).unwrap()).unwrap();
        if convexity_margin(&u) > 0.2 {
            return u;
        }
    }
}

fn criterion_5() -> Verdict {
    let mut worst = [0.0_f64; 2];
    let mut bartnik_failures = 0;
    for (k, (dim, res)) in [(1, 64), (2, 24)].into_iter().enumerate() {
        let d = SphereDomain::build(dim, res).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u = convex_field(&d, &mut rng);
            let grad = d.gradient(u.field()).unwrap();
            let surface = embed(&u);
            for i in 0..d.node_count() {
                let p = surface.positions[i];
                let lhs = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                let v = u.values()[i];
                let rhs = v * v + grad.norm_squared(i);
                worst[k] = worst[k].max((lhs - rhs).abs() / rhs);
            }
            if !extremal_point_check(&u, 5.0 * d.grid_spacing()).unwrap().pass {
                bartnik_failures += 1;
            }
        }
    }
    let (a, b) = (2.0_f64, 1.0_f64);
    let d = SphereDomain::build(1, 128).unwrap();
    let ellipse = SupportField::new(ScalarField::from_fn(d.clone(), |x| {
        (a * a * x[0] * x[0] + b * b * x[1] * x[1]).sqrt()
    }))
    .unwrap();
    let h = second_fundamental_form(&ellipse);
    let ellipse_err = (0..d.node_count())
        .map(|i| (h.at(i)[0] - a * a * b * b / ellipse.values()[i].powi(3)).abs())
        .fold(0.0, f64::max);
    Verdict::new(
        worst[0] < 1e-10 && worst[1] < 1e-7 && ellipse_err < 1e-8 && bartnik_failures == 0,
        format!(
            "embedding identity {:.2e} (n=1) {:.2e} (n=2), ellipse radius error {ellipse_err:.2e}, Bartnik failures {bartnik_failures}/100",
            worst[0], worst[1]
        ),
    )
}

/// Real and imaginary parts of `(x1 + i x2)^m`.
fn sectoral(x: &[f64; 3], m: usize) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m {
        (re, im) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
    }
    (re, im)
}

fn legendre(l: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        (p0, p1) = (p1, ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0));
    }
    p1
}

fn eigen_error(d: &Arc<SphereDomain>, f: impl Fn(&[f64; 3]) -> f64, eigen: f64) -> f64 {
    let u = ScalarField::from_fn(d.clone(), f);
    if u.sup_norm() == 0.0 {
        return 0.0;
    }
    let lu = d.laplace_beltrami(&u).unwrap();
    let e = u
        .values()
        .iter()
        .zip(lu.values())
        .fold(0.0_f64, |m, (v, w)| m.max((w + eigen * v).abs()));
    e / (u.sup_norm() * eigen.max(1.0))
}

fn trace_error(d: &Arc<SphereDomain>, band: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let coefs: Vec<f64> = d
            .coefficient_degrees()
            .iter()
            .map(|&l| if l <= band { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let u = ScalarField::from_coefficients(d.clone(), &coefs);
        let lu = d.laplace_beltrami(&u).unwrap();
        let hess = d.covariant_hessian(&u).unwrap();
        let scale = lu.sup_norm();
        for i in 0..d.node_count() {
            worst = worst.max((hess.trace(i) - lu.values()[i]).abs() / scale);
        }
    }
    worst
}

fn criterion_6() -> Verdict {
    let circle = SphereDomain::build(1, 32).unwrap();
    let sphere = SphereDomain::build(2, 48).unwrap();
    let mut e1: f64 = 0.0;
    let mut e2: f64 = 0.0;
    for l in 0..=8 {
        let ev = (l * l) as f64;
        e1 = e1.max(eigen_error(&circle, |x| sectoral(x, l).0, ev));
        e1 = e1.max(eigen_error(&circle, |x| sectoral(x, l).1, ev));
        let ev = (l * (l + 1)) as f64;
        e2 = e2.max(eigen_error(&sphere, |x| legendre(l, x[2]), ev));
        e2 = e2.max(eigen_error(&sphere, |x| sectoral(x, l).0, ev));
        e2 = e2.max(eigen_error(&sphere, |x| sectoral(x, l).1, ev));
        if l >= 1 {
            e2 = e2.max(eigen_error(&sphere, |x| x[2] * sectoral(x, l - 1).0, ev));
            e2 = e2.max(eigen_error(&sphere, |x| x[2] * sectoral(x, l - 1).1, ev));
        }
    }
    let t1 = trace_error(&circle, 12);
    let t2 = trace_error(&sphere, 20);
    Verdict::new(
        e1 < 1e-10 && e2 < 1e-6 && t1 < 1e-10 && t2 < 1e-6,
        format!("eigen error {e1:.2e} (n=1) {e2:.2e} (n=2), trace error {t1:.2e} (n=1) {t2:.2e} (n=2)"),
    )
}

fn g_residual_over_run(cfg: FlowConfig) -> f64 {
    let spec = cfg.spec.clone();
    let mut runner = FlowRunner::new(cfg).unwrap();
    let mut window: VecDeque<FlowState> = VecDeque::new();
    let mut worst: f64 = 0.0;
    loop {
        window.push_back(runner.state().clone());
        if window.len() > 3 {
            window.pop_front();
        }
        if window.len() == 3 {
            let w: Vec<FlowState> = window.iter().cloned().collect();
            worst = worst.max(g_evolution_residual(&w, &spec).unwrap());
        }
        if !runner.step_once() {
            break;
        }
    }
    worst
}

fn criterion_7() -> Verdict {
    let r1 = g_residual_over_run(benchmark_one(1e-3));
    let r2 = g_residual_over_run(benchmark_one(5e-4));
    let ratio = r1 / r2;
    Verdict::new(
        (1.8..=2.2).contains(&ratio) && r1 < 1e-5,
        format!("residual {r1:.3e} at dt=1e-3, {r2:.3e} at dt=5e-4, ratio {ratio:.3}"),
    )
}

fn criterion_8() -> Verdict {
    let mut constants_fail = true;
    for c in ["0", "0.5", "2.5", "7", "-1"] {
        for (dim, r1, r2) in [(1, 1.0, 3.0), (2, 0.5, 2.0)] {
            let a = verify_condition_a(&CurvatureSpec::new(c, dim, r1, r2).unwrap());
            constants_fail &= !a.strict;
        }
    }
    let sq = CurvatureSpec::new("r^2", 1, 1.0, 3.0).unwrap();
    let chords = verify_concavity(&sq, 1000, 42);
    let witness_ok = chords.concavity_witness.as_ref().is_some_and(|w| {
        let f = |p: &[f64]| sq.evaluate(p).unwrap();
        let mid: Vec<f64> = w.p.iter().zip(&w.q).map(|(a, b)| 0.5 * (a + b)).collect();
        let defect = 0.5 * (f(&w.p) + f(&w.q)) - f(&mid);
        defect > 0.0 && (defect - w.defect).abs() <= 1e-12 * (1.0 + defect)
    });
    let s = CurvatureSpec::new("3*r-1+0.1*x3", 2, 0.5, 2.0).unwrap();
    let deterministic = check_conditions(&s, 500, 9) == check_conditions(&s, 500, 9)
        && verify_concavity(&sq, 1000, 42) == chords;
    Verdict::new(
        constants_fail && !chords.concave && witness_ok && deterministic,
        format!(
            "constants fail (a): {constants_fail}, r^2 concave: {}, witness verified: {witness_ok}, deterministic: {deterministic}",
            chords.concave
        ),
    )
}

fn criterion_9(bench_one: &RunOutcome, bench_two: &RunOutcome) -> Verdict {
    let checks = [
        (bench_one, spec("2*r-1.5", 1, 1.0, 3.0), 1e-8),
        (bench_two, spec("3*r-1", 2, 0.5, 2.0), 1e-6),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (out, sp, tol) in checks {
        let s = &out.final_state;
        let next = step(s, &sp).unwrap();
        let change = next.u.field().sup_distance(s.u.field());
        let bound = s.dt * tol;
        pass &= converged(out).is_some() && change < bound;
        parts.push(format!("n={}: change {change:.3e} < {bound:.1e}", s.u.dim()));
    }
    Verdict::new(pass, parts.join(", "))
}

fn main() -> ExitCode {
    let mut verdicts = Vec::new();
    verdicts.push(criterion_1());

    let bench_one = run(benchmark_one(1e-3)).unwrap();
    let start = Instant::now();
    let bench_two = run(benchmark_two()).unwrap();
    let elapsed_two = start.elapsed().as_secs_f64();

    verdicts.push(criterion_2(&bench_two, elapsed_two));
    verdicts.push(criterion_3(&bench_one, &bench_two));
    verdicts.push(criterion_4());
    verdicts.push(criterion_5());
    verdicts.push(criterion_6());
    verdicts.push(criterion_7());
    verdicts.push(criterion_8());
    verdicts.push(criterion_9(&bench_one, &bench_two));

    let mut failed = 0;
    for (k, v) in verdicts.iter().enumerate() {
        println!("criterion {} {}: {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria pass", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
