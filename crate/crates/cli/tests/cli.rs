use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use harmflow::geometry::{convexity_margin, SupportField};
use harmflow::io::{load_field, read_table, save_field};
use harmflow::sphere::{ScalarField, SphereDomain};
use serde_json::Value;
use tempfile::TempDir;

const CIRCLE: &str = r#"dim = 1
resolution = 64
F = "2*r-1.5"
R1 = 1.0
R2 = 3.0
initial = 1.2
dt = 1e-3
t_max = 40.0
output_dir = "out"
"#;

const SPHERE: &str = r#"dim = 2
resolution = 24
F = "3*r-1"
R1 = 0.5
R2 = 2.0
initial = 0.8
dt = 0.02
t_max = 40.0
output_dir = "out"
"#;

const TILTED: &str = r#"dim = 2
resolution = 24
F = "3*r-1+0.1*x3"
R1 = 0.5
R2 = 2.0
initial = "auto"
dt = 0.02
t_max = 80.0
stationarity_tol = 1e-8
output_dir = "out"
"#;

struct Run {
    code: i32,
    report: Value,
    stderr: String,
}

fn harmflow(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_harmflow")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    Run {
        code: out.status.code().unwrap(),
        report: serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("stdout is not a report ({e}): {stdout}")),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Nonzero exits always carry a report that names the same code.
fn assert_exit(run: &Run, code: i32) {
    assert_eq!(run.code, code, "stderr: {}\nreport: {}", run.stderr, run.report);
    assert_eq!(run.report["exit_code"], code);
}

#[test]
fn check_accepts_the_circle_demo() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", CIRCLE);
    let run = harmflow(&["check", s(&cfg)]);
    assert_exit(&run, 0);
    assert!(run.stderr.contains("condition (a): pass"));
    assert!(run.stderr.contains("admissibility: pass"));
    let a = &run.report["admissibility"];
    assert!((a["convexity_margin"].as_f64().unwrap() - 1.2).abs() < 1e-9);
    assert!((a["g_min"].as_f64().unwrap() - 0.3).abs() < 1e-9);
}

#[test]
fn check_reports_expression_syntax_position() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", &CIRCLE.replace("2*r-1.5", "2**r"));
    let run = harmflow(&["check", s(&cfg)]);
    assert_exit(&run, 4);
    let e = &run.report["error"];
    assert_eq!(e["key"], "F");
    assert_eq!(e["line"], 3);
    assert_eq!(e["position"], 2);
}

#[test]
fn check_warns_when_f_is_neither_concave_nor_convex() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", &CIRCLE.replace("2*r-1.5", "2*r-1.5+0.02*x1^3"));
    let run = harmflow(&["check", s(&cfg)]);
    assert_exit(&run, 5);
    assert_eq!(run.report["verdict"]["shape"], "neither");
    assert!(run.report["conditions"]["chords"]["concavity_witness"].is_object());
    assert!(run.stderr.contains("warning: F is neither concave nor convex"));
}

#[test]
fn check_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", &format!("{CIRCLE}stationarity_tolerance = 1e-9\n"));
    let run = harmflow(&["check", s(&cfg)]);
    assert_exit(&run, 4);
    assert_eq!(run.report["error"]["line"], 10);
}

#[test]
fn check_never_touches_the_output_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", CIRCLE);
    harmflow(&["check", s(&cfg)]);
    assert!(!dir.path().join("out").exists());

    fs::create_dir(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/keep.txt"), "x").unwrap();
    harmflow(&["check", s(&cfg)]);
    let names: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["keep.txt"]);
    assert_eq!(fs::read_to_string(dir.path().join("out/keep.txt")).unwrap(), "x");
}

#[test]
fn flow_demo_converges_to_the_closed_form_limit() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", CIRCLE);
    let run = harmflow(&["flow", s(&cfg)]);
    assert_exit(&run, 0);
    assert_eq!(run.report["status"], "converged");
    let u = load_field(&dir.path().join("out/final_field.txt")).unwrap();
    assert!(u.values().iter().all(|v| (v - 1.5).abs() < 1e-6));
    let saved: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(saved, run.report);
}

#[test]
fn flow_stops_at_max_time() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", CIRCLE);
    let run = harmflow(&["flow", s(&cfg), "--t_max", "0.01"]);
    assert_exit(&run, 1);
    assert_eq!(run.report["flow"]["exit"]["state"], "max_time_reached");
    assert!(dir.path().join("out/diagnostics.csv").exists());
}

#[test]
fn flow_rejects_dt_above_the_cap() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", &CIRCLE.replace("dt = 1e-3", "dt = 0.6"));
    let run = harmflow(&["flow", s(&cfg)]);
    assert_exit(&run, 4);
    assert_eq!(run.report["error"]["key"], "dt");
    assert!(!dir.path().join("out/diagnostics.csv").exists());
}

#[test]
fn flow_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", &TILTED.replace("t_max = 80.0", "t_max = 2.0"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    harmflow(&["flow", s(&cfg), "--output_dir", s(&a)]);
    harmflow(&["flow", s(&cfg), "--output_dir", s(&b)]);
    let da = fs::read(a.join("diagnostics.csv")).unwrap();
    assert!(!da.is_empty());
    assert_eq!(da, fs::read(b.join("diagnostics.csv")).unwrap());
}

#[test]
fn stationary_recovers_the_unit_sphere() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.toml", SPHERE);
    let run = harmflow(&["stationary", s(&cfg), "--guess", "0.8"]);
    assert_exit(&run, 0);
    let u = load_field(&dir.path().join("out/stationary_field.txt")).unwrap();
    assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    assert!(run.report["stationary"]["report"]["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn stationary_refuses_a_non_convex_guess() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.toml", SPHERE);
    let d = SphereDomain::build(2, 24).unwrap();
    let u = SupportField::new(ScalarField::from_fn(d, |x| 1.0 + 2.0 * x[2] * x[2])).unwrap();
    let margin = convexity_margin(&u);
    assert!(margin < 0.0);
    let guess = dir.path().join("guess.txt");
    save_field(&guess, u.field()).unwrap();

    let run = harmflow(&["stationary", s(&cfg), "--guess", s(&guess)]);
    assert_exit(&run, 6);
    assert_eq!(run.report["status"], "guess_not_convex");
    let reported = run.report["stationary"]["guess_convexity_margin"].as_f64().unwrap();
    assert!((reported - margin).abs() < 1e-12);
}

#[test]
fn stationary_agrees_with_the_flow_limit() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "t.toml", TILTED);
    assert_exit(&harmflow(&["flow", s(&cfg)]), 0);
    let limit = dir.path().join("out/final_field.txt");
    let run = harmflow(&["stationary", s(&cfg), "--guess", s(&limit)]);
    assert_exit(&run, 0);
    let st = &run.report["stationary"];
    assert!(st["agreement_with_guess"].as_f64().unwrap() < 1e-6);
    assert!(st["report"]["residual"].as_f64().unwrap() < 1e-10);
    assert!(st["report"]["convexity_margin"].as_f64().unwrap() > 0.0);
    assert_eq!(st["report"]["inside_annulus"], true);
}

#[test]
fn residual_plot_follows_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", CIRCLE);
    harmflow(&["flow", s(&cfg)]);
    let run = harmflow(&["plot", s(&dir.path().join("out/diagnostics.csv"))]);
    assert_exit(&run, 0);
    let plots = dir.path().join("out/plots");
    for f in ["residual.csv", "residual.svg", "margins.csv", "margins.svg"] {
        assert!(plots.join(f).exists(), "{f}");
    }
    let table = read_table(std::io::BufReader::new(fs::File::open(plots.join("residual.csv")).unwrap())).unwrap();
    let (t, r) = (table.column("t").unwrap(), table.column("residual_sup").unwrap());
    // The log-scale chart spans about seven decades over 288 px; a 1.5 px
    // stroke covers about 0.035 decades.
    let worst = t
        .iter()
        .zip(&r)
        .map(|(&t, &r)| (r.log10() - (0.3 * (-t).exp()).log10()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.035, "{worst}");
}

#[test]
fn plot_rejects_empty_diagnostics() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("diagnostics.csv");
    fs::write(&empty, "").unwrap();
    assert_exit(&harmflow(&["plot", s(&empty)]), 4);
    fs::write(&empty, "step,t\n0,0\n").unwrap();
    assert_exit(&harmflow(&["plot", s(&empty)]), 4);
}

#[test]
fn plot_writes_one_point_cloud_per_snapshot() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.toml", SPHERE);
    harmflow(&["flow", s(&cfg), "--t_max", "1.1", "--snapshot_every", "10"]);
    let snaps = fs::read_dir(dir.path().join("out/snapshots")).unwrap().count();
    assert_eq!(snaps, 7);
    harmflow(&["plot", s(&dir.path().join("out/diagnostics.csv"))]);
    let clouds: Vec<_> = fs::read_dir(dir.path().join("out/plots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("cloud_") && n.ends_with(".xyz"))
        .collect();
    assert_eq!(clouds.len(), snaps);
    let first = fs::read_to_string(dir.path().join("out/plots/cloud_000000.xyz")).unwrap();
    let d = SphereDomain::build(2, 24).unwrap();
    assert_eq!(first.lines().count(), d.node_count());
    for line in first.lines() {
        let p: Vec<f64> = line.split(' ').map(|v| v.parse().unwrap()).collect();
        assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 0.8).abs() < 1e-12);
    }
}

#[test]
fn sweep_runs_each_value_in_its_own_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", &CIRCLE.replace("t_max = 40.0", "t_max = 0.5"));
    let out = Command::new(env!("CARGO_BIN_EXE_harmflow"))
        .args(["sweep", s(&cfg), "--key", "dt", "--values", "1e-3,2e-3,0.7", "--jobs", "2"])
        .output()
        .unwrap();
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(4));
    let codes: Vec<_> = summary["runs"].as_array().unwrap().iter().map(|r| r["exit_code"].as_u64().unwrap()).collect();
    assert_eq!(codes, [1, 1, 4]);
    for v in ["1e-3", "2e-3"] {
        assert!(dir.path().join(format!("out/dt_{v}/diagnostics.csv")).exists());
    }
    assert!(dir.path().join("out/sweep.json").exists());
}
