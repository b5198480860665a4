//! Plot data and static SVG charts from a finished run.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use harmflow::io::{read_diagnostics, read_table, write_table, Table};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn read_input(path: &Path) -> anyhow::Result<Table> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_diagnostics(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

struct Series<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

/// A line chart with linear x and, optionally, logarithmic y.
fn line_chart(title: &str, x_label: &str, series: &[Series], log_y: bool) -> String {
    let ty = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if !(x0 < x1) {
        (x0, x1) = (x0.min(0.0), x0.max(0.0) + 1.0);
    }
    if !(y0 < y1) {
        (y0, y1) = if y0.is_finite() { (y0 - 0.5, y0 + 0.5) } else { (0.0, 1.0) };
    }
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (ty(y) - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let label = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            MARGIN + f * pw,
            HEIGHT - MARGIN + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#,
            MARGIN - 6.0,
            HEIGHT - MARGIN - f * ph + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0 - pw / 4.0,
            MARGIN + 16.0 + 14.0 * k as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Equal-aspect overlay of closed curves.
fn curve_chart(curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let r = curves
        .iter()
        .flat_map(|(_, c)| c.iter())
        .fold(0.0_f64, |m, &(x, y)| m.max(x.abs()).max(y.abs()))
        .max(1e-12)
        * 1.05;
    let side = HEIGHT - 2.0 * MARGIN;
    let cx = WIDTH / 2.0;
    let cy = HEIGHT / 2.0;
    let s = side / (2.0 * r);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{cx:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">curve snapshots</text>"#
    );
    for (k, (label, c)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = c
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", cx + s * x, cy - s * y))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{label}</text>"#,
            WIDTH - MARGIN - 60.0,
            MARGIN + 14.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_table(w, &header, rows).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Snapshot files of a run, sorted by step.
fn snapshot_files(dir: &Path) -> anyhow::Result<Vec<(usize, PathBuf)>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(step) = name
            .strip_prefix("snapshot_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

fn read_snapshot(path: &Path) -> anyhow::Result<Table> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_table(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// Position columns of a snapshot.
fn positions(t: &Table, path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let cols: Vec<Vec<f64>> = ["X1", "X2", "X3"].iter().filter_map(|c| t.column(c)).collect();
    if cols.len() < 2 {
        bail!("{}: missing position columns", path.display());
    }
    Ok((0..t.rows.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Writes every plot file for `diagnostics` into `out` and returns their paths.
/// Snapshots are read from the sibling `snapshots/` directory when present.
pub fn plot(diagnostics: &Path, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let table = read_input(diagnostics)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let col = |name: &str| table.column(name).expect("columns checked on read");
    let t = col("t");
    let mut files = Vec::new();

    let residual = col("residual_sup");
    let rows: Vec<Vec<f64>> = t.iter().zip(&residual).map(|(a, b)| vec![*a, *b]).collect();
    let p = out.join("residual.csv");
    write_csv(&p, &["t", "residual_sup"], &rows)?;
    files.push(p);
    let series = [Series {
        label: "sup |G|",
        points: t.iter().copied().zip(residual.iter().copied()).collect(),
    }];
    let p = out.join("residual.svg");
    write_text(&p, &line_chart("residual", "t", &series, true))?;
    files.push(p);

    let names = ["convexity_margin", "G_min", "radial_min", "radial_max"];
    let cols: Vec<Vec<f64>> = names.iter().map(|n| col(n)).collect();
    let rows: Vec<Vec<f64>> = (0..t.len())
        .map(|i| std::iter::once(t[i]).chain(cols.iter().map(|c| c[i])).collect())
        .collect();
    let p = out.join("margins.csv");
    let mut header = vec!["t"];
    header.extend(names);
    write_csv(&p, &header, &rows)?;
    files.push(p);
    let series: Vec<Series> = names
        .iter()
        .zip(&cols)
        .map(|(n, c)| Series {
            label: n,
            points: t.iter().copied().zip(c.iter().copied()).collect(),
        })
        .collect();
    let p = out.join("margins.svg");
    write_text(&p, &line_chart("invariant margins", "t", &series, false))?;
    files.push(p);

    let snap_dir = diagnostics
        .parent()
        .unwrap_or(Path::new("."))
        .join(crate::commands::SNAPSHOT_DIR);
    let mut curves = Vec::new();
    for (step, path) in snapshot_files(&snap_dir)? {
        let snap = read_snapshot(&path)?;
        let pos = positions(&snap, &path)?;
        if pos[0].len() == 2 {
            let p = out.join(format!("curve_{step:06}.csv"));
            write_csv(&p, &["X1", "X2"], &pos)?;
            files.push(p);
            curves.push((format!("step {step}"), pos.iter().map(|v| (v[0], v[1])).collect()));
        } else {
            let p = out.join(format!("cloud_{step:06}.xyz"));
            let mut text = String::new();
            for v in &pos {
                let _ = writeln!(text, "{:?} {:?} {:?}", v[0], v[1], v[2]);
            }
            write_text(&p, &text)?;
            files.push(p);
        }
    }
    if !curves.is_empty() {
        let p = out.join("curves.svg");
        write_text(&p, &curve_chart(&curves))?;
        files.push(p);
    }
    Ok(files)
}
