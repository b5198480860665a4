//! Independent flow runs over the values of one key.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::commands;
use crate::config::{self, ConfigError, Overrides};
use crate::report::RunReport;

#[derive(Debug, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub output_dir: PathBuf,
    pub exit_code: u8,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub key: String,
    pub exit_code: u8,
    pub runs: Vec<SweepEntry>,
}

/// Directory-safe form of a value.
fn slug(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-.+".contains(c) { c } else { '_' })
        .collect()
}

/// Prepares one override set per value, each with its own output directory
/// `<base>/<key>_<value>`.
pub fn plan(
    path: &Path,
    base: &Overrides,
    key: &str,
    values: &[String],
) -> Result<(PathBuf, Vec<Overrides>), ConfigError> {
    if key == "output_dir" {
        return Err(ConfigError {
            key: Some(key.into()),
            line: None,
            position: None,
            message: "cannot sweep over the output directory".into(),
        });
    }
    // Absolute, so the per-run override is not re-joined to the config directory.
    let root = config::load(path, base)?.output_dir;
    let root = std::path::absolute(&root).unwrap_or(root);
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let mut o = base.clone();
        o.set(key, v)?;
        o.output_dir = Some(root.join(format!("{key}_{}", slug(v))));
        runs.push(o);
    }
    Ok((root, runs))
}

/// Runs every planned flow on up to `jobs` threads. Results keep the
/// order of `values`.
pub fn run(path: &Path, key: &str, values: &[String], runs: &[Overrides], jobs: usize) -> SweepReport {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RunReport>>> = Mutex::new((0..runs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, runs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= runs.len() {
                    break;
                }
                let report = commands::flow(path, &runs[k], false);
                slots.lock().expect("no worker panics")[k] = Some(report);
            });
        }
    });
    let reports = slots.into_inner().expect("no worker panics");
    let runs: Vec<SweepEntry> = reports
        .into_iter()
        .zip(values.iter().zip(runs))
        .map(|(r, (v, o))| {
            let r = r.expect("every run reports");
            SweepEntry {
                value: v.clone(),
                output_dir: o.output_dir.clone().expect("set by plan"),
                exit_code: r.exit_code,
                status: r.status,
                final_residual: r.flow.map(|f| f.final_residual),
            }
        })
        .collect();
    SweepReport {
        key: key.to_string(),
        exit_code: runs.iter().map(|r| r.exit_code).max().unwrap_or(0),
        runs,
    }
}
