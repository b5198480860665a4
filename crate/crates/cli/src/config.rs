//! Run configuration: a flat TOML table with typed keys. Unknown keys are
//! rejected; command-line flags override file values key by key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use harmflow::curvature::{CurvatureSpec, SpecError};
use harmflow::flow::{dt_cap, AdaptiveDt, DtPolicy, FlowConfig, InitialData};
use harmflow::geometry::SupportField;
use harmflow::io::load_field_on;
use harmflow::sphere::SphereDomain;
use serde::{Deserialize, Serialize};

/// `initial` is either a radius, `"auto"`, or a path to a field file.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum InitialValue {
    Radius(f64),
    Text(String),
}

/// Keys as they appear in the file, all optional until merged.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dim: Option<usize>,
    pub resolution: Option<usize>,
    #[serde(rename = "F")]
    pub f: Option<String>,
    #[serde(rename = "R1")]
    pub r1: Option<f64>,
    #[serde(rename = "R2")]
    pub r2: Option<f64>,
    pub initial: Option<InitialValue>,
    pub dt: Option<f64>,
    pub dt_policy: Option<String>,
    pub t_max: Option<f64>,
    pub stationarity_tol: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub strict_conditions: Option<bool>,
}

/// Flags mirroring the config keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long = "F", value_name = "EXPR")]
    pub f: Option<String>,
    #[arg(long = "R1")]
    pub r1: Option<f64>,
    #[arg(long = "R2")]
    pub r2: Option<f64>,
    /// A radius, `auto`, or a field file.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "dt_policy", alias = "dt-policy", value_name = "fixed|adaptive")]
    pub dt_policy: Option<String>,
    #[arg(long = "t_max", alias = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long = "stationarity_tol", alias = "stationarity-tol")]
    pub stationarity_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "output_dir", alias = "output-dir")]
    pub output_dir: Option<PathBuf>,
    #[arg(long = "snapshot_every", alias = "snapshot-every")]
    pub snapshot_every: Option<usize>,
    #[arg(long = "strict_conditions", alias = "strict-conditions")]
    pub strict_conditions: Option<bool>,
}

impl Overrides {
    /// Sets one key from its text form, as written on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
            value
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::key(key, format!("cannot parse `{value}`")))
        }
        match key {
            "dim" => self.dim = parse(key, value)?,
            "resolution" => self.resolution = parse(key, value)?,
            "F" => self.f = Some(value.to_string()),
            "R1" => self.r1 = parse(key, value)?,
            "R2" => self.r2 = parse(key, value)?,
            "initial" => self.initial = Some(value.to_string()),
            "dt" => self.dt = parse(key, value)?,
            "dt_policy" => self.dt_policy = Some(value.to_string()),
            "t_max" => self.t_max = parse(key, value)?,
            "stationarity_tol" => self.stationarity_tol = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "snapshot_every" => self.snapshot_every = parse(key, value)?,
            "strict_conditions" => self.strict_conditions = parse(key, value)?,
            _ => return Err(ConfigError::key(key, "unknown key")),
        }
        Ok(())
    }
}

/// Configuration failure, tagged with the offending key or file position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    /// Character offset inside an expression, for `F` syntax errors.
    pub position: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            line: None,
            position: None,
            message: message.into(),
        }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self {
            key: None,
            line: None,
            position: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Initial {
    Auto,
    Radius(f64),
    File(PathBuf),
}

/// A complete, validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dim: usize,
    pub resolution: usize,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub initial: Initial,
    pub dt: f64,
    pub dt_policy: PolicyName,
    pub t_max: f64,
    pub stationarity_tol: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub snapshot_every: Option<usize>,
    pub strict_conditions: bool,
}

/// Line number of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key` is assigned, if it appears.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        ConfigError {
            key: None,
            line,
            position: None,
            message: e.message().to_string(),
        }
    })
}

impl RawConfig {
    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &o.$field {
                    self.$field = Some(v.clone());
                }
            )*};
        }
        take!(dim, resolution, f, r1, r2, dt, dt_policy, t_max, stationarity_tol, seed, output_dir, snapshot_every, strict_conditions);
        if let Some(v) = &o.initial {
            self.initial = Some(match v.parse::<f64>() {
                Ok(r) => InitialValue::Radius(r),
                Err(_) => InitialValue::Text(v.clone()),
            });
        }
    }

    /// Checks presence, ranges and the expression. Relative paths resolve
    /// against `base`.
    pub fn finish(self, base: &Path, text: &str) -> Result<RunConfig, ConfigError> {
        let at = |key: &str, e: ConfigError| ConfigError {
            line: e.line.or_else(|| line_of_key(text, key)),
            ..e
        };
        let need = |key: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::key(key, "missing required key"))
            }
        };
        need("dim", self.dim.is_some())?;
        need("resolution", self.resolution.is_some())?;
        need("F", self.f.is_some())?;
        need("R1", self.r1.is_some())?;
        need("R2", self.r2.is_some())?;
        need("initial", self.initial.is_some())?;
        need("dt", self.dt.is_some())?;
        need("t_max", self.t_max.is_some())?;
        need("output_dir", self.output_dir.is_some())?;

        let dim = self.dim.unwrap();
        if !(1..=2).contains(&dim) {
            return Err(at("dim", ConfigError::key("dim", format!("{dim} is not 1 or 2"))));
        }
        let resolution = self.resolution.unwrap();
        SphereDomain::build(dim, resolution)
            .map_err(|e| at("resolution", ConfigError::key("resolution", e.to_string())))?;
        let (r1, r2) = (self.r1.unwrap(), self.r2.unwrap());
        if !(r1.is_finite() && r1 > 0.0) {
            return Err(at("R1", ConfigError::key("R1", format!("{r1} must be positive"))));
        }
        if !(r2.is_finite() && r2 > r1) {
            return Err(at("R2", ConfigError::key("R2", format!("{r2} must exceed R1 = {r1}"))));
        }
        let f = self.f.unwrap();
        if let Err(e) = CurvatureSpec::new(&f, dim, r1, r2) {
            let mut err = ConfigError::key("F", e.to_string());
            if let SpecError::Parse(p) = &e {
                err.position = Some(p.position);
            }
            return Err(at("F", err));
        }
        let initial = match self.initial.unwrap() {
            InitialValue::Radius(r) if r.is_finite() && r > 0.0 => Initial::Radius(r),
            InitialValue::Radius(r) => {
                return Err(at("initial", ConfigError::key("initial", format!("radius {r} must be positive"))))
            }
            InitialValue::Text(s) if s == "auto" => Initial::Auto,
            InitialValue::Text(s) => Initial::File(base.join(s)),
        };
        let dt = self.dt.unwrap();
        let cap = dt_cap(dim);
        if !(dt.is_finite() && dt > 0.0 && dt < cap) {
            return Err(at("dt", ConfigError::key("dt", format!("{dt} must lie in (0, {cap}) for n = {dim}"))));
        }
        let dt_policy = match self.dt_policy.as_deref().unwrap_or("fixed") {
            "fixed" => PolicyName::Fixed,
            "adaptive" => PolicyName::Adaptive,
            other => {
                return Err(at(
                    "dt_policy",
                    ConfigError::key("dt_policy", format!("`{other}` is not `fixed` or `adaptive`")),
                ))
            }
        };
        let t_max = self.t_max.unwrap();
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(at("t_max", ConfigError::key("t_max", format!("{t_max} must be positive"))));
        }
        let stationarity_tol = self
            .stationarity_tol
            .unwrap_or(if dim == 1 { 1e-8 } else { 1e-6 });
        if !(stationarity_tol.is_finite() && stationarity_tol > 0.0) {
            return Err(at(
                "stationarity_tol",
                ConfigError::key("stationarity_tol", format!("{stationarity_tol} must be positive")),
            ));
        }
        if self.snapshot_every == Some(0) {
            return Err(at("snapshot_every", ConfigError::key("snapshot_every", "must be at least 1")));
        }
        let output_dir = self.output_dir.unwrap();
        Ok(RunConfig {
            dim,
            resolution,
            f,
            r1,
            r2,
            initial,
            dt,
            dt_policy,
            t_max,
            stationarity_tol,
            seed: self.seed.unwrap_or(0),
            output_dir: base.join(output_dir),
            snapshot_every: self.snapshot_every,
            strict_conditions: self.strict_conditions.unwrap_or(false),
        })
    }
}

/// Reads, merges and validates a config file.
pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
    let mut raw = parse_raw(&text)?;
    raw.apply(overrides);
    let base = path.parent().unwrap_or(Path::new("."));
    raw.finish(base, &text)
}

impl RunConfig {
    pub fn domain(&self) -> Arc<SphereDomain> {
        SphereDomain::build(self.dim, self.resolution).expect("validated")
    }

    pub fn spec(&self) -> Arc<CurvatureSpec> {
        Arc::new(CurvatureSpec::new(&self.f, self.dim, self.r1, self.r2).expect("validated"))
    }

    /// Resolves the initial data against the domain.
    pub fn initial_data(&self, domain: &Arc<SphereDomain>) -> Result<InitialData, ConfigError> {
        Ok(match &self.initial {
            Initial::Auto => InitialData::Auto,
            Initial::Radius(r) => InitialData::Constant(*r),
            Initial::File(path) => InitialData::Field(load_support_field(path, domain, "initial")?),
        })
    }

    pub fn flow_config(&self, allow_inadmissible: bool) -> Result<FlowConfig, ConfigError> {
        let domain = self.domain();
        let initial = self.initial_data(&domain)?;
        let mut cfg = FlowConfig::new(domain, self.spec(), initial, self.dt, self.t_max);
        cfg.stationarity_tol = self.stationarity_tol;
        cfg.seed = self.seed;
        cfg.snapshot_every = self.snapshot_every;
        cfg.strict_conditions = self.strict_conditions;
        cfg.allow_inadmissible = allow_inadmissible;
        if self.dt_policy == PolicyName::Adaptive {
            cfg.dt_policy = DtPolicy::Adaptive(AdaptiveDt {
                dt_min: self.dt / 64.0,
                dt_max: (16.0 * self.dt).min(0.9 * dt_cap(self.dim)).max(self.dt),
                target_change: 1e-3,
            });
        }
        Ok(cfg)
    }
}

pub fn load_support_field(path: &Path, domain: &Arc<SphereDomain>, key: &str) -> Result<SupportField, ConfigError> {
    let field = load_field_on(path, domain)
        .map_err(|e| ConfigError::key(key, format!("{}: {e}", path.display())))?;
    SupportField::new(field).map_err(|e| ConfigError::key(key, format!("{}: {e}", path.display())))
}
