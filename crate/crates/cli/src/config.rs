//! Configuration files and the resolved run configuration.
//!
//! A configuration file is a JSON object; every key is optional:
//!
//! ```json
//! {
//!   "soliton": { "lambdas": ["0.4-0.3i"], "gammas": ["5.1i", "0.1i"],
//!                "kappa": 3, "alpha": 1.2, "delta": 0.2 },
//!   "grid": "-5:5:41,-2:2:41",
//!   "h": 1e-3,
//!   "system": "all",
//!   "format": "json",
//!   "local": { "mu": "0.3", "gamma": "0.4+0.2i", "alpha": 0.3, "beta": 0.0 },
//!   "nonlocal": { "mu": "0.55i", "gamma": "0", "alpha": 1.5, "delta": 0.15 },
//!   "trajectory": { "source": "local", "x0": 0.0, "t_range": [0, 250], "samples": 2001 },
//!   "sweep": [ { "delta": 0.1 }, { "delta": 0.3 } ]
//! }
//! ```
//!
//! Complex numbers are written as `"a+bi"` strings (plain numbers and
//! `[re, im]` pairs are accepted too). `soliton` may also name a built-in set:
//! `"one-soliton"`, `"two-soliton"` or `"three-soliton"`.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nonlocal_soliton::hirota::{LocalHirotaSoliton, NonlocalHirotaSoliton};
use nonlocal_soliton::numerics::complex_serde;
use nonlocal_soliton::residual::GridSpec;
use nonlocal_soliton::spectral::{presets, validate_config};
use nonlocal_soliton::{Complex, SolitonConfig, StencilSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Smallest admissible number of points on a grid axis used for finite
/// differences.
pub const MIN_GRID_COUNT: usize = 5;

/// Invalid input; reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Ech,
    Hirota,
    Elle,
    Nelle,
    Zerocurv,
    All,
}

impl System {
    pub fn includes(self, other: System) -> bool {
        self == System::All || self == other
    }

    pub fn name(self) -> &'static str {
        match self {
            System::Ech => "ech",
            System::Hirota => "hirota",
            System::Elle => "elle",
            System::Nelle => "nelle",
            System::Zerocurv => "zerocurv",
            System::All => "all",
        }
    }
}

fn preset(name: &str) -> anyhow::Result<SolitonConfig> {
    match name {
        "one-soliton" => Ok(presets::soliton_family(1)),
        "two-soliton" => Ok(presets::two_soliton()),
        "three-soliton" => Ok(presets::three_soliton()),
        other => Err(invalid(format!(
            "unknown soliton preset {other:?} (expected one-soliton, two-soliton or three-soliton)"
        ))),
    }
}

/// Local one-soliton parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSpec {
    #[serde(with = "complex_serde")]
    pub mu: Complex,
    #[serde(with = "complex_serde")]
    pub gamma: Complex,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LocalSpec {
    fn default() -> Self {
        let p = presets::local_periodic();
        LocalSpec { mu: p.mu, gamma: p.gamma, alpha: p.alpha, beta: p.beta }
    }
}

impl LocalSpec {
    pub fn soliton(&self) -> anyhow::Result<LocalHirotaSoliton> {
        LocalHirotaSoliton::new(self.mu, self.gamma, self.alpha, self.beta).map_err(|e| invalid(format!("local: {e}")))
    }
}

/// Nonlocal one-soliton parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlocalSpec {
    #[serde(with = "complex_serde")]
    pub mu: Complex,
    #[serde(with = "complex_serde")]
    pub gamma: Complex,
    pub alpha: f64,
    pub delta: f64,
}

impl Default for NonlocalSpec {
    fn default() -> Self {
        let p = presets::nonlocal_reference();
        NonlocalSpec { mu: p.mu, gamma: p.gamma, alpha: p.alpha, delta: p.delta }
    }
}

impl NonlocalSpec {
    pub fn soliton(&self) -> anyhow::Result<NonlocalHirotaSoliton> {
        NonlocalHirotaSoliton::new(self.mu, self.gamma, self.alpha, self.delta)
            .map_err(|e| invalid(format!("nonlocal: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectorySource {
    /// Split m, l of the spectral solution in `soliton`.
    Spectral,
    /// Spin of the local one-soliton in `local`.
    Local,
    /// Spin of the nonlocal one-soliton in `nonlocal`.
    Nonlocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySpec {
    pub source: TrajectorySource,
    pub x0: f64,
    pub t_range: [f64; 2],
    pub samples: usize,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec { source: TrajectorySource::Local, x0: 0.0, t_range: [0.0, 250.0], samples: 2001 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    soliton: Option<Value>,
    grid: Option<String>,
    h: Option<f64>,
    system: Option<System>,
    format: Option<Format>,
    local: Option<LocalSpec>,
    nonlocal: Option<NonlocalSpec>,
    trajectory: Option<TrajectorySpec>,
    #[serde(default)]
    sweep: Vec<Value>,
}

/// Command-line values that override the configuration file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub grid: Option<String>,
    pub h: Option<f64>,
    pub system: Option<System>,
    pub quiet: bool,
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub soliton: SolitonConfig,
    /// The soliton configuration as JSON, the base for sweep overrides.
    pub soliton_json: Value,
    pub grid: GridSpec,
    pub stencil: StencilSpec,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub system: System,
    pub quiet: bool,
    pub local: LocalSpec,
    pub nonlocal: NonlocalSpec,
    pub trajectory: TrajectorySpec,
    pub sweep: Vec<Value>,
}

/// Rejects soliton configurations that violate any parameter rule.
pub fn check_soliton(cfg: &SolitonConfig, context: &str) -> anyhow::Result<()> {
    let violations = validate_config(cfg);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
    Err(invalid(format!("invalid {context}:\n{}", lines.join("\n"))))
}

/// Parses and checks a grid. `allow_slices` admits single-point axes (a
/// fixed time or position) for commands that do not differentiate.
pub fn parse_grid(text: &str, allow_slices: bool) -> anyhow::Result<GridSpec> {
    let grid: GridSpec = text.parse().map_err(|e| invalid(format!("--grid: {e}")))?;
    for (axis, n) in [('x', grid.nx), ('t', grid.nt)] {
        if n < MIN_GRID_COUNT && !(allow_slices && n == 1) {
            return Err(invalid(format!("--grid: axis {axis} has {n} points, at least {MIN_GRID_COUNT} are required")));
        }
    }
    Ok(grid)
}

fn check_output(path: &Path) -> anyhow::Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(invalid(format!("--out: directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(invalid(format!("--out: {} is a directory", path.display())));
    }
    Ok(())
}

/// Merges the top-level keys of `patch` into `base`.
pub fn merge(base: &Value, patch: &Value) -> anyhow::Result<Value> {
    let (Value::Object(b), Value::Object(p)) = (base, patch) else {
        return Err(invalid(format!("sweep entries must be JSON objects, found {patch}")));
    };
    let mut out = b.clone();
    for (k, v) in p {
        out.insert(k.clone(), v.clone());
    }
    Ok(Value::Object(out))
}

pub fn soliton_from_json(v: &Value) -> anyhow::Result<SolitonConfig> {
    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("soliton: {e}")))
}

impl RunConfig {
    /// Loads the file named by `--config` (if any) and applies the
    /// command-line overrides. `allow_slices` is passed to [`parse_grid`].
    pub fn load(ov: &Overrides, allow_slices: bool) -> anyhow::Result<RunConfig> {
        let file: ConfigFile = match &ov.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid(format!("--config: cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| invalid(format!("--config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let soliton = match file.soliton {
            None => presets::two_soliton(),
            Some(Value::String(name)) => preset(&name)?,
            Some(v) => soliton_from_json(&v)?,
        };
        check_soliton(&soliton, "soliton configuration")?;
        let grid_text = ov.grid.clone().or(file.grid).unwrap_or_else(|| GridSpec::default().to_string());
        let grid = parse_grid(&grid_text, allow_slices)?;
        let h = ov.h.or(file.h).unwrap_or(StencilSpec::default().step);
        let stencil = StencilSpec::default().with_step(h);
        stencil.validate().map_err(|e| invalid(format!("--h: {e}")))?;
        if let Some(out) = &ov.out {
            check_output(out)?;
        }
        let local = file.local.unwrap_or_default();
        local.soliton()?;
        let nonlocal = file.nonlocal.unwrap_or_default();
        nonlocal.soliton()?;
        let trajectory = file.trajectory.unwrap_or_default();
        if trajectory.samples < 2 || !(trajectory.t_range[1] > trajectory.t_range[0]) || !trajectory.x0.is_finite() {
            return Err(invalid("trajectory: need samples >= 2, a finite x0 and t_range[1] > t_range[0]"));
        }
        let soliton_json = serde_json::to_value(&soliton)?;
        Ok(RunConfig {
            soliton,
            soliton_json,
            grid,
            stencil,
            out: ov.out.clone(),
            format: ov.format.or(file.format),
            system: ov.system.or(file.system).unwrap_or(System::All),
            quiet: ov.quiet,
            local,
            nonlocal,
            trajectory,
            sweep: file.sweep,
        })
    }
}
