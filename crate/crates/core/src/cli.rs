//! Configuration, scenario presets and output writers behind the binary.
//!
//! Settings resolve in three layers: the scenario preset, then `key = value`
//! lines from `--config`, then command-line flags. Every file written by a
//! verb is listed in its `manifest.json`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{assemble_1d, assemble_3d};
use crate::asymptotics::{density_profile, g_of_x, predict, steady_classical_state, MIN_VALID_TAU};
use crate::error::Error;
use crate::index::{MultiIndex, MAX_ORDER};
use crate::potential::{Combination, Potential3D, PotentialKind, PotentialModel};
use crate::sampling::{random_direction, random_state_1d, random_state_3d};
use crate::solver::{self, Boundary, Grid1D, SolverConfig, Trajectory};
use crate::spectral::{certify_1d, certify_3d, SpectralReport, SUPPORTED_3D_ORDERS};
use crate::state::{MomentState1D, MomentState3D};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("unknown configuration key '{key}' ({origin})")]
    UnknownKey { key: String, origin: String },

    #[error("invalid value for '{key}': {message}")]
    Invalid { key: String, message: String },

    #[error("{0}")]
    Model(#[from] Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{error} (partial output recorded in {manifest})")]
    Solver { error: Error, manifest: PathBuf },

    #[error("certification failure: {failed} of {total} records not hyperbolic (see {manifest})")]
    Certification { failed: usize, total: usize, manifest: PathBuf },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::UnknownKey { .. } | CliError::Invalid { .. } | CliError::Model(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Solver { .. } => 3,
            CliError::Certification { .. } => 4,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "qhd-moments", version, about = "Regularized moment systems of the Wigner equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the 1D system; writes trajectory.csv, diagnostics.csv and manifest.json.
    Run(Options),
    /// Write the assembled convection and source matrices as dense CSV.
    DumpSystem(Options),
    /// Certify the spectrum at seeded random states; writes eigen_report.jsonl.
    EigenReport(Options),
    /// Tabulate g(x) and the short-time predictions; writes asymptotics.csv.
    Asymptotics(Options),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::DumpSystem(_) => "dump-system",
            Command::EigenReport(_) => "eigen-report",
            Command::Asymptotics(_) => "asymptotics",
        }
    }

    fn options(&self) -> &Options {
        match self {
            Command::Run(o) | Command::DumpSystem(o) | Command::EigenReport(o) | Command::Asymptotics(o) => o,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// equilibrium | harmonic-classical | bump-tunneling | classical-steady
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<String>,
    #[arg(long)]
    pub cfl: Option<String>,
    #[arg(long)]
    pub t_end: Option<String>,
    #[arg(long)]
    pub hbar: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    /// `kind` or `kind:p1,p2,…`, e.g. `bump:1,1` or `harmonic:2`.
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub output_dir: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// periodic | zero-gradient
    #[arg(long)]
    pub boundary: Option<String>,
    /// 1 or 3 (dump-system, eigen-report).
    #[arg(long)]
    pub dimension: Option<String>,
    /// Any configuration key, `KEY=VALUE`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub set: Vec<String>,
}

impl Options {
    fn entries(&self) -> Result<Vec<Entry>, CliError> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: &Option<String>| {
            if let Some(v) = value {
                out.push(Entry::flag(key, v));
            }
        };
        push("scenario", &self.scenario);
        push("order", &self.order);
        push("cells", &self.cells);
        push("x_min", &self.x_min);
        push("x_max", &self.x_max);
        push("cfl", &self.cfl);
        push("t_end", &self.t_end);
        push("hbar", &self.hbar);
        push("tau", &self.tau);
        push("output_dir", &self.output_dir);
        push("seed", &self.seed);
        push("boundary", &self.boundary);
        push("dimension", &self.dimension);
        if let Some(p) = &self.potential {
            let (kind, params) = p.split_once(':').unwrap_or((p.as_str(), ""));
            out.push(Entry::flag("potential.kind", kind));
            out.push(Entry::flag("potential.params", params));
        }
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| invalid("--set", format!("expected KEY=VALUE, got '{s}'")))?;
            out.push(Entry::flag(k.trim(), v.trim()));
        }
        Ok(out)
    }
}

/// One `key = value` assignment and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub origin: String,
}

impl Entry {
    fn flag(key: &str, value: &str) -> Self {
        Entry {
            key: key.to_string(),
            value: value.to_string(),
            origin: "command line".to_string(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "scenario",
    "order",
    "cells",
    "x_min",
    "x_max",
    "cfl",
    "t_end",
    "hbar",
    "tau",
    "boundary",
    "seed",
    "output_dir",
    "output_stride",
    "initial",
    "dimension",
    "regularized",
    "potential.kind",
    "potential.params",
    "state.rho",
    "state.u",
    "state.pressure",
    "state.coeffs",
    "state.x",
    "report.orders",
    "report.samples",
    "report.directions",
    "asymptotics.times",
    "asymptotics.points",
];

/// Parse `key = value` lines; `#` starts a comment. Unknown and repeated keys are errors.
pub fn parse_config_text(text: &str, path: &str) -> Result<Vec<Entry>, CliError> {
    let mut out: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| CliError::Parse {
            path: path.to_string(),
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Parse {
                path: path.to_string(),
                line,
                message: "empty key".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(CliError::UnknownKey {
                key: key.to_string(),
                origin: format!("{path}:{line}"),
            });
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(CliError::Parse {
                path: path.to_string(),
                line,
                message: format!("'{key}' already set at {}", prev.origin),
            });
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            origin: format!("{path}:{line}"),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Uniform state, no potential, periodic box.
    Equilibrium,
    /// Classical steady state in `V = ½x²`, where `V‴ = 0` removes the quantum terms.
    HarmonicClassical,
    /// Classical steady state in the bump potential evolved with `ħ = 1`.
    BumpTunneling,
    /// Classical steady state in the bump potential with `ħ = 0`.
    ClassicalSteady,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Equilibrium,
        Scenario::HarmonicClassical,
        Scenario::BumpTunneling,
        Scenario::ClassicalSteady,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Equilibrium => "equilibrium",
            Scenario::HarmonicClassical => "harmonic-classical",
            Scenario::BumpTunneling => "bump-tunneling",
            Scenario::ClassicalSteady => "classical-steady",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scenario '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// How the run is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    /// Every cell holds the `state.*` values.
    Uniform,
    /// `ρ = P = e^{−V}`, `u = 0`, `f_n = 0`.
    Steady,
}

impl Initial {
    fn name(&self) -> &'static str {
        match self {
            Initial::Uniform => "uniform",
            Initial::Steady => "steady",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: Scenario,
    pub order: usize,
    pub cells: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub hbar: f64,
    pub tau: f64,
    pub boundary: Boundary,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub output_stride: usize,
    pub initial: Initial,
    pub dimension: usize,
    pub regularized: bool,
    pub potential_kind: String,
    pub potential_params: Vec<f64>,
    pub state_rho: f64,
    pub state_u: f64,
    pub state_pressure: f64,
    pub state_coeffs: Vec<f64>,
    pub state_x: f64,
    pub report_orders: Vec<usize>,
    pub report_samples: usize,
    pub report_directions: usize,
    pub asymptotics_times: Vec<f64>,
    pub asymptotics_points: usize,
}

impl Settings {
    pub fn preset(scenario: Scenario) -> Self {
        let mut s = Settings {
            scenario,
            order: 3,
            cells: 200,
            x_min: -2.0,
            x_max: 2.0,
            cfl: 0.45,
            t_end: 1.0,
            hbar: 0.0,
            tau: f64::INFINITY,
            boundary: Boundary::ZeroGradient,
            seed: 0,
            output_dir: PathBuf::from("output"),
            output_stride: 1,
            initial: Initial::Steady,
            dimension: 1,
            regularized: true,
            potential_kind: "bump".into(),
            potential_params: vec![1.0, 1.0],
            state_rho: 1.0,
            state_u: 0.0,
            state_pressure: 1.0,
            state_coeffs: vec![],
            state_x: 0.0,
            report_orders: vec![3, 4, 5, 6],
            report_samples: 10,
            report_directions: 1,
            asymptotics_times: vec![2.5e-3, 5e-3, 0.05],
            asymptotics_points: 401,
        };
        match scenario {
            Scenario::Equilibrium => {
                s.cells = 100;
                s.x_min = -1.0;
                s.x_max = 1.0;
                s.boundary = Boundary::Periodic;
                s.initial = Initial::Uniform;
                s.potential_kind = "zero".into();
                s.potential_params = vec![];
            }
            Scenario::HarmonicClassical => {
                s.hbar = 1.0;
                s.t_end = 0.5;
                s.potential_kind = "harmonic".into();
                s.potential_params = vec![1.0, 0.0];
            }
            Scenario::BumpTunneling => {
                s.hbar = 1.0;
                s.tau = 1e6;
                s.t_end = 0.05;
            }
            Scenario::ClassicalSteady => {}
        }
        s
    }

    /// Preset of the last `scenario` entry, then every other entry in order.
    pub fn resolve(entries: &[Entry]) -> Result<Self, CliError> {
        for e in entries {
            if !KEYS.contains(&e.key.as_str()) {
                return Err(CliError::UnknownKey {
                    key: e.key.clone(),
                    origin: e.origin.clone(),
                });
            }
        }
        let scenario = match entries.iter().rev().find(|e| e.key == "scenario") {
            Some(e) => e.value.parse().map_err(|m| invalid("scenario", m))?,
            None => Scenario::Equilibrium,
        };
        let mut s = Settings::preset(scenario);
        // a new kind without parameters takes that kind's defaults
        if entries.iter().any(|e| e.key == "potential.kind") && !entries.iter().any(|e| e.key == "potential.params") {
            s.potential_params.clear();
        }
        for e in entries.iter().filter(|e| e.key != "scenario") {
            s.apply(&e.key, &e.value)?;
        }
        s.check()?;
        Ok(s)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| invalid(key, format!("'{value}': {e}")))
        }
        fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(|v| num(key, v))
                .collect()
        }
        match key {
            "order" => {
                self.order = num(key, value)?;
                if !(3..=MAX_ORDER).contains(&self.order) {
                    return Err(invalid(key, format!("must lie in 3..={MAX_ORDER}, got {}", self.order)));
                }
            }
            "cells" => self.cells = num(key, value)?,
            "x_min" => self.x_min = num(key, value)?,
            "x_max" => self.x_max = num(key, value)?,
            "cfl" => {
                self.cfl = num(key, value)?;
                if !(self.cfl > 0.0 && self.cfl < 1.0) {
                    return Err(invalid(key, format!("must lie in (0, 1), got {}", self.cfl)));
                }
            }
            "t_end" => self.t_end = num(key, value)?,
            "hbar" => self.hbar = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "boundary" => self.boundary = value.parse().map_err(|e: Error| invalid(key, e.to_string()))?,
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "output_stride" => self.output_stride = num(key, value)?,
            "initial" => {
                self.initial = match value {
                    "uniform" => Initial::Uniform,
                    "steady" => Initial::Steady,
                    _ => return Err(invalid(key, format!("expected uniform or steady, got '{value}'"))),
                }
            }
            "dimension" => {
                self.dimension = num(key, value)?;
                if self.dimension != 1 && self.dimension != 3 {
                    return Err(invalid(key, format!("must be 1 or 3, got {}", self.dimension)));
                }
            }
            "regularized" => self.regularized = num(key, value)?,
            "potential.kind" => self.potential_kind = value.to_string(),
            "potential.params" => self.potential_params = list(key, value)?,
            "state.rho" => self.state_rho = num(key, value)?,
            "state.u" => self.state_u = num(key, value)?,
            "state.pressure" => self.state_pressure = num(key, value)?,
            "state.coeffs" => self.state_coeffs = list(key, value)?,
            "state.x" => self.state_x = num(key, value)?,
            "report.orders" => {
                self.report_orders = if let Some((a, b)) = value.split_once("..") {
                    let (a, b): (usize, usize) = (num(key, a.trim())?, num(key, b.trim())?);
                    (a..=b).collect()
                } else {
                    list(key, value)?
                };
                if self.report_orders.is_empty() || self.report_orders.iter().any(|m| !(3..=MAX_ORDER).contains(m)) {
                    return Err(invalid(key, format!("orders must be non-empty and lie in 3..={MAX_ORDER}")));
                }
            }
            "report.samples" => self.report_samples = num(key, value)?,
            "report.directions" => self.report_directions = num(key, value)?,
            "asymptotics.times" => {
                self.asymptotics_times = list(key, value)?;
                if self.asymptotics_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    return Err(invalid(key, "times must be finite and non-negative"));
                }
            }
            "asymptotics.points" => self.asymptotics_points = num(key, value)?,
            other => {
                return Err(CliError::UnknownKey {
                    key: other.to_string(),
                    origin: "settings".into(),
                })
            }
        }
        Ok(())
    }

    fn check(&self) -> Result<(), CliError> {
        Grid1D::new(self.x_min, self.x_max, self.cells, self.boundary).map_err(|e| invalid("cells", e.to_string()))?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if !(self.hbar >= 0.0 && self.hbar.is_finite()) {
            return Err(invalid("hbar", format!("must be non-negative, got {}", self.hbar)));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if self.output_stride == 0 {
            return Err(invalid("output_stride", "must be positive"));
        }
        if self.report_directions == 0 {
            return Err(invalid("report.directions", "must be positive"));
        }
        if self.asymptotics_points < 2 {
            return Err(invalid("asymptotics.points", "need at least 2 points"));
        }
        self.potential()?;
        Ok(())
    }

    pub fn potential(&self) -> Result<PotentialModel, CliError> {
        PotentialKind::from_name(&self.potential_kind, &self.potential_params)
            .map(PotentialModel::new)
            .map_err(|e| invalid("potential.kind", e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.x_min, self.x_max, self.cells, self.boundary)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let mut c = SolverConfig::new(self.order, self.potential()?);
        c.cfl = self.cfl;
        c.t_end = self.t_end;
        c.hbar = self.hbar;
        c.tau = self.tau;
        c.output_stride = self.output_stride;
        c.validate()?;
        Ok(c)
    }

    /// The `state.*` values at order `M`; missing coefficients are zero.
    pub fn inline_state(&self) -> Result<MomentState1D, CliError> {
        let n = self.order - 2;
        if self.state_coeffs.len() > n {
            return Err(invalid(
                "state.coeffs",
                format!("order {} takes at most {n} coefficients, got {}", self.order, self.state_coeffs.len()),
            ));
        }
        let mut coeffs = self.state_coeffs.clone();
        coeffs.resize(n, 0.0);
        let s = MomentState1D::new(self.order, self.state_rho, self.state_u, 0.5 * self.state_pressure, coeffs)?;
        s.validate()?;
        Ok(s)
    }

    pub fn initial_field(&self) -> Result<Vec<MomentState1D>, CliError> {
        let grid = self.grid()?;
        let v = self.potential()?;
        Ok(match self.initial {
            Initial::Uniform => {
                let s = self.inline_state()?;
                solver::field_from(&grid, |_| Ok(s.clone()))?
            }
            Initial::Steady => solver::field_from(&grid, |x| {
                let s = steady_classical_state(&v, x);
                MomentState1D::new(self.order, s.rho, s.u, 0.5 * s.pressure, vec![0.0; self.order - 2])
            })?,
        })
    }

    /// Resolved settings as strings, for the manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("scenario", self.scenario.name().into());
        put("order", self.order.to_string());
        put("cells", self.cells.to_string());
        put("x_min", self.x_min.to_string());
        put("x_max", self.x_max.to_string());
        put("cfl", self.cfl.to_string());
        put("t_end", self.t_end.to_string());
        put("hbar", self.hbar.to_string());
        put("tau", self.tau.to_string());
        put("boundary", self.boundary.name().into());
        put("seed", self.seed.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("output_stride", self.output_stride.to_string());
        put("initial", self.initial.name().into());
        put("dimension", self.dimension.to_string());
        put("regularized", self.regularized.to_string());
        put("potential.kind", self.potential_kind.clone());
        put("potential.params", join(&self.potential_params));
        put("state.rho", self.state_rho.to_string());
        put("state.u", self.state_u.to_string());
        put("state.pressure", self.state_pressure.to_string());
        put("state.coeffs", join(&self.state_coeffs));
        put("state.x", self.state_x.to_string());
        put(
            "report.orders",
            self.report_orders.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
        );
        put("report.samples", self.report_samples.to_string());
        put("report.directions", self.report_directions.to_string());
        put("asymptotics.times", join(&self.asymptotics_times));
        put("asymptotics.points", self.asymptotics_points.to_string());
        m
    }
}

/// File entries (when `--config` is given) followed by flag entries.
pub fn load_settings(options: &Options) -> Result<Settings, CliError> {
    let mut entries = Vec::new();
    if let Some(path) = &options.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        entries = parse_config_text(&text, &path.display().to_string())?;
    }
    entries.extend(options.entries()?);
    Settings::resolve(&entries)
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub kind: String,
    pub message: String,
    pub time: Option<f64>,
    pub cell: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub verb: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<PathBuf>,
    pub failure: Option<FailureRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Collects written files so the manifest lists exactly what exists.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.written.push(path);
        Ok(())
    }

    fn finish(
        self,
        verb: &str,
        settings: &Settings,
        started: f64,
        failure: Option<FailureRecord>,
    ) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            verb: verb.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: settings.echo(),
            started_unix_s: started,
            finished_unix_s: unix_now(),
            outputs: self.written,
            failure,
        };
        let path = self.dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Full-precision scientific notation, 17 significant digits.
pub fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let row: Vec<String> = values.into_iter().map(fmt_value).collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

/// Columns `t, x, rho, u, P, f3, …, fM`, one row per recorded time and cell.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,");
    out.push_str(&MomentState1D::record_names(traj.order).join(","));
    out.push('\n');
    let xs = traj.grid.centers();
    for (t, field) in traj.times.iter().zip(&traj.fields) {
        for (x, s) in xs.iter().zip(field) {
            csv_row(&mut out, [*t, *x].into_iter().chain(s.record().into_iter().map(|(_, v)| v)));
        }
    }
    out
}

pub fn diagnostics_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,mass,momentum,energy,momentum_residual,energy_residual,forcing,power\n");
    for d in &traj.diagnostics {
        csv_row(
            &mut out,
            [d.t, d.mass, d.momentum, d.energy, d.momentum_residual, d.energy_residual, d.forcing, d.power],
        );
    }
    out
}

/// Dense matrix with a header row naming the unknowns.
pub fn matrix_csv(m: &DMatrix<f64>, names: &[String]) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        csv_row(&mut out, m.row(i).iter().copied());
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenRecord {
    pub dimension: usize,
    pub sample: usize,
    pub direction: Option<[f64; 3]>,
    pub state: Vec<f64>,
    #[serde(flatten)]
    pub report: SpectralReport,
}

/// Seeded reports for every order in `report.orders`.
pub fn eigen_records(settings: &Settings) -> Result<Vec<EigenRecord>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut out = Vec::new();
    for &order in &settings.report_orders {
        for sample in 0..settings.report_samples {
            if settings.dimension == 1 {
                let s = random_state_1d(&mut rng, order)?;
                let sys = assemble_1d(&s, &vec![0.0; order + 1], f64::INFINITY, 0.0, settings.regularized)?;
                out.push(EigenRecord {
                    dimension: 1,
                    sample,
                    direction: None,
                    state: s.to_vector().iter().copied().collect(),
                    report: certify_1d(&sys, &s)?,
                });
            } else {
                if !SUPPORTED_3D_ORDERS.contains(&order) {
                    return Err(invalid(
                        "report.orders",
                        format!("3D reports support orders {SUPPORTED_3D_ORDERS:?}, got {order}"),
                    ));
                }
                let s = random_state_3d(&mut rng, order)?;
                let sys = assemble_3d(&s, &Potential3D::zero(), [0.0; 3], f64::INFINITY, 0.0, settings.regularized)?;
                for _ in 0..settings.report_directions {
                    let n = random_direction(&mut rng);
                    out.push(EigenRecord {
                        dimension: 3,
                        sample,
                        direction: Some(n),
                        state: s.to_vector().iter().copied().collect(),
                        report: certify_3d(&sys, &s, n)?,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Columns `x, g, density_profile`, then `rho, u, P, f3` at each requested time.
pub fn asymptotics_csv(settings: &Settings) -> Result<String, CliError> {
    if settings.tau < MIN_VALID_TAU {
        return Err(invalid(
            "tau",
            format!("the collisionless expansion needs tau >= {MIN_VALID_TAU:e}, got {}", settings.tau),
        ));
    }
    let v = settings.potential()?;
    let mut out = String::from("x,g,density_profile");
    for t in &settings.asymptotics_times {
        for name in ["rho", "u", "P", "f3"] {
            let _ = write!(out, ",{name}@{t}");
        }
    }
    out.push('\n');
    let n = settings.asymptotics_points;
    let dx = (settings.x_max - settings.x_min) / (n - 1) as f64;
    for k in 0..n {
        let x = settings.x_min + k as f64 * dx;
        let mut row = vec![x, g_of_x(&v, x)?, density_profile(&v, x)?];
        for &t in &settings.asymptotics_times {
            let p = predict(&v, x, t, settings.hbar)?;
            row.extend([p.rho, p.u, p.pressure, p.f3]);
        }
        csv_row(&mut out, row);
    }
    Ok(out)
}

/// Outcome of a successful verb.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: PathBuf,
    pub outputs: Vec<PathBuf>,
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    let started = unix_now();
    let settings = load_settings(command.options())?;
    let verb = command.name();
    match command {
        Command::Run(_) => {
            let config = settings.solver_config()?;
            let grid = settings.grid()?;
            let initial = settings.initial_field()?;
            let mut out = Outputs::new(&settings.output_dir)?;
            let (traj, failure) = match solver::run(&config, &grid, initial) {
                Ok(t) => (t, None),
                Err(f) => (*f.partial, Some(f.error)),
            };
            out.write("trajectory.csv", &trajectory_csv(&traj))?;
            out.write("diagnostics.csv", &diagnostics_csv(&traj))?;
            let outputs = out.written.clone();
            let record = failure.as_ref().map(|e| {
                let (time, cell) = match e {
                    Error::Solver { time, cell, .. } => (Some(*time), *cell),
                    _ => (traj.times.last().copied(), None),
                };
                FailureRecord {
                    kind: "solver".into(),
                    message: e.to_string(),
                    time,
                    cell,
                }
            });
            let manifest = out.finish(verb, &settings, started, record)?;
            match failure {
                Some(error) => Err(CliError::Solver { error, manifest }),
                None => Ok(Outcome { manifest, outputs }),
            }
        }
        Command::DumpSystem(_) => {
            let v = settings.potential()?;
            let mut out = Outputs::new(&settings.output_dir)?;
            if settings.dimension == 1 {
                let s = settings.inline_state()?;
                let jet = v.jet(settings.order, settings.state_x)?;
                let sys = assemble_1d(&s, &jet, settings.tau, settings.hbar, settings.regularized)?;
                let names = MomentState1D::unknown_names(settings.order);
                out.write("A.csv", &matrix_csv(&sys.a, &names))?;
                out.write("G.csv", &matrix_csv(&sys.g, &names))?;
            } else {
                let s = settings.inline_state_3d()?;
                let pot = Potential3D::new([v, PotentialModel::zero(), PotentialModel::zero()], Combination::Sum);
                let sys = assemble_3d(&s, &pot, [settings.state_x, 0.0, 0.0], settings.tau, settings.hbar, settings.regularized)?;
                let names = MomentState3D::unknown_names(settings.order)?;
                for (k, m) in sys.mhat.iter().enumerate() {
                    out.write(&format!("M{}.csv", k + 1), &matrix_csv(m, &names))?;
                }
                out.write("G.csv", &matrix_csv(&sys.g, &names))?;
            }
            let outputs = out.written.clone();
            let manifest = out.finish(verb, &settings, started, None)?;
            Ok(Outcome { manifest, outputs })
        }
        Command::EigenReport(_) => {
            let records = eigen_records(&settings)?;
            let mut text = String::new();
            for r in &records {
                text.push_str(&serde_json::to_string(r).expect("record serializes"));
                text.push('\n');
            }
            let failed = records.iter().filter(|r| !r.report.hyperbolic).count();
            let mut out = Outputs::new(&settings.output_dir)?;
            out.write("eigen_report.jsonl", &text)?;
            let outputs = out.written.clone();
            let record = (failed > 0).then(|| FailureRecord {
                kind: "certification".into(),
                message: format!("{failed} of {} records not hyperbolic", records.len()),
                time: None,
                cell: None,
            });
            let manifest = out.finish(verb, &settings, started, record)?;
            if failed > 0 {
                return Err(CliError::Certification {
                    failed,
                    total: records.len(),
                    manifest,
                });
            }
            Ok(Outcome { manifest, outputs })
        }
        Command::Asymptotics(_) => {
            let text = asymptotics_csv(&settings)?;
            let mut out = Outputs::new(&settings.output_dir)?;
            out.write("asymptotics.csv", &text)?;
            let outputs = out.written.clone();
            let manifest = out.finish(verb, &settings, started, None)?;
            Ok(Outcome { manifest, outputs })
        }
    }
}

impl Settings {
    /// Isotropic pressure `state.pressure`, velocity `(state.u, 0, 0)` and
    /// `state.coeffs` placed on `f_{n e₁}`, `n = 3, …`.
    pub fn inline_state_3d(&self) -> Result<MomentState3D, CliError> {
        let p = self.state_pressure;
        let mut s = MomentState3D::new(
            self.order,
            self.state_rho,
            [self.state_u, 0.0, 0.0],
            [[p, 0.0, 0.0], [0.0, p, 0.0], [0.0, 0.0, p]],
        )?;
        if self.state_coeffs.len() > self.order - 2 {
            return Err(invalid("state.coeffs", format!("order {} takes at most {} coefficients", self.order, self.order - 2)));
        }
        for (k, c) in self.state_coeffs.iter().enumerate() {
            s.set_coeff(MultiIndex::axis(0, k + 3), *c)?;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parse arguments, run the verb and report; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            println!("wrote {}", outcome.manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, &str)]) -> Vec<Entry> {
        pairs.iter().map(|(k, v)| Entry::flag(k, v)).collect()
    }

    #[test]
    fn presets_resolve() {
        for sc in Scenario::ALL {
            let s = Settings::resolve(&entries(&[("scenario", sc.name())])).unwrap();
            assert_eq!(s.scenario, sc);
            s.solver_config().unwrap();
            s.initial_field().unwrap();
        }
        let s = Settings::resolve(&entries(&[
            ("scenario", "bump-tunneling"),
            ("order", "3"),
            ("cells", "200"),
            ("t_end", "0.05"),
            ("hbar", "1"),
            ("tau", "1e6"),
        ]))
        .unwrap();
        assert_eq!((s.cells, s.tau, s.boundary), (200, 1e6, Boundary::ZeroGradient));
    }

    #[test]
    fn validation_names_the_key() {
        let key_of = |pairs: &[(&str, &str)]| match Settings::resolve(&entries(pairs)) {
            Err(CliError::Invalid { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(key_of(&[("order", "2")]), "order");
        assert_eq!(key_of(&[("cfl", "1.5")]), "cfl");
        assert_eq!(key_of(&[("cells", "3")]), "cells");
        assert_eq!(key_of(&[("tau", "-1")]), "tau");
        assert_eq!(key_of(&[("scenario", "nope")]), "scenario");
        assert_eq!(key_of(&[("potential.kind", "quartic")]), "potential.kind");
        assert!(matches!(
            Settings::resolve(&entries(&[("order", "x"), ("cfl", "0.5")])),
            Err(CliError::Invalid { .. })
        ));
    }

    #[test]
    fn config_text_parsing() {
        let text = "# comment\nscenario = bump-tunneling\n\npotential.kind = bump # trailing\npotential.params = 1, 1\n";
        let e = parse_config_text(text, "f.cfg").unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[2].value, "1, 1");
        assert_eq!(e[1].origin, "f.cfg:4");

        match parse_config_text("order = 3\nbogus line\n", "f.cfg") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_config_text("order = 3\n\nmystery = 1\n", "f.cfg") {
            Err(CliError::UnknownKey { key, origin }) => {
                assert_eq!(key, "mystery");
                assert_eq!(origin, "f.cfg:3");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config_text("order = 3\norder = 4\n", "f.cfg"),
            Err(CliError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn flags_override_file_and_kind_resets_params() {
        let mut e = parse_config_text("scenario = harmonic-classical\norder = 4\n", "f").unwrap();
        e.extend(entries(&[("order", "5"), ("potential.kind", "bump")]));
        let s = Settings::resolve(&e).unwrap();
        assert_eq!(s.order, 5);
        assert_eq!(s.scenario, Scenario::HarmonicClassical);
        assert!(s.potential_params.is_empty());
        assert_eq!(s.potential().unwrap().kind(), &PotentialKind::Bump { amplitude: 1.0, width: 1.0 });
    }

    #[test]
    fn exit_codes() {
        assert_eq!(invalid("order", "x").exit_code(), 2);
        let solver = CliError::Solver {
            error: Error::Numerical("x".into()),
            manifest: PathBuf::new(),
        };
        assert_eq!(solver.exit_code(), 3);
        let cert = CliError::Certification {
            failed: 1,
            total: 2,
            manifest: PathBuf::new(),
        };
        assert_eq!(cert.exit_code(), 4);
    }

    #[test]
    fn value_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_value(x).parse::<f64>().unwrap(), x);
        }
    }
}
