//! Run configuration: one file (TOML or JSON) describes a complete run.

use std::path::{Path, PathBuf};

use kgwave::{
    CgOptions, LinearSolve, NewmarkParams, PacketShape, PotentialProfile, TrendSettings, WavePacket, WindowPolicy,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

/// Coefficient `a(x)` of the equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `a1` for `x < 0`, `a2` for `x > 0`.
    Step {
        #[serde(default)]
        a1: f64,
        #[serde(default = "default_a2")]
        a2: f64,
    },
    Constant {
        value: f64,
    },
    /// `height` on `[start, end]`, `outside` elsewhere.
    Barrier {
        #[serde(default)]
        outside: f64,
        height: f64,
        start: f64,
        end: f64,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

fn default_a2() -> f64 {
    150.0
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Step {
            a1: 0.0,
            a2: default_a2(),
        }
    }
}

impl PotentialConfig {
    pub fn profile(&self) -> kgwave::Result<PotentialProfile> {
        match self {
            PotentialConfig::Step { a1, a2 } => PotentialProfile::step(*a1, *a2),
            PotentialConfig::Constant { value } => PotentialProfile::constant(*value),
            PotentialConfig::Barrier {
                outside,
                height,
                start,
                end,
            } => PotentialProfile::barrier(*outside, *height, *start, *end),
            PotentialConfig::Piecewise { breakpoints, values } => {
                PotentialProfile::piecewise(breakpoints.clone(), values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Cg,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub rel_tolerance: f64,
    pub max_iterations: Option<usize>,
    pub jacobi: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let cg = CgOptions::default();
        Self {
            method: SolverMethod::Cg,
            rel_tolerance: cg.rel_tolerance,
            max_iterations: cg.max_iterations,
            jacobi: cg.jacobi,
        }
    }
}

impl SolverConfig {
    pub fn linear_solve(&self) -> LinearSolve {
        match self.method {
            SolverMethod::Direct => LinearSolve::Direct,
            SolverMethod::Cg => LinearSolve::ConjugateGradient(CgOptions {
                rel_tolerance: self.rel_tolerance,
                max_iterations: self.max_iterations,
                jacobi: self.jacobi,
            }),
        }
    }
}

/// Initial packet; its propagation speed is the run's `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub shape: PacketShape,
}

impl Default for PacketConfig {
    fn default() -> Self {
        let p = WavePacket::default();
        Self {
            amplitude: p.amplitude,
            center: p.center,
            width: p.width,
            shape: p.shape,
        }
    }
}

/// How `f` and `g` are turned into nodal coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    #[default]
    Interpolate,
    L2Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Wave speed.
    pub c: f64,
    pub potential: PotentialConfig,
    /// The domain is `[-half_length, half_length]`.
    pub half_length: f64,
    /// Number of elements; must be even so that `x = 0` is a node.
    pub n_cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub beta: f64,
    pub gamma: f64,
    pub solver: SolverConfig,
    pub packet: PacketConfig,
    pub initial_data: InitialData,
    /// Record observables every `stride` steps (and at the last step).
    pub stride: usize,
    pub trend: TrendSettings,
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,
    /// Free-form tag copied into the manifest.
    pub seed_label: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            potential: PotentialConfig::default(),
            half_length: 60.0,
            n_cells: 2400,
            dt: 0.01,
            t_end: 15.0,
            beta: 0.25,
            gamma: 0.5,
            solver: SolverConfig::default(),
            packet: PacketConfig::default(),
            initial_data: InitialData::default(),
            stride: 10,
            trend: TrendSettings::default(),
            snapshot_times: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed_label: String::new(),
        }
    }
}

/// Problem found while checking a config, tied to the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub reason: String,
}

fn issue(key: &str, reason: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn from_core(err: kgwave::Error, fallback_key: &str) -> ConfigIssue {
    match &err {
        kgwave::Error::InvalidParameter { name, reason } => issue(name, reason.clone()),
        _ => issue(fallback_key, err.to_string()),
    }
}

impl RunConfig {
    /// Number of time steps, `t_end / dt`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n_cells as f64
    }

    pub fn wave_packet(&self) -> WavePacket {
        WavePacket {
            amplitude: self.packet.amplitude,
            center: self.packet.center,
            width: self.packet.width,
            wave_speed: self.c,
            shape: self.packet.shape,
        }
    }

    pub fn newmark_params(&self) -> kgwave::Result<NewmarkParams> {
        NewmarkParams::with_coefficients(self.beta, self.gamma, self.dt, self.n_steps())
    }

    /// Step index of every configured snapshot time.
    pub fn snapshot_steps(&self) -> Vec<(f64, usize)> {
        self.snapshot_times
            .iter()
            .map(|&t| (t, (t / self.dt).round() as usize))
            .collect()
    }

    /// Checks every constraint that can be checked without running.
    pub fn check(&self) -> Result<(), ConfigIssue> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(issue("c", format!("must be positive, got {}", self.c)));
        }
        if !(self.half_length.is_finite() && self.half_length > 0.0) {
            return Err(issue(
                "half_length",
                format!("must be positive, got {}", self.half_length),
            ));
        }
        if self.n_cells < 2 || !self.n_cells.is_multiple_of(2) {
            return Err(issue(
                "n_cells",
                format!("must be even and at least 2, got {}", self.n_cells),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(issue("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(issue("t_end", format!("must be positive, got {}", self.t_end)));
        }
        let n = self.n_steps();
        let mismatch = (n as f64 * self.dt - self.t_end).abs();
        if n == 0 || mismatch > ulp(self.t_end) {
            return Err(issue(
                "t_end",
                format!(
                    "must be an integer multiple of dt = {}: {} steps reach t = {}",
                    self.dt,
                    n,
                    n as f64 * self.dt
                ),
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(issue(
                "beta",
                format!("must be finite and nonnegative, got {}", self.beta),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(issue(
                "gamma",
                format!("must be finite and nonnegative, got {}", self.gamma),
            ));
        }
        if self.stride == 0 {
            return Err(issue("stride", "must be at least 1"));
        }
        if let LinearSolve::ConjugateGradient(opts) = self.solver.linear_solve() {
            opts.validate().map_err(|e| from_core(e, "solver"))?;
        }
        self.wave_packet().validate().map_err(|e| from_core(e, "packet"))?;

        let profile = self.potential.profile().map_err(|e| from_core(e, "potential"))?;
        let h = self.spacing();
        for &b in profile.breakpoints() {
            let snapped = (b / h).round() * h;
            if b.abs() > self.half_length || (snapped - b).abs() > 1e-9 * h {
                return Err(issue(
                    potential_key(&self.potential),
                    format!(
                        "breakpoint {b} is not a mesh node (h = {h}, domain half-length {})",
                        self.half_length
                    ),
                ));
            }
        }

        for &t in &self.snapshot_times {
            let k = (t / self.dt).round();
            if !(t >= 0.0 && t <= self.t_end) || (k * self.dt - t).abs() > 1e-9 * self.dt {
                return Err(issue(
                    "snapshot_times",
                    format!("{t} is not a time step in [0, {}] with dt = {}", self.t_end, self.dt),
                ));
            }
        }

        if let Some(bw) = self.trend.smoothing.bandwidth {
            if !(bw.is_finite() && bw > 0.0) {
                return Err(issue("bandwidth", format!("must be positive, got {bw}")));
            }
        }
        match self.trend.window {
            WindowPolicy::Auto { settle_tolerance } => {
                if !(settle_tolerance.is_finite() && settle_tolerance > 0.0) {
                    return Err(issue(
                        "settle_tolerance",
                        format!("must be positive, got {settle_tolerance}"),
                    ));
                }
            }
            WindowPolicy::Fixed { t_lo, t_hi } => {
                if !(t_lo < t_hi) {
                    return Err(issue("t_lo", format!("need t_lo < t_hi, got [{t_lo}, {t_hi}]")));
                }
            }
        }
        Ok(())
    }

    /// [`check`](Self::check) with the issue turned into a harness error.
    pub fn validate(&self) -> HarnessResult<()> {
        self.check()
            .map_err(|i| HarnessError::Config(format!("`{}`: {}", i.key, i.reason)))
    }
}

fn potential_key(p: &PotentialConfig) -> &'static str {
    match p {
        PotentialConfig::Barrier { .. } => "start",
        PotentialConfig::Piecewise { .. } => "breakpoints",
        _ => "potential",
    }
}

/// Spacing between `x` and the next representable double.
fn ulp(x: f64) -> f64 {
    let x = x.abs();
    f64::from_bits(x.to_bits() + 1) - x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        }
    }
}

/// 1-based line of the first assignment to `key` in a TOML or JSON text.
pub fn locate_key(source: &str, key: &str) -> Option<usize> {
    source
        .lines()
        .position(|line| {
            let s = line.trim_start();
            let s = s.strip_prefix('"').unwrap_or(s);
            match s.strip_prefix(key) {
                Some(rest) => {
                    let rest = rest.strip_prefix('"').unwrap_or(rest).trim_start();
                    rest.starts_with('=') || rest.starts_with(':')
                }
                None => false,
            }
        })
        .map(|i| i + 1)
}

/// Parses and validates config text. A manifest written by `simulate`
/// is accepted too; its embedded config is used.
pub fn parse_config(source: &str, format: ConfigFormat, origin: &str) -> HarnessResult<RunConfig> {
    let config: RunConfig = match format {
        ConfigFormat::Toml => toml::from_str(source).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?,
        ConfigFormat::Json => {
            let value: serde_json::Value = serde_json::from_str(source)
                .map_err(|e| HarnessError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
            let value = match value.get("config") {
                Some(inner) if value.get("files").is_some() => inner.clone(),
                _ => value,
            };
            serde_json::from_value(value).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?
        }
    };
    config.check().map_err(|i| {
        let at = locate_key(source, &i.key)
            .map(|line| format!("{origin}:{line}"))
            .unwrap_or_else(|| origin.to_string());
        HarnessError::Config(format!("{at}: `{}`: {}", i.key, i.reason))
    })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> HarnessResult<RunConfig> {
    let source = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
    parse_config(&source, ConfigFormat::from_path(path), &path.display().to_string())
}
