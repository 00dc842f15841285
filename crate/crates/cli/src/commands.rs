//! The harness operations behind each subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kgwave::{
    dalembert_solution, propagate_constant_potential, relative_l2_error, FourierGrid, Mesh1D, SymTridiagonal,
    TrendReport, TrendSettings, WavePacket,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PotentialConfig, RunConfig};
use crate::error::{HarnessError, HarnessResult};
use crate::output::{
    ensure_dir, fmt_f64, read_observables, snapshot_file_name, sweep_run_dir, write_csv, write_json, write_observables,
    write_snapshot, FileEntry, RunManifest, RunStatus, MANIFEST_FILE, OBSERVABLES_FILE, PLOT_SCRIPT, TREND_FILE,
};
use crate::run::{execute, RunOutcome};

/// Result of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulationArtifacts {
    pub dir: PathBuf,
    pub outcome: RunOutcome,
    pub trend: Option<TrendReport>,
    pub manifest: RunManifest,
}

/// Runs `config` and writes observables, snapshots, the trend report and
/// the manifest into `config.output_dir`.
///
/// A solver failure still writes everything recorded up to the failing
/// step, marks the manifest partial, and then returns the error.
pub fn simulate(config: &RunConfig, plot_script: bool) -> HarnessResult<SimulationArtifacts> {
    config.validate()?;
    let started = Instant::now();
    let outcome = execute(config)?;
    let duration = started.elapsed().as_secs_f64();

    let dir = config.output_dir.clone();
    ensure_dir(&dir)?;
    let mut names = vec![OBSERVABLES_FILE.to_string()];
    write_observables(&dir.join(OBSERVABLES_FILE), &outcome.series)?;

    let x = kgwave::build_mesh(config.half_length, config.n_cells)?.nodes().to_vec();
    for snap in &outcome.snapshots {
        let name = snapshot_file_name(snap.t);
        write_snapshot(&dir.join(&name), &x, &snap.u)?;
        names.push(name);
    }

    let trend = if outcome.is_complete() {
        match outcome.trend(config) {
            Ok(report) => {
                write_json(&dir.join(TREND_FILE), &report)?;
                names.push(TREND_FILE.to_string());
                Some(report)
            }
            Err(e) => {
                log::warn!("trend analysis skipped: {e}");
                None
            }
        }
    } else {
        None
    };

    if plot_script {
        let name = "plot_observables.py";
        fs::write(dir.join(name), PLOT_SCRIPT).map_err(HarnessError::io(dir.join(name)))?;
        names.push(name.to_string());
    }

    let manifest = RunManifest {
        config: config.clone(),
        code_version: crate::output::code_version(),
        duration_seconds: duration,
        status: if outcome.is_complete() {
            RunStatus::Complete
        } else {
            RunStatus::Partial
        },
        failure: outcome.failure.as_ref().map(|e| e.to_string()),
        files: names
            .iter()
            .map(|n| FileEntry::of(&dir, n))
            .collect::<HarnessResult<_>>()?,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;

    if let Some(e) = &outcome.failure {
        return Err(HarnessError::Solver(e.clone()));
    }
    Ok(SimulationArtifacts {
        dir,
        outcome,
        trend,
        manifest,
    })
}

/// One line of the sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub a2: f64,
    pub report: Option<TrendReport>,
    pub error: Option<String>,
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "a2",
    "status",
    "A",
    "B",
    "r",
    "A1",
    "B1",
    "r1",
    "t0",
    "sigma_min",
    "t_sigma_min",
    "sigma_final",
    "mean_peak",
    "t_mean_peak",
    "impact_start",
    "window_lo",
    "window_hi",
];

impl SweepRow {
    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        match &self.report {
            Some(r) => vec![
                self.a2.to_string(),
                "ok".into(),
                fmt_f64(r.mean_fit.slope),
                fmt_f64(r.mean_fit.intercept),
                fmt_f64(r.mean_fit.r),
                fmt_f64(r.sigma_fit.slope),
                fmt_f64(r.sigma_fit.intercept),
                fmt_f64(r.sigma_fit.r),
                opt(r.t0),
                fmt_f64(r.sigma_min),
                fmt_f64(r.t_sigma_min),
                fmt_f64(r.sigma_final),
                fmt_f64(r.mean_peak),
                fmt_f64(r.t_mean_peak),
                opt(r.impact.departure),
                fmt_f64(r.impact.window.0),
                fmt_f64(r.impact.window.1),
            ],
            None => {
                let mut v = vec![self.a2.to_string(), "failed".into()];
                v.resize(SWEEP_COLUMNS.len(), String::new());
                v
            }
        }
    }
}

/// `base` with the step height replaced by `a2` (and `a1` kept when the
/// base is already a step).
pub fn with_step_height(base: &RunConfig, a2: f64) -> RunConfig {
    let a1 = match base.potential {
        PotentialConfig::Step { a1, .. } => a1,
        _ => 0.0,
    };
    RunConfig {
        potential: PotentialConfig::Step { a1, a2 },
        ..base.clone()
    }
}

/// Runs every `a2` in parallel, each in its own subdirectory when
/// `write` is set, and assembles `table.csv`. A failing run only marks
/// its own row.
pub fn sweep(base: &RunConfig, a2_list: &[f64], write: bool) -> HarnessResult<Vec<SweepRow>> {
    if a2_list.is_empty() {
        return Err(HarnessError::Config("`a2`: the sweep list is empty".into()));
    }
    base.validate()?;
    let rows: Vec<SweepRow> = a2_list
        .par_iter()
        .map(|&a2| {
            let mut cfg = with_step_height(base, a2);
            cfg.output_dir = sweep_run_dir(&base.output_dir, a2);
            let result = if write {
                simulate(&cfg, false).and_then(|a| {
                    a.trend
                        .ok_or_else(|| HarnessError::CheckFailed("trend analysis failed".into()))
                })
            } else {
                execute(&cfg).and_then(|o| match &o.failure {
                    Some(e) => Err(HarnessError::Solver(e.clone())),
                    None => o.trend(&cfg).map_err(HarnessError::from),
                })
            };
            match result {
                Ok(report) => SweepRow {
                    a2,
                    report: Some(report),
                    error: None,
                },
                Err(e) => {
                    log::error!("a2 = {a2}: {e}");
                    SweepRow {
                        a2,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    if write {
        ensure_dir(&base.output_dir)?;
        write_csv(
            &base.output_dir.join("table.csv"),
            &SWEEP_COLUMNS,
            rows.iter().map(SweepRow::cells),
        )?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Vary `dt` at fixed mesh.
    Time,
    /// Vary `h` at fixed `dt`.
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    /// `dt` or `h`.
    pub step: f64,
    pub error: f64,
    /// Order against the previous level.
    pub local_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub refinement: Refinement,
    pub t_end: f64,
    pub levels: Vec<ConvergenceLevel>,
    /// Least-squares slope of `ln error` against `ln step`.
    pub observed_order: f64,
}

fn constant_potential(config: &RunConfig) -> HarnessResult<f64> {
    config.potential.profile()?.as_constant().ok_or_else(|| {
        HarnessError::Config("`potential`: no oracle for step potential; use a constant or free potential".into())
    })
}

/// Exact constant-potential field at `t` on the mesh nodes.
pub fn fourier_reference(mesh: &Mesh1D, packet: &WavePacket, m_sq: f64, t: f64) -> HarnessResult<Vec<f64>> {
    let grid = FourierGrid::covering(mesh);
    let f = grid.sample(|x| packet.f(x));
    let g = grid.sample(|x| packet.g(x));
    let field = propagate_constant_potential(&grid, &f, Some(&g), m_sq, packet.wave_speed, t)?;
    Ok(grid.restrict_to_mesh(mesh, &field.u)?)
}

/// Free-wave field at `t` on the mesh nodes by d'Alembert's formula.
pub fn dalembert_reference(mesh: &Mesh1D, packet: &WavePacket, t: f64) -> Vec<f64> {
    mesh.nodes()
        .iter()
        .map(|&x| dalembert_solution(|s| packet.f(s), |s| packet.g(s), packet.wave_speed, t, x))
        .collect()
}

fn final_field_error(config: &RunConfig, m_sq: f64) -> HarnessResult<f64> {
    let outcome = execute(config)?;
    if let Some(e) = outcome.failure {
        return Err(HarnessError::Solver(e));
    }
    let state = outcome.final_state.expect("completed run has a final state");
    let mesh = kgwave::build_mesh(config.half_length, config.n_cells)?;
    let reference = fourier_reference(&mesh, &config.wave_packet(), m_sq, config.t_end)?;
    let mass = kgwave::assemble_mass(&mesh);
    Ok(relative_l2_error(&mass, &state.c, &reference)?)
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> kgwave::Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut order: Vec<usize> = (0..lx.len()).collect();
    order.sort_by(|&a, &b| lx[a].total_cmp(&lx[b]));
    let lx: Vec<f64> = order.iter().map(|&k| lx[k]).collect();
    let ly: Vec<f64> = order.iter().map(|&k| ly[k]).collect();
    Ok(kgwave::linear_fit(&lx, &ly, None)?.slope)
}

/// Final-time error against the Fourier oracle for each `dt` (time) or
/// `h` (space) in `steps`; the other discretization parameter comes from
/// `base`.
pub fn convergence(base: &RunConfig, refinement: Refinement, steps: &[f64]) -> HarnessResult<ConvergenceReport> {
    if steps.len() < 3 {
        return Err(HarnessError::Config(format!(
            "a convergence study needs at least 3 levels, got {}",
            steps.len()
        )));
    }
    let m_sq = constant_potential(base)?;
    let configs: Vec<RunConfig> = steps
        .iter()
        .map(|&s| {
            let mut cfg = base.clone();
            match refinement {
                Refinement::Time => cfg.dt = s,
                Refinement::Space => {
                    let cells = (2.0 * base.half_length / s).round();
                    if ((2.0 * base.half_length / cells) - s).abs() > 1e-12 * s {
                        return Err(HarnessError::Config(format!(
                            "`h`: {s} does not divide the domain length {}",
                            2.0 * base.half_length
                        )));
                    }
                    cfg.n_cells = cells as usize;
                }
            }
            cfg.stride = cfg.n_steps().max(1);
            cfg.snapshot_times.clear();
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<HarnessResult<_>>()?;

    let errors: Vec<f64> = configs
        .par_iter()
        .map(|cfg| final_field_error(cfg, m_sq))
        .collect::<HarnessResult<_>>()?;

    let levels = steps
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(k, (&step, &error))| ConvergenceLevel {
            step,
            error,
            local_order: (k > 0).then(|| (errors[k - 1] / error).ln() / (steps[k - 1] / step).ln()),
        })
        .collect();
    Ok(ConvergenceReport {
        refinement,
        t_end: base.t_end,
        levels,
        observed_order: log_log_slope(steps, &errors)?,
    })
}

pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> HarnessResult<()> {
    write_csv(
        path,
        &["step", "error", "local_order"],
        report.levels.iter().map(|l| {
            vec![
                fmt_f64(l.step),
                fmt_f64(l.error),
                l.local_order.map(fmt_f64).unwrap_or_default(),
            ]
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    DAlembert,
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub oracle: OracleKind,
    /// `(t, relative L² error)` at every recorded step.
    pub errors: Vec<(f64, f64)>,
    pub final_error: f64,
    pub max_error: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Discrepancy between the FEM field and the exact solution at every
/// recorded step: d'Alembert for a free run, the Fourier propagator for a
/// constant potential. Passes when the final-time error is within
/// `threshold`.
pub fn oracle_check(config: &RunConfig, threshold: f64) -> HarnessResult<OracleCheckReport> {
    config.validate()?;
    let m_sq = constant_potential(config)?;
    let oracle = if m_sq == 0.0 {
        OracleKind::DAlembert
    } else {
        OracleKind::Fourier
    };
    let run = crate::run::PreparedRun::new(config)?;
    let packet = config.wave_packet();
    let mass: &SymTridiagonal = &run.system.mass;
    let mut errors = Vec::new();
    let mut fields: Vec<(f64, Vec<f64>)> = Vec::new();
    let stride = config.stride;
    let n_steps = run.params.n_steps;
    let mut grab = |_: &kgwave::FemSystem, s: &kgwave::SolverState| -> kgwave::Result<()> {
        if s.step.is_multiple_of(stride) || s.step == n_steps {
            fields.push((s.t, s.c.clone()));
        }
        Ok(())
    };
    kgwave::run_simulation(
        &run.system,
        run.initial.clone(),
        &run.params,
        run.solve,
        1,
        &mut [&mut grab],
    )?;
    for (t, c) in &fields {
        let reference = match oracle {
            OracleKind::DAlembert => dalembert_reference(&run.system.mesh, &packet, *t),
            OracleKind::Fourier => fourier_reference(&run.system.mesh, &packet, m_sq, *t)?,
        };
        errors.push((*t, relative_l2_error(mass, c, &reference)?));
    }
    let final_error = errors.last().map(|e| e.1).unwrap_or(f64::NAN);
    let max_error = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(OracleCheckReport {
        oracle,
        errors,
        final_error,
        max_error,
        threshold,
        passed: final_error <= threshold,
    })
}

pub fn write_oracle_check(path: &Path, report: &OracleCheckReport) -> HarnessResult<()> {
    write_csv(
        path,
        &["t", "relative_l2_error"],
        report.errors.iter().map(|&(t, e)| vec![fmt_f64(t), fmt_f64(e)]),
    )
}

/// Re-analyzes an existing `observables.csv`.
pub fn retrend(observables: &Path, settings: &TrendSettings) -> HarnessResult<TrendReport> {
    let series = read_observables(observables)?;
    Ok(kgwave::analyze_trend(
        &series.times(),
        &series.means(),
        &series.sigmas(),
        settings,
    )?)
}
