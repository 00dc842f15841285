use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgwave::{Kernel, WindowPolicy};
use kgwave_cli::commands::{write_convergence, write_oracle_check};
use kgwave_cli::config::{InitialData, SolverMethod};
use kgwave_cli::output::{ensure_dir, write_json, RunManifest, MANIFEST_FILE, RETREND_FILE};
use kgwave_cli::{
    convergence, load_config, oracle_check, retrend, simulate, sweep, HarnessError, HarnessResult, PotentialConfig,
    Refinement, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "kgwave",
    version,
    about = "Klein-Gordon wave packet / potential step simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write observables, snapshots and a manifest.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write a matplotlib script for the observables.
        #[arg(long)]
        plot_script: bool,
    },
    /// Run one simulation per step height and tabulate the trend fits.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Step heights, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        a2_list: Vec<f64>,
    },
    /// Observed order of accuracy against the exact constant-potential
    /// solution.
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        refine: RefineArg,
        /// Values of dt (time) or h (space), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
    },
    /// Compare a free or constant-potential run with its exact solution.
    OracleCheck {
        #[command(flatten)]
        run: RunArgs,
        /// Largest accepted relative L2 error at the final time.
        #[arg(long, default_value_t = 1e-2)]
        threshold: f64,
    },
    /// Re-analyze an existing observables.csv.
    Trend {
        observables: PathBuf,
        #[command(flatten)]
        trend: TrendArgs,
        /// Where to write the report (default: trend_reanalysis.json beside the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the files of a run directory against its manifest.
    Verify { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineArg {
    Time,
    Space,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Epanechnikov,
    Gaussian,
    MovingAverage,
}

#[derive(Args, Default)]
struct TrendArgs {
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Smoothing bandwidth in time units.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Fixed regression window start (requires --window-hi).
    #[arg(long, requires = "window_hi")]
    window_lo: Option<f64>,
    #[arg(long, requires = "window_lo")]
    window_hi: Option<f64>,
    /// Settle tolerance for automatic window detection.
    #[arg(long, conflicts_with = "window_lo")]
    settle_tolerance: Option<f64>,
    /// Regress the smoothed series instead of the raw one.
    #[arg(long)]
    fit_smoothed: bool,
}

impl TrendArgs {
    fn apply(&self, settings: &mut kgwave::TrendSettings) {
        if let Some(k) = self.kernel {
            settings.smoothing.kernel = match k {
                KernelArg::Epanechnikov => Kernel::Epanechnikov,
                KernelArg::Gaussian => Kernel::Gaussian,
                KernelArg::MovingAverage => Kernel::MovingAverage,
            };
        }
        if self.bandwidth.is_some() {
            settings.smoothing.bandwidth = self.bandwidth;
        }
        if let (Some(t_lo), Some(t_hi)) = (self.window_lo, self.window_hi) {
            settings.window = WindowPolicy::Fixed { t_lo, t_hi };
        }
        if let Some(settle_tolerance) = self.settle_tolerance {
            settings.window = WindowPolicy::Auto { settle_tolerance };
        }
        if self.fit_smoothed {
            settings.fit_smoothed = true;
        }
    }
}

/// Config file plus per-field overrides.
#[derive(Args)]
struct RunArgs {
    /// TOML or JSON run config (a manifest.json is accepted too).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    c: Option<f64>,
    /// Potential left of the step (switches to a step potential).
    #[arg(long)]
    a1: Option<f64>,
    /// Potential right of the step (switches to a step potential).
    #[arg(long)]
    a2: Option<f64>,
    /// Constant potential everywhere.
    #[arg(long, conflicts_with_all = ["a1", "a2"])]
    constant: Option<f64>,
    #[arg(long)]
    half_length: Option<f64>,
    #[arg(long)]
    n_cells: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    /// Use the direct tridiagonal solver instead of CG.
    #[arg(long)]
    direct: bool,
    #[arg(long)]
    rel_tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    jacobi: bool,
    /// Use the L2 projection of the initial data instead of interpolation.
    #[arg(long)]
    l2_projection: bool,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    snapshot: Option<Vec<f64>>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed_label: Option<String>,
    #[command(flatten)]
    trend: TrendArgs,
}

impl RunArgs {
    fn resolve(&self) -> HarnessResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            c,
            half_length,
            n_cells,
            dt,
            t_end,
            beta,
            gamma,
            stride,
            output_dir,
            seed_label
        );
        if self.a1.is_some() || self.a2.is_some() {
            let (a1, a2) = match cfg.potential {
                PotentialConfig::Step { a1, a2 } => (a1, a2),
                _ => (0.0, 150.0),
            };
            cfg.potential = PotentialConfig::Step {
                a1: self.a1.unwrap_or(a1),
                a2: self.a2.unwrap_or(a2),
            };
        }
        if let Some(value) = self.constant {
            cfg.potential = PotentialConfig::Constant { value };
        }
        if self.direct {
            cfg.solver.method = SolverMethod::Direct;
        }
        if let Some(tol) = self.rel_tolerance {
            cfg.solver.rel_tolerance = tol;
        }
        if self.max_iterations.is_some() {
            cfg.solver.max_iterations = self.max_iterations;
        }
        if self.jacobi {
            cfg.solver.jacobi = true;
        }
        if self.l2_projection {
            cfg.initial_data = InitialData::L2Projection;
        }
        if let Some(times) = &self.snapshot {
            cfg.snapshot_times = times.clone();
        }
        self.trend.apply(&mut cfg.trend);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> HarnessResult<()> {
    match cli.command {
        Command::Simulate { run, plot_script } => {
            let cfg = run.resolve()?;
            let art = simulate(&cfg, plot_script)?;
            println!(
                "wrote {} records to {}",
                art.outcome.series.records.len(),
                art.dir.display()
            );
            if let Some(t) = &art.trend {
                print_trend(t);
            }
        }
        Command::Sweep { run, a2_list } => {
            let cfg = run.resolve()?;
            let rows = sweep(&cfg, &a2_list, true)?;
            println!(
                "{:>8} {:>10} {:>9} {:>10} {:>9} {:>8} {:>9}",
                "a2", "A", "r", "A1", "B1", "t0", "sigma_T"
            );
            for row in &rows {
                match &row.report {
                    Some(r) => println!(
                        "{:>8} {:>10.5} {:>9.6} {:>10.5} {:>9.5} {:>8} {:>9.4}",
                        row.a2,
                        r.mean_fit.slope,
                        r.mean_fit.r,
                        r.sigma_fit.slope,
                        r.sigma_fit.intercept,
                        r.t0.map(|t| format!("{t:.4}")).unwrap_or_else(|| "-".into()),
                        r.sigma_final
                    ),
                    None => println!("{:>8} failed: {}", row.a2, row.error.as_deref().unwrap_or("")),
                }
            }
            println!("table: {}", cfg.output_dir.join("table.csv").display());
            let failed = rows.iter().filter(|r| r.report.is_none()).count();
            if failed > 0 {
                return Err(HarnessError::CheckFailed(format!("{failed} sweep run(s) failed")));
            }
        }
        Command::Convergence { run, refine, levels } => {
            let cfg = run.resolve()?;
            let refinement = match refine {
                RefineArg::Time => Refinement::Time,
                RefineArg::Space => Refinement::Space,
            };
            let report = convergence(&cfg, refinement, &levels)?;
            println!("{:>12} {:>14} {:>8}", "step", "error", "order");
            for l in &report.levels {
                let order = l.local_order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
                println!("{:>12} {:>14.6e} {:>8}", l.step, l.error, order);
            }
            println!("observed order (least squares): {:.4}", report.observed_order);
            ensure_dir(&cfg.output_dir)?;
            write_convergence(&cfg.output_dir.join("convergence.csv"), &report)?;
        }
        Command::OracleCheck { run, threshold } => {
            let cfg = run.resolve()?;
            let report = oracle_check(&cfg, threshold)?;
            ensure_dir(&cfg.output_dir)?;
            write_oracle_check(&cfg.output_dir.join("oracle_check.csv"), &report)?;
            println!(
                "{:?} oracle: final error {:.3e}, max {:.3e}, threshold {:.1e}",
                report.oracle, report.final_error, report.max_error, report.threshold
            );
            if !report.passed {
                return Err(HarnessError::CheckFailed(format!(
                    "final relative L2 error {:.3e} exceeds {:.1e}",
                    report.final_error, threshold
                )));
            }
            println!("PASS");
        }
        Command::Trend {
            observables,
            trend,
            out,
        } => {
            let mut settings = kgwave::TrendSettings::default();
            trend.apply(&mut settings);
            let report = retrend(&observables, &settings)?;
            let out = out.unwrap_or_else(|| {
                observables
                    .parent()
                    .map(|p| p.join(RETREND_FILE))
                    .unwrap_or_else(|| PathBuf::from(RETREND_FILE))
            });
            write_json(&out, &report)?;
            print_trend(&report);
        }
        Command::Verify { dir } => {
            let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
            let bad = manifest.verify(&dir)?;
            if !bad.is_empty() {
                return Err(HarnessError::CheckFailed(bad.join("; ")));
            }
            println!("{} files verified", manifest.files.len());
        }
    }
    Ok(())
}

fn print_trend(t: &kgwave::TrendReport) {
    println!(
        "window [{:.3}, {:.3}]{}",
        t.impact.window.0,
        t.impact.window.1,
        if t.impact.fallback { " (fallback)" } else { "" }
    );
    println!(
        "mean  = {:.6} t + {:.6}   r  = {:.6}",
        t.mean_fit.slope, t.mean_fit.intercept, t.mean_fit.r
    );
    println!(
        "sigma = {:.6} t + {:.6}   r1 = {:.6}",
        t.sigma_fit.slope, t.sigma_fit.intercept, t.sigma_fit.r
    );
    if let Some(t0) = t.t0 {
        println!("t0 = {t0:.4}");
    }
    println!(
        "sigma: initial {:.5}, min {:.5} at t = {:.3}, final {:.5}",
        t.sigma_initial, t.sigma_min, t.t_sigma_min, t.sigma_final
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
