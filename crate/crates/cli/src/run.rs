//! Executes a configured run in memory.

use kgwave::{
    analyze_trend, l2_projection, run_simulation, FemSystem, LinearSolve, NewmarkParams, ObservableSeries, Observer,
    SeriesRecorder, SolverState, TrendReport,
};

use crate::config::{InitialData, RunConfig};
use crate::error::HarnessResult;

/// Discretized problem, ready to integrate.
pub struct PreparedRun {
    pub system: FemSystem,
    pub params: NewmarkParams,
    pub solve: LinearSolve,
    pub initial: SolverState,
}

impl PreparedRun {
    pub fn new(config: &RunConfig) -> HarnessResult<Self> {
        config.validate()?;
        let mesh = kgwave::build_mesh(config.half_length, config.n_cells)?;
        let profile = config.potential.profile()?;
        let system = FemSystem::new(mesh, config.c, &profile)?;
        let packet = config.wave_packet();
        let (c0, d0) = match config.initial_data {
            InitialData::Interpolate => (
                system.mesh.interpolate(|x| packet.f(x)),
                system.mesh.interpolate(|x| packet.g(x)),
            ),
            InitialData::L2Projection => (
                l2_projection(&system.mesh, |x| packet.f(x))?,
                l2_projection(&system.mesh, |x| packet.g(x))?,
            ),
        };
        Ok(Self {
            system,
            params: config.newmark_params()?,
            solve: config.solver.linear_solve(),
            initial: SolverState::initial(c0, d0)?,
        })
    }
}

/// Nodal field at one configured snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

/// Everything a run produced, including partial results when the solver
/// failed part way.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub series: ObservableSeries,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Option<SolverState>,
    pub failure: Option<kgwave::Error>,
    /// Largest share of `∫u²` found on the two boundary elements.
    pub max_boundary_fraction: f64,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn trend(&self, config: &RunConfig) -> kgwave::Result<TrendReport> {
        analyze_trend(
            &self.series.times(),
            &self.series.means(),
            &self.series.sigmas(),
            &config.trend,
        )
    }
}

/// Sees every step; records moments at the stride and fields at the
/// snapshot steps.
struct Recorder {
    stride: usize,
    n_steps: usize,
    moments: SeriesRecorder,
    snapshot_steps: Vec<(f64, usize)>,
    snapshots: Vec<Snapshot>,
    last: Option<SolverState>,
}

impl Observer for Recorder {
    fn observe(&mut self, system: &FemSystem, state: &SolverState) -> kgwave::Result<()> {
        if state.step.is_multiple_of(self.stride) || state.step == self.n_steps {
            self.moments.observe(system, state)?;
        }
        for &(t, k) in &self.snapshot_steps {
            if k == state.step {
                self.snapshots.push(Snapshot { t, u: state.c.clone() });
            }
        }
        if state.step == self.n_steps {
            self.last = Some(state.clone());
        }
        Ok(())
    }
}

pub fn execute(config: &RunConfig) -> HarnessResult<RunOutcome> {
    let run = PreparedRun::new(config)?;
    let mut rec = Recorder {
        stride: config.stride,
        n_steps: run.params.n_steps,
        moments: SeriesRecorder::new(config.stride),
        snapshot_steps: config.snapshot_steps(),
        snapshots: Vec::new(),
        last: None,
    };
    let started = std::time::Instant::now();
    let result = run_simulation(&run.system, run.initial, &run.params, run.solve, 1, &mut [&mut rec]);
    log::info!(
        "{} steps on {} nodes in {:.2?}",
        run.params.n_steps,
        run.system.mesh.n_nodes(),
        started.elapsed()
    );
    let failure = result.err();
    if let Some(e) = &failure {
        log::error!("run stopped: {e}");
    }
    Ok(RunOutcome {
        max_boundary_fraction: rec.moments.max_boundary_fraction(),
        series: rec.moments.into_series(),
        snapshots: rec.snapshots,
        final_state: rec.last,
        failure,
    })
}
