//! Finite element / Newmark simulation of the one-dimensional Klein-Gordon
//! equation `u_tt - c² u_xx + a(x) u = 0` with a piecewise-constant
//! potential, plus the observables, trend analysis and reference solutions
//! used to study a wave packet hitting a potential step.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod newmark;
pub mod observables;
pub mod oracles;
pub mod packet;
pub mod quad;
pub mod solver;
pub mod trend;
pub mod tridiag;

pub use error::{Error, Result};
pub use fem::{
    assemble_bilinear, assemble_mass, assemble_stiffness, build_mesh, l2_projection, relative_l2_error, FemSystem,
    Mesh1D, PotentialProfile,
};
pub use newmark::{
    discrete_energy, newmark_step, run_simulation, LinearSolve, NewmarkIntegrator, NewmarkParams, Observer, SolverState,
};
pub use observables::{position_moments, MomentRecord, Moments, ObservableSeries, SeriesRecorder};
pub use oracles::{
    constant_potential_propagate, dalembert_solution, essential_support_interval, group_velocity,
    propagate_constant_potential, spectral_energy, FourierGrid, PropagatedField,
};
pub use packet::{check_transmission_conditions, eval_f, eval_g, fourier_magnitude, PacketShape, WavePacket};
pub use solver::{cg_solve, thomas_solve, CgOptions, CgSolution};
pub use trend::{
    analyze_trend, crossing_time, kernel_smooth, linear_fit, Kernel, RegressionResult, SmoothingSpec, TrendReport,
    TrendSettings, WindowPolicy,
};
pub use tridiag::SymTridiagonal;
