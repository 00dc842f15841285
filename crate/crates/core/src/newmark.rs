//! Two-field Newmark scheme on the coefficient vectors `(C, D)`:
//!
//! ```text
//! (G + β dt² A) C⁺ = G (C + dt D) - dt² (1/2 - β) A C
//!            G D⁺ = G D - dt A (γ C⁺ + (1 - γ) C)
//! ```
//!
//! With `(β, γ) = (1/4, 1/2)` the quadratic form `½ DᵀGD + ½ CᵀAC` is an
//! exact invariant of the recursion.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::FemSystem;
use crate::solver::{cg_solve, thomas_solve, CgOptions};
use crate::tridiag::SymTridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewmarkParams {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl NewmarkParams {
    /// Average-acceleration parameters `(β, γ) = (1/4, 1/2)`.
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        Self::with_coefficients(0.25, 0.5, dt, n_steps)
    }

    pub fn with_coefficients(beta: f64, gamma: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(beta.is_finite() && gamma.is_finite()) {
            return Err(invalid("beta/gamma", "must be finite"));
        }
        Ok(Self {
            beta,
            gamma,
            dt,
            n_steps,
        })
    }

    /// Same scheme run backwards in time (`dt → -dt`).
    pub fn reversed(&self) -> Self {
        Self { dt: -self.dt, ..*self }
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Displacement and velocity coefficients at `t = step · |dt|`. Reversed runs
/// (`dt < 0`) count `step` down.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub step: usize,
    pub t: f64,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl SolverState {
    pub fn initial(c: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if c.len() != d.len() {
            return Err(Error::DimensionMismatch {
                expected: c.len(),
                actual: d.len(),
            });
        }
        Ok(Self { step: 0, t: 0.0, c, d })
    }
}

/// How the two SPD systems of a step are solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", deny_unknown_fields)]
pub enum LinearSolve {
    ConjugateGradient(CgOptions),
    /// Thomas elimination; bypasses CG entirely.
    Direct,
}

impl Default for LinearSolve {
    fn default() -> Self {
        LinearSolve::ConjugateGradient(CgOptions::default())
    }
}

/// `½ DᵀGD + ½ CᵀAC`.
pub fn discrete_energy(mass: &SymTridiagonal, bilinear: &SymTridiagonal, c: &[f64], d: &[f64]) -> f64 {
    0.5 * mass.quad_form(d) + 0.5 * bilinear.quad_form(c)
}

/// Stepper holding the shifted matrix `G + β dt² A`, reused across steps.
#[derive(Debug, Clone)]
pub struct NewmarkIntegrator<'a> {
    mass: &'a SymTridiagonal,
    bilinear: &'a SymTridiagonal,
    shifted: SymTridiagonal,
    params: NewmarkParams,
    solve: LinearSolve,
    // scratch
    rhs: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> NewmarkIntegrator<'a> {
    pub fn new(
        mass: &'a SymTridiagonal,
        bilinear: &'a SymTridiagonal,
        params: NewmarkParams,
        solve: LinearSolve,
    ) -> Result<Self> {
        if let LinearSolve::ConjugateGradient(opts) = &solve {
            opts.validate()?;
        }
        let n = mass.dim();
        let shifted = mass.add_scaled(params.beta * params.dt * params.dt, bilinear)?;
        Ok(Self {
            mass,
            bilinear,
            shifted,
            params,
            solve,
            rhs: vec![0.0; n],
            tmp: vec![0.0; n],
        })
    }

    pub fn params(&self) -> &NewmarkParams {
        &self.params
    }

    fn solve_system(&self, matrix: &SymTridiagonal, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        match &self.solve {
            LinearSolve::ConjugateGradient(opts) => Ok(cg_solve(matrix, rhs, guess, opts)?.x),
            LinearSolve::Direct => thomas_solve(matrix, rhs),
        }
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &SolverState) -> Result<SolverState> {
        let n = self.mass.dim();
        if state.c.len() != n || state.d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: state.c.len().min(state.d.len()),
            });
        }
        let NewmarkParams { beta, gamma, dt, .. } = self.params;
        if dt < 0.0 && state.step == 0 {
            return Err(invalid("dt", "a reversed run cannot step before t = 0"));
        }
        let wrap = |e: Error| Error::StepFailed {
            step: state.step + 1,
            source: Box::new(e),
        };

        // displacement: (G + β dt² A) C⁺ = G (C + dt D) - dt² (1/2 - β) A C
        let predictor: Vec<f64> = state.c.iter().zip(&state.d).map(|(c, d)| c + dt * d).collect();
        self.mass.mul_vec_into(&predictor, &mut self.rhs);
        self.bilinear.mul_vec_into(&state.c, &mut self.tmp);
        let k = dt * dt * (0.5 - beta);
        for (r, ac) in self.rhs.iter_mut().zip(&self.tmp) {
            *r -= k * ac;
        }
        let c_next = self.solve_system(&self.shifted, &self.rhs, &predictor).map_err(wrap)?;

        // velocity: G D⁺ = G D - dt A (γ C⁺ + (1 - γ) C)
        let blend: Vec<f64> = c_next
            .iter()
            .zip(&state.c)
            .map(|(cn, c)| gamma * cn + (1.0 - gamma) * c)
            .collect();
        self.bilinear.mul_vec_into(&blend, &mut self.tmp);
        self.mass.mul_vec_into(&state.d, &mut self.rhs);
        for (r, a) in self.rhs.iter_mut().zip(&self.tmp) {
            *r -= dt * a;
        }
        let d_next = self.solve_system(self.mass, &self.rhs, &state.d).map_err(wrap)?;

        let step = if dt > 0.0 { state.step + 1 } else { state.step - 1 };
        Ok(SolverState {
            step,
            t: step as f64 * dt.abs(),
            c: c_next,
            d: d_next,
        })
    }
}

/// One Newmark step with CG solves, building the shifted matrix on the fly.
pub fn newmark_step(
    state: &SolverState,
    mass: &SymTridiagonal,
    bilinear: &SymTridiagonal,
    params: &NewmarkParams,
    opts: &CgOptions,
) -> Result<SolverState> {
    NewmarkIntegrator::new(mass, bilinear, *params, LinearSolve::ConjugateGradient(*opts))?.step(state)
}

/// Receives the states selected by the recording stride.
pub trait Observer {
    fn observe(&mut self, system: &FemSystem, state: &SolverState) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&FemSystem, &SolverState) -> Result<()>,
{
    fn observe(&mut self, system: &FemSystem, state: &SolverState) -> Result<()> {
        self(system, state)
    }
}

/// Runs `params.n_steps` steps from `initial`.
///
/// Observers see step 0, every `stride`-th step, and the final step.
pub fn run_simulation(
    system: &FemSystem,
    initial: SolverState,
    params: &NewmarkParams,
    solve: LinearSolve,
    stride: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<SolverState> {
    if stride == 0 {
        return Err(invalid("stride", "must be at least 1"));
    }
    let n = system.mesh.n_nodes();
    if initial.c.len() != n || initial.d.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: initial.c.len().min(initial.d.len()),
        });
    }
    let mut integrator = NewmarkIntegrator::new(&system.mass, &system.bilinear, *params, solve)?;
    let mut notify = |state: &SolverState| -> Result<()> {
        for obs in observers.iter_mut() {
            obs.observe(system, state)?;
        }
        Ok(())
    };

    let mut state = initial;
    notify(&state)?;
    for done in 1..=params.n_steps {
        state = integrator.step(&state)?;
        if done.is_multiple_of(stride) || done == params.n_steps {
            notify(&state)?;
        }
    }
    Ok(state)
}
