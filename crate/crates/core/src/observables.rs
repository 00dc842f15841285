//! Position moments of the density `|u|²` for the P1 field.
//!
//! All integrals use 3-point Gauss per element, which is exact for the
//! piecewise quartic `(x - M)² u²`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::{FemSystem, Mesh1D};
use crate::newmark::{discrete_energy, Observer, SolverState};
use crate::quad::GAUSS3;

/// Fraction of `∫u²` on the two boundary elements above which a leak
/// warning is logged.
pub const LEAK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub l2_sq: f64,
    pub mean: f64,
    pub variance: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub t: f64,
    pub l2_sq: f64,
    pub mean: f64,
    pub variance: f64,
    pub sigma: f64,
    pub energy: f64,
}

/// Integrates `weight(x) u(x)²` element by element.
fn integrate_density(mesh: &Mesh1D, c: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
    let nodes = mesh.nodes();
    let half = 0.5 * mesh.spacing();
    (0..mesh.n_cells())
        .map(|e| {
            let (ul, ur) = (c[e], c[e + 1]);
            if ul == 0.0 && ur == 0.0 {
                return 0.0;
            }
            let mid = 0.5 * (nodes[e] + nodes[e + 1]);
            GAUSS3
                .iter()
                .map(|&(s, w)| {
                    let u = 0.5 * (1.0 - s) * ul + 0.5 * (1.0 + s) * ur;
                    w * weight(mid + half * s) * u * u
                })
                .sum::<f64>()
                * half
        })
        .sum()
}

/// `∫u²`, mean `M`, variance `V` and `σ = √V` of the density `|u|²` on the
/// mesh.
pub fn position_moments(mesh: &Mesh1D, c: &[f64]) -> Result<Moments> {
    if c.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            actual: c.len(),
        });
    }
    let l2_sq = integrate_density(mesh, c, |_| 1.0);
    if !(l2_sq > 0.0) {
        return Err(Error::ZeroField);
    }
    let mean = integrate_density(mesh, c, |x| x) / l2_sq;
    let variance = (integrate_density(mesh, c, |x| (x - mean) * (x - mean)) / l2_sq).max(0.0);
    Ok(Moments {
        l2_sq,
        mean,
        variance,
        sigma: variance.sqrt(),
    })
}

/// Share of `∫u²` carried by the first and last elements.
pub fn boundary_fraction(mesh: &Mesh1D, c: &[f64], l2_sq: f64) -> f64 {
    let n = mesh.n_cells();
    let (lo, hi) = (mesh.nodes()[1], mesh.nodes()[n - 1]);
    integrate_density(mesh, c, |x| if x <= lo || x >= hi { 1.0 } else { 0.0 }) / l2_sq
}

/// Fraction of the density outside `[M - kσ, M + kσ]`, measured on the
/// nodal trapezoid of `u²`.
pub fn mass_outside(mesh: &Mesh1D, c: &[f64], moments: &Moments, k: f64) -> f64 {
    let lo = moments.mean - k * moments.sigma;
    let hi = moments.mean + k * moments.sigma;
    integrate_density(mesh, c, |x| if x < lo || x > hi { 1.0 } else { 0.0 }) / moments.l2_sq
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub stride: usize,
    pub records: Vec<MomentRecord>,
}

impl ObservableSeries {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sigma).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    /// Appends a record, keeping times strictly increasing.
    pub fn push(&mut self, record: MomentRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(record.t > last.t) {
                return Err(invalid(
                    "t",
                    format!(
                        "records must be strictly increasing in time ({} after {})",
                        record.t, last.t
                    ),
                ));
            }
        }
        self.records.push(record);
        Ok(())
    }
}

/// Observer building an [`ObservableSeries`] during a run.
#[derive(Debug, Clone)]
pub struct SeriesRecorder {
    series: ObservableSeries,
    max_boundary_fraction: f64,
    leak_warned: bool,
}

impl SeriesRecorder {
    pub fn new(stride: usize) -> Self {
        Self {
            series: ObservableSeries {
                stride,
                records: Vec::new(),
            },
            max_boundary_fraction: 0.0,
            leak_warned: false,
        }
    }

    pub fn series(&self) -> &ObservableSeries {
        &self.series
    }

    pub fn into_series(self) -> ObservableSeries {
        self.series
    }

    /// Largest boundary-element share of `∫u²` seen so far.
    pub fn max_boundary_fraction(&self) -> f64 {
        self.max_boundary_fraction
    }
}

impl Observer for SeriesRecorder {
    fn observe(&mut self, system: &FemSystem, state: &SolverState) -> Result<()> {
        let m = position_moments(&system.mesh, &state.c)?;
        let frac = boundary_fraction(&system.mesh, &state.c, m.l2_sq);
        self.max_boundary_fraction = self.max_boundary_fraction.max(frac);
        if frac > LEAK_THRESHOLD && !self.leak_warned {
            log::warn!(
                "t = {:.4}: {:.3e} of the density sits on the boundary elements; moments are no longer whole-line values",
                state.t,
                frac
            );
            self.leak_warned = true;
        }
        self.series.push(MomentRecord {
            t: state.t,
            l2_sq: m.l2_sq,
            mean: m.mean,
            variance: m.variance,
            sigma: m.sigma,
            energy: discrete_energy(&system.mass, &system.bilinear, &state.c, &state.d),
        })
    }
}

/// Moment record of a single state, without a recorder.
pub fn record_state(system: &FemSystem, state: &SolverState) -> Result<MomentRecord> {
    let m = position_moments(&system.mesh, &state.c)?;
    Ok(MomentRecord {
        t: state.t,
        l2_sq: m.l2_sq,
        mean: m.mean,
        variance: m.variance,
        sigma: m.sigma,
        energy: discrete_energy(&system.mass, &system.bilinear, &state.c, &state.d),
    })
}
