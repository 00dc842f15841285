//! Uniform P1 discretization of `[-L, L]`: mesh, potential profiles and the
//! mass / bilinear-form matrices.
//!
//! Boundary nodes are unconstrained, so the homogeneous Neumann condition at
//! `x = ±L` is the natural one of the variational form.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::GAUSS5;
use crate::solver::thomas_solve;
use crate::tridiag::SymTridiagonal;

/// Relative tolerance (in units of `h`) for snapping a breakpoint onto a node.
const SNAP_TOLERANCE: f64 = 1e-9;

/// Uniform grid `x_j = -L + j h`, `h = 2L / m`, with `m` even so that the
/// middle node sits exactly at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    half_length: f64,
    n_cells: usize,
    spacing: f64,
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the node at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.n_cells / 2
    }

    /// Index of the node closest to `x` (clamped to the mesh).
    pub fn nearest_node(&self, x: f64) -> usize {
        let j = ((x + self.half_length) / self.spacing).round();
        j.clamp(0.0, self.n_cells as f64) as usize
    }

    /// Nodal interpolation of `f`.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Builds the uniform mesh on `[-L, L]` with `m` cells.
pub fn build_mesh(half_length: f64, n_cells: usize) -> Result<Mesh1D> {
    if !(half_length.is_finite() && half_length > 0.0) {
        return Err(invalid("half_length", format!("must be positive, got {half_length}")));
    }
    if n_cells < 2 || !n_cells.is_multiple_of(2) {
        return Err(invalid(
            "n_cells",
            format!("must be even and at least 2 so that x = 0 is a node, got {n_cells}"),
        ));
    }
    let spacing = 2.0 * half_length / n_cells as f64;
    let mid = (n_cells / 2) as i64;
    // Offsets from the middle node keep x = 0 exact and the grid symmetric.
    let nodes = (0..=n_cells as i64).map(|j| (j - mid) as f64 * spacing).collect();
    Ok(Mesh1D {
        half_length,
        n_cells,
        spacing,
        nodes,
    })
}

/// Piecewise-constant, nonnegative potential `a(x)`.
///
/// `values[k]` applies on `(breakpoints[k-1], breakpoints[k])`, with the
/// first and last intervals extending to the domain ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PotentialProfile {
    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: breakpoints.len() + 1,
                actual: values.len(),
            });
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(invalid("breakpoints", "must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("breakpoints", "must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid("values", format!("potential must be finite and >= 0, got {v}")));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::piecewise(Vec::new(), vec![value])
    }

    /// `a1` on `x < 0`, `a2` on `x > 0`.
    pub fn step(a1: f64, a2: f64) -> Result<Self> {
        Self::piecewise(vec![0.0], vec![a1, a2])
    }

    /// `outside` everywhere except `height` on `[start, end]`.
    pub fn barrier(outside: f64, height: f64, start: f64, end: f64) -> Result<Self> {
        Self::piecewise(vec![start, end], vec![outside, height, outside])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on the interval containing `x`; at a breakpoint the right-hand
    /// interval wins.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k]
    }

    /// `Some(a)` when the profile is the same constant everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first).then_some(first)
    }

    fn check_on_mesh(&self, mesh: &Mesh1D) -> Result<()> {
        let l = mesh.half_length();
        let h = mesh.spacing();
        for &b in &self.breakpoints {
            if b < -l - SNAP_TOLERANCE * h || b > l + SNAP_TOLERANCE * h {
                return Err(invalid(
                    "breakpoints",
                    format!("breakpoint {b} lies outside [-{l}, {l}]"),
                ));
            }
            let nearest = mesh.nodes()[mesh.nearest_node(b)];
            if (nearest - b).abs() > SNAP_TOLERANCE * h {
                return Err(Error::BreakpointOffNode {
                    breakpoint: b,
                    nearest,
                    spacing: h,
                });
            }
        }
        Ok(())
    }
}

/// Gram matrix of the hat basis: `2h/3` inside, `h/3` at the ends, `h/6`
/// off the diagonal.
pub fn assemble_mass(mesh: &Mesh1D) -> SymTridiagonal {
    weighted_mass(mesh, |_| 1.0)
}

/// Mass matrix with element weights `w(e)`, element contribution
/// `w h/6 [[2, 1], [1, 2]]`.
fn weighted_mass(mesh: &Mesh1D, weight: impl Fn(usize) -> f64) -> SymTridiagonal {
    let h = mesh.spacing();
    let mut m = SymTridiagonal::zeros(mesh.n_nodes());
    for e in 0..mesh.n_cells() {
        let w = weight(e) * h / 6.0;
        m.diag_mut()[e] += 2.0 * w;
        m.diag_mut()[e + 1] += 2.0 * w;
        m.off_mut()[e] += w;
    }
    m
}

/// P1 stiffness matrix `∫ψ_i' ψ_j'`.
pub fn assemble_stiffness(mesh: &Mesh1D) -> SymTridiagonal {
    let inv_h = 1.0 / mesh.spacing();
    let mut k = SymTridiagonal::zeros(mesh.n_nodes());
    for e in 0..mesh.n_cells() {
        k.diag_mut()[e] += inv_h;
        k.diag_mut()[e + 1] += inv_h;
        k.off_mut()[e] -= inv_h;
    }
    k
}

/// Matrix of `a(u, v) = ∫ c² u'v' + a(x) u v` on the hat basis.
///
/// Every potential breakpoint must coincide with a node (within `1e-9 h`);
/// otherwise the element integrals would straddle a discontinuity.
pub fn assemble_bilinear(mesh: &Mesh1D, wave_speed: f64, potential: &PotentialProfile) -> Result<SymTridiagonal> {
    if !(wave_speed.is_finite() && wave_speed > 0.0) {
        return Err(invalid("wave_speed", format!("must be positive, got {wave_speed}")));
    }
    potential.check_on_mesh(mesh)?;
    let nodes = mesh.nodes();
    let potential_mass = weighted_mass(mesh, |e| potential.value_at(0.5 * (nodes[e] + nodes[e + 1])));
    assemble_stiffness(mesh)
        .scaled(wave_speed * wave_speed)
        .add_scaled(1.0, &potential_mass)
}

/// Mesh with its mass and bilinear-form matrices, shared read-only by a run.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub mesh: Mesh1D,
    pub mass: SymTridiagonal,
    pub bilinear: SymTridiagonal,
}

impl FemSystem {
    pub fn new(mesh: Mesh1D, wave_speed: f64, potential: &PotentialProfile) -> Result<Self> {
        let mass = assemble_mass(&mesh);
        let bilinear = assemble_bilinear(&mesh, wave_speed, potential)?;
        Ok(Self { mesh, mass, bilinear })
    }
}

/// L² projection of `f` onto the P1 space: solves `G c = (∫ f ψ_j)_j`
/// with 5-point Gauss on each element.
pub fn l2_projection(mesh: &Mesh1D, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let nodes = mesh.nodes();
    let half = 0.5 * mesh.spacing();
    let mut load = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_cells() {
        let mid = 0.5 * (nodes[e] + nodes[e + 1]);
        for &(s, w) in GAUSS5.iter() {
            let fx = f(mid + half * s) * w * half;
            load[e] += 0.5 * (1.0 - s) * fx;
            load[e + 1] += 0.5 * (1.0 + s) * fx;
        }
    }
    thomas_solve(&assemble_mass(mesh), &load)
}

/// `‖v‖` of the P1 function with nodal values `v`, i.e. `√(vᵀGv)`.
pub fn l2_norm(mass: &SymTridiagonal, v: &[f64]) -> f64 {
    mass.quad_form(v).max(0.0).sqrt()
}

/// `‖u - reference‖ / ‖reference‖` in the P1 L² norm.
pub fn relative_l2_error(mass: &SymTridiagonal, u: &[f64], reference: &[f64]) -> Result<f64> {
    if u.len() != reference.len() || u.len() != mass.dim() {
        return Err(Error::DimensionMismatch {
            expected: mass.dim(),
            actual: u.len().min(reference.len()),
        });
    }
    let diff: Vec<f64> = u.iter().zip(reference).map(|(a, b)| a - b).collect();
    let denom = l2_norm(mass, reference);
    if denom == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(l2_norm(mass, &diff) / denom)
}
