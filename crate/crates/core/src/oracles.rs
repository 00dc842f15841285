//! Reference solutions used to validate the finite element pipeline:
//! d'Alembert's formula for the free wave equation and the exact Fourier
//! propagator for a constant potential.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::fem::Mesh1D;
use crate::quad::adaptive_simpson;

/// `u(t, x) = ½[u0(x + ct) + u0(x - ct)] + (1/2c) ∫_{x-ct}^{x+ct} v0`.
pub fn dalembert_solution(u0: impl Fn(f64) -> f64, v0: impl Fn(f64) -> f64, wave_speed: f64, t: f64, x: f64) -> f64 {
    let ct = wave_speed * t;
    let displacement = 0.5 * (u0(x + ct) + u0(x - ct));
    if ct == 0.0 {
        return displacement;
    }
    displacement + adaptive_simpson(&v0, x - ct, x + ct, 1e-14) / (2.0 * wave_speed)
}

/// `ω'(ξ) = c²ξ / √(m² + c²ξ²)` for the dispersion relation
/// `ω(ξ) = √(m² + c²ξ²)`.
pub fn group_velocity(xi: f64, wave_speed: f64, m_sq: f64) -> f64 {
    let c2 = wave_speed * wave_speed;
    if xi == 0.0 {
        return 0.0;
    }
    c2 * xi / (m_sq + c2 * xi * xi).sqrt()
}

/// Stationary-phase support `[ω'(ξ₁) t, ω'(ξ₂) t]` of a packet whose
/// spectrum lies in `[ξ₁, ξ₂]`.
pub fn essential_support_interval(band: (f64, f64), wave_speed: f64, m_sq: f64, t: f64) -> Result<(f64, f64)> {
    if !(band.0 < band.1) {
        return Err(invalid("band", format!("need ξ₁ < ξ₂, got {band:?}")));
    }
    if t < 0.0 {
        return Err(invalid("t", "must be nonnegative"));
    }
    Ok((
        group_velocity(band.0, wave_speed, m_sq) * t,
        group_velocity(band.1, wave_speed, m_sq) * t,
    ))
}

/// Cells next to each end of the Fourier span watched for aliasing.
pub const EDGE_CELLS: usize = 8;
/// Largest tolerated share of `Σu²` in the edge cells.
pub const EDGE_MASS_LIMIT: f64 = 1e-8;

/// Periodic sampling grid `x_k = origin + k dx`, `k = 0..n`, with `n` a
/// power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierGrid {
    n_points: usize,
    spacing: f64,
    origin: f64,
}

impl FourierGrid {
    pub fn new(n_points: usize, spacing: f64, origin: f64) -> Result<Self> {
        if !n_points.is_power_of_two() || n_points < 2 {
            return Err(invalid(
                "n_points",
                format!("must be a power of two >= 2, got {n_points}"),
            ));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(invalid("spacing", format!("must be positive, got {spacing}")));
        }
        Ok(Self {
            n_points,
            spacing,
            origin,
        })
    }

    /// Grid with the mesh spacing, at least twice as many points as mesh
    /// nodes, containing every mesh node (zero padding on both sides).
    pub fn covering(mesh: &Mesh1D) -> Self {
        let n_points = (2 * mesh.n_nodes()).next_power_of_two();
        let h = mesh.spacing();
        Self {
            n_points,
            spacing: h,
            origin: -((n_points / 2) as f64) * h,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }

    /// Angular wavenumber of DFT bin `k` in standard layout.
    pub fn wavenumber(&self, k: usize) -> f64 {
        let n = self.n_points as i64;
        let signed = if (k as i64) < n / 2 { k as i64 } else { k as i64 - n };
        2.0 * PI * signed as f64 / (n as f64 * self.spacing)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_points).map(|k| f(self.x(k))).collect()
    }

    /// Grid index of mesh node `j`, if the node lies on the grid.
    pub fn index_of_node(&self, mesh: &Mesh1D, j: usize) -> Option<usize> {
        let k = (mesh.nodes()[j] - self.origin) / self.spacing;
        let kr = k.round();
        ((k - kr).abs() < 1e-6 && kr >= 0.0 && (kr as usize) < self.n_points).then_some(kr as usize)
    }

    /// Values of `samples` at the mesh nodes.
    pub fn restrict_to_mesh(&self, mesh: &Mesh1D, samples: &[f64]) -> Result<Vec<f64>> {
        (0..mesh.n_nodes())
            .map(|j| {
                self.index_of_node(mesh, j)
                    .map(|k| samples[k])
                    .ok_or_else(|| invalid("mesh", format!("node {j} is not on the Fourier grid")))
            })
            .collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_points {
            return Err(Error::DimensionMismatch {
                expected: self.n_points,
                actual: v.len(),
            });
        }
        Ok(())
    }

    fn check_edges(&self, v: &[f64]) -> Result<()> {
        let total: f64 = v.iter().map(|x| x * x).sum();
        if total == 0.0 {
            return Ok(());
        }
        let cells = EDGE_CELLS.min(self.n_points / 2);
        let edge: f64 = v[..cells]
            .iter()
            .chain(&v[self.n_points - cells..])
            .map(|x| x * x)
            .sum();
        let fraction = edge / total;
        if fraction > EDGE_MASS_LIMIT {
            return Err(Error::Aliasing { fraction, cells });
        }
        Ok(())
    }
}

struct Spectral {
    grid: FourierGrid,
    planner: FftPlanner<f64>,
}

impl Spectral {
    fn new(grid: FourierGrid) -> Self {
        Self {
            grid,
            planner: FftPlanner::new(),
        }
    }

    fn forward(&mut self, v: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.planner.plan_fft_forward(buf.len()).process(&mut buf);
        buf
    }

    fn inverse_real(&mut self, mut buf: Vec<Complex64>) -> Result<Vec<f64>> {
        let n = buf.len();
        self.planner.plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let max_re = buf.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let max_im = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_re > 0.0 && max_im > 1e-10 * max_re {
            return Err(invalid(
                "spectrum",
                format!(
                    "inverse transform is not real (imaginary residue {:.3e})",
                    max_im / max_re
                ),
            ));
        }
        Ok(buf.into_iter().map(|z| z.re * scale).collect())
    }
}

/// Field and time derivative of the constant-potential solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedField {
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
}

/// Exact solution of `u_tt - c² u_xx + m² u = 0` on the periodic grid:
///
/// ```text
/// û(t) = cos(ωt) f̂ + sin(ωt)/ω ĝ,   ω(ξ) = √(m² + c²ξ²)
/// ```
///
/// with `sin(ωt)/ω → t` for the `ω = 0` mode.
pub fn propagate_constant_potential(
    grid: &FourierGrid,
    f: &[f64],
    g: Option<&[f64]>,
    m_sq: f64,
    wave_speed: f64,
    t: f64,
) -> Result<PropagatedField> {
    if !(m_sq >= 0.0) {
        return Err(invalid("m_sq", format!("must be nonnegative, got {m_sq}")));
    }
    grid.check_len(f)?;
    grid.check_edges(f)?;
    if let Some(g) = g {
        grid.check_len(g)?;
        grid.check_edges(g)?;
    }

    let mut sp = Spectral::new(*grid);
    let f_hat = sp.forward(f);
    let g_hat = g.map(|g| sp.forward(g));
    let c2 = wave_speed * wave_speed;

    let mut u_hat = Vec::with_capacity(grid.n_points);
    let mut ut_hat = Vec::with_capacity(grid.n_points);
    for k in 0..grid.n_points {
        let xi = sp.grid.wavenumber(k);
        let omega = (m_sq + c2 * xi * xi).sqrt();
        let (s, c) = (omega * t).sin_cos();
        let sinc = if omega == 0.0 { t } else { s / omega };
        let mut u = f_hat[k] * c;
        let mut ut = f_hat[k] * (-omega * s);
        if let Some(gh) = &g_hat {
            u += gh[k] * sinc;
            ut += gh[k] * c;
        }
        u_hat.push(u);
        ut_hat.push(ut);
    }
    let u = sp.inverse_real(u_hat)?;
    let u_t = sp.inverse_real(ut_hat)?;
    grid.check_edges(&u)?;
    Ok(PropagatedField { u, u_t })
}

/// Field-only form of [`propagate_constant_potential`].
pub fn constant_potential_propagate(
    grid: &FourierGrid,
    f: &[f64],
    g: Option<&[f64]>,
    m_sq: f64,
    wave_speed: f64,
    t: f64,
) -> Result<Vec<f64>> {
    propagate_constant_potential(grid, f, g, m_sq, wave_speed, t).map(|p| p.u)
}

/// `∫ (u_t² + c² u_x² + m² u²) dx` on the grid, with `u_x` taken
/// spectrally (Parseval).
pub fn spectral_energy(grid: &FourierGrid, u: &[f64], u_t: &[f64], m_sq: f64, wave_speed: f64) -> Result<f64> {
    grid.check_len(u)?;
    grid.check_len(u_t)?;
    let mut sp = Spectral::new(*grid);
    let u_hat = sp.forward(u);
    let v_hat = sp.forward(u_t);
    let c2 = wave_speed * wave_speed;
    let sum: f64 = (0..grid.n_points)
        .map(|k| {
            let xi = grid.wavenumber(k);
            v_hat[k].norm_sqr() + (c2 * xi * xi + m_sq) * u_hat[k].norm_sqr()
        })
        .sum();
    Ok(sum * grid.spacing / grid.n_points as f64)
}

/// Power spectrum `|û(ξ_k)|²` of real samples, in DFT layout.
pub fn power_spectrum(grid: &FourierGrid, u: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(u)?;
    let mut sp = Spectral::new(*grid);
    Ok(sp.forward(u).iter().map(|z| z.norm_sqr()).collect())
}
