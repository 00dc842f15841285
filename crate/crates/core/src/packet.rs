//! Initial wave packet `f`, its matched velocity `g = -c f'`, and spectral
//! diagnostics of `f`.
//!
//! The default packet is `f(x) = x² exp(-(x + 3)²/2) / (10 √(2π))`, a unit
//! mass bump that vanishes at the junction `x = 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Envelope family of the packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketShape {
    /// `x² · Gaussian`: vanishes at the origin.
    #[default]
    QuadraticGaussian,
    /// Plain Gaussian; does not vanish at the origin.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavePacket {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub wave_speed: f64,
    pub shape: PacketShape,
}

impl Default for WavePacket {
    fn default() -> Self {
        Self {
            amplitude: 1.0 / (10.0 * (2.0 * PI).sqrt()),
            center: -3.0,
            width: 1.0,
            wave_speed: 1.0,
            shape: PacketShape::QuadraticGaussian,
        }
    }
}

impl WavePacket {
    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(invalid("width", format!("must be positive, got {}", self.width)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid(
                "amplitude",
                format!("must be positive, got {}", self.amplitude),
            ));
        }
        if !(self.wave_speed.is_finite() && self.wave_speed > 0.0) {
            return Err(invalid(
                "wave_speed",
                format!("must be positive, got {}", self.wave_speed),
            ));
        }
        if !self.center.is_finite() {
            return Err(invalid("center", "must be finite"));
        }
        Ok(())
    }

    fn gaussian(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        (-0.5 * z * z).exp()
    }

    /// `(p, p', p'')` for the polynomial prefactor.
    fn prefactor(&self, x: f64) -> (f64, f64, f64) {
        match self.shape {
            PacketShape::QuadraticGaussian => (x * x, 2.0 * x, 2.0),
            PacketShape::Gaussian => (1.0, 0.0, 0.0),
        }
    }

    /// `f(x)`.
    pub fn f(&self, x: f64) -> f64 {
        self.amplitude * self.prefactor(x).0 * self.gaussian(x)
    }

    /// `f'(x)`.
    pub fn df(&self, x: f64) -> f64 {
        let (p, dp, _) = self.prefactor(x);
        let s2 = self.width * self.width;
        let q = -(x - self.center) / s2;
        self.amplitude * (dp + p * q) * self.gaussian(x)
    }

    /// `f''(x)`.
    pub fn d2f(&self, x: f64) -> f64 {
        let (p, dp, d2p) = self.prefactor(x);
        let s2 = self.width * self.width;
        let q = -(x - self.center) / s2;
        // (p e)'' = (p'' + 2 p' q + p (q² + q')) e with q' = -1/s²
        self.amplitude * (d2p + 2.0 * dp * q + p * (q * q - 1.0 / s2)) * self.gaussian(x)
    }

    /// Initial velocity `g = -c f'`, the right-moving choice for the free
    /// wave equation.
    pub fn g(&self, x: f64) -> f64 {
        -self.wave_speed * self.df(x)
    }

    /// Interval outside which `f` is below `exp(-half_width_sigmas²/2)`
    /// relative to the envelope.
    pub fn support(&self, half_width_sigmas: f64) -> (f64, f64) {
        (
            self.center - half_width_sigmas * self.width,
            self.center + half_width_sigmas * self.width,
        )
    }
}

/// `f(x)` for `spec`.
pub fn eval_f(spec: &WavePacket, x: f64) -> f64 {
    spec.f(x)
}

/// `g(x) = -c f'(x)` for `spec`.
pub fn eval_g(spec: &WavePacket, x: f64) -> f64 {
    spec.g(x)
}

/// `|f̂(ω)|` with `f̂(ω) = ∫ f(x) e^{-iωx} dx`, evaluated by a trapezoidal
/// sum over the packet support (spectrally accurate for this smooth,
/// rapidly decaying integrand).
///
/// `omega_grid` must be increasing with at least 16 points per unit
/// frequency.
pub fn fourier_magnitude(spec: &WavePacket, omega_grid: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if omega_grid.len() < 2 {
        return Err(Error::InsufficientData(
            "frequency grid needs at least two points".into(),
        ));
    }
    if omega_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("omega_grid", "must be strictly increasing"));
    }
    let span = omega_grid[omega_grid.len() - 1] - omega_grid[0];
    let per_unit = (omega_grid.len() - 1) as f64 / span;
    if per_unit < 16.0 {
        return Err(Error::GridTooCoarse { per_unit });
    }

    let (lo, hi) = spec.support(16.0);
    let dx = spec.width / 32.0;
    let n = ((hi - lo) / dx).ceil() as usize;
    let samples: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let x = lo + k as f64 * dx;
            (x, spec.f(x))
        })
        .collect();
    Ok(omega_grid
        .iter()
        .map(|&w| {
            let (re, im) = samples.iter().fold((0.0, 0.0), |(re, im), &(x, fx)| {
                let (s, c) = (w * x).sin_cos();
                (re + fx * c, im - fx * s)
            });
            dx * re.hypot(im)
        })
        .collect())
}

/// Frequency at which `|f̂|` is largest on `omega_grid`.
pub fn spectral_peak(spec: &WavePacket, omega_grid: &[f64]) -> Result<f64> {
    let mags = fourier_magnitude(spec, omega_grid)?;
    let (k, _) = mags.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (k, &m)| if m > best.1 { (k, m) } else { best },
    );
    Ok(omega_grid[k])
}

/// Residuals of the junction conditions at `x = 0` for the packet used as
/// initial displacement under a step `0 | a2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionReport {
    pub f_at_origin: f64,
    /// `|f(0⁺) - f(0⁻)|`
    pub value_jump: f64,
    /// `|f'(0⁺) - f'(0⁻)|`
    pub slope_jump: f64,
    /// `|f''(0⁺) - f''(0⁻) - (a2 / c²) f(0)|`
    pub curvature_residual: f64,
    pub passed: bool,
}

/// Residual tolerance used by [`check_transmission_conditions`].
pub const TRANSMISSION_TOLERANCE: f64 = 1e-14;

/// Checks continuity of `f` and `f'` at the junction and the second-order
/// jump condition `f''(0⁺) - f''(0⁻) = (a2 / c²) f(0)`, which the packet
/// must satisfy to be a regular enough initial state.
pub fn check_transmission_conditions(spec: &WavePacket, a2: f64, wave_speed: f64) -> TransmissionReport {
    let (left, right) = (-0.0_f64, 0.0_f64);
    let f0 = spec.f(0.0);
    let value_jump = (spec.f(right) - spec.f(left)).abs();
    let slope_jump = (spec.df(right) - spec.df(left)).abs();
    let curvature_residual = (spec.d2f(right) - spec.d2f(left) - a2 / (wave_speed * wave_speed) * f0).abs();
    let passed = [f0.abs(), value_jump, slope_jump, curvature_residual]
        .iter()
        .all(|&r| r <= TRANSMISSION_TOLERANCE);
    TransmissionReport {
        f_at_origin: f0,
        value_jump,
        slope_jump,
        curvature_residual,
        passed,
    }
}
