//! Trend extraction for observable time series: Nadaraya–Watson kernel
//! smoothing, least-squares lines with Pearson correlation, and level
//! crossing times.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Gaussian,
    /// Uniform weights on `|t - t_i| <= bandwidth`.
    MovingAverage,
}

impl Kernel {
    fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp(),
            Kernel::MovingAverage => {
                if u.abs() <= 1.0 + 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Support radius in bandwidth units.
    fn reach(self) -> f64 {
        match self {
            Kernel::Gaussian => 8.0,
            _ => 1.0 + 1e-12,
        }
    }
}

/// Default bandwidth in sample spacings.
pub const DEFAULT_BANDWIDTH_SPACINGS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSpec {
    pub kernel: Kernel,
    /// Time units; `None` means 20 sample spacings.
    pub bandwidth: Option<f64>,
}

impl SmoothingSpec {
    pub fn new(kernel: Kernel, bandwidth: f64) -> Self {
        Self {
            kernel,
            bandwidth: Some(bandwidth),
        }
    }
}

fn mean_spacing(t: &[f64]) -> f64 {
    (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64
}

fn check_series(t: &[f64], y: &[f64]) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            actual: y.len(),
        });
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("t", "times must be strictly increasing"));
    }
    Ok(())
}

/// Nadaraya–Watson smoother: `ŷ_i = Σ_j K((t_j - t_i)/bw) y_j / Σ_j K(·)`.
pub fn kernel_smooth(t: &[f64], y: &[f64], spec: &SmoothingSpec) -> Result<Vec<f64>> {
    check_series(t, y)?;
    if t.len() < 2 {
        return Err(Error::InsufficientData("smoothing needs at least two samples".into()));
    }
    let spacing = mean_spacing(t);
    let bw = spec.bandwidth.unwrap_or(DEFAULT_BANDWIDTH_SPACINGS * spacing);
    let minimum = 2.0 * spacing;
    if !(bw >= minimum * (1.0 - 1e-12)) {
        return Err(Error::BandwidthTooSmall { bandwidth: bw, minimum });
    }
    let reach = spec.kernel.reach() * bw;
    Ok(t.iter()
        .map(|&ti| {
            let lo = t.partition_point(|&tj| tj < ti - reach);
            let hi = t.partition_point(|&tj| tj <= ti + reach);
            let (num, den) = (lo..hi).fold((0.0, 0.0), |(num, den), j| {
                let w = spec.kernel.weight((t[j] - ti) / bw);
                (num + w * y[j], den + w)
            });
            num / den
        })
        .collect())
}

/// Least-squares line `y = slope t + intercept` over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of `(t, y)`; 0 when `y` is constant.
    pub r: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    /// Set when `y` has zero variance and `r` is undefined.
    pub degenerate: bool,
}

impl RegressionResult {
    pub fn predict(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

fn select(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    t.iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= lo && ti <= hi)
        .map(|(&ti, &yi)| (ti, yi))
        .unzip()
}

/// Ordinary least squares of `y` on `t` restricted to `window` (inclusive;
/// `None` uses every sample).
pub fn linear_fit(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<RegressionResult> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            actual: y.len(),
        });
    }
    let (ts, ys) = select(t, y, window);
    let n = ts.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs at least two points, window holds {n}"
        )));
    }
    let nf = n as f64;
    let t_mean = ts.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (ti, yi) in ts.iter().zip(&ys) {
        let dt = ti - t_mean;
        let dy = yi - y_mean;
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("linear fit needs two distinct times".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let degenerate = syy == 0.0;
    let r = if degenerate {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r,
        window: (ts[0], ts[n - 1]),
        n_points: n,
        degenerate,
    })
}

/// Least-squares line of `ln y` on `t`; `y` must be positive in the window.
pub fn log_linear_fit(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<RegressionResult> {
    let (ts, ys) = select(t, y, window);
    if let Some(v) = ys.iter().find(|&&v| !(v > 0.0)) {
        return Err(invalid("y", format!("log-linear fit needs positive values, got {v}")));
    }
    let logs: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&ts, &logs, None)
}

/// First upward crossing of `level`, linearly interpolated between samples.
pub fn crossing_time(t: &[f64], y: &[f64], level: f64) -> Option<f64> {
    t.windows(2).zip(y.windows(2)).find_map(|(tw, yw)| {
        (yw[0] < level && yw[1] >= level).then(|| tw[0] + (level - yw[0]) / (yw[1] - yw[0]) * (tw[1] - tw[0]))
    })
}

/// How the regression window is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", deny_unknown_fields)]
pub enum WindowPolicy {
    /// From the detected end of the impact to the end of the series.
    Auto {
        /// Allowed spread of the smoothed mean velocity once settled.
        #[serde(default = "default_settle_tolerance")]
        settle_tolerance: f64,
    },
    Fixed {
        t_lo: f64,
        t_hi: f64,
    },
}

fn default_settle_tolerance() -> f64 {
    0.05
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::Auto {
            settle_tolerance: default_settle_tolerance(),
        }
    }
}

/// Relative change of σ that marks the start of the barrier interaction.
pub const DEPARTURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendSettings {
    pub smoothing: SmoothingSpec,
    pub window: WindowPolicy,
    /// Regress the kernel-smoothed series instead of the raw one.
    pub fit_smoothed: bool,
}

/// Impact timing detected from the mean and σ series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactWindow {
    /// First time σ leaves `σ(0)` by more than 1 %.
    pub departure: Option<f64>,
    /// Time after which the smoothed mean velocity has settled.
    pub settled: Option<f64>,
    pub window: (f64, f64),
    /// The settle test failed and the last third of the series was used.
    pub fallback: bool,
}

fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (y[b] - y[a]) / (t[b] - t[a])
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Locates the post-impact regime.
///
/// The impact starts when σ departs from its initial value by 1 %. It ends
/// at the first later sample from which the derivative of the smoothed mean
/// stays within `settle_tolerance` of its median until one bandwidth before
/// the end of the series (the smoother is one-sided there).
pub fn detect_impact_window(
    t: &[f64],
    mean: &[f64],
    sigma: &[f64],
    smoothing: &SmoothingSpec,
    settle_tolerance: f64,
) -> Result<ImpactWindow> {
    check_series(t, mean)?;
    check_series(t, sigma)?;
    let n = t.len();
    if n < 4 {
        return Err(Error::InsufficientData(
            "impact detection needs at least four samples".into(),
        ));
    }
    let t_last = t[n - 1];
    let fallback_window = || (t[(2 * n) / 3], t_last);
    let departure_idx = sigma
        .iter()
        .position(|s| (s - sigma[0]).abs() > DEPARTURE_FRACTION * sigma[0]);
    let Some(dep) = departure_idx else {
        return Ok(ImpactWindow {
            departure: None,
            settled: None,
            window: (t[0], t_last),
            fallback: false,
        });
    };

    let smoothed = kernel_smooth(t, mean, smoothing)?;
    let velocity = derivative(t, &smoothed);
    let bw = smoothing
        .bandwidth
        .unwrap_or(DEFAULT_BANDWIDTH_SPACINGS * mean_spacing(t));
    let zone_end = t.partition_point(|&ti| ti <= t_last - bw);
    let min_points = 10.max(n / 5);

    let settled = (dep..zone_end).find(|&i| {
        let tail = &velocity[i..zone_end];
        let med = median(tail);
        tail.iter().all(|v| (v - med).abs() <= settle_tolerance)
    });
    match settled {
        Some(i) if n - i >= min_points => Ok(ImpactWindow {
            departure: Some(t[dep]),
            settled: Some(t[i]),
            window: (t[i], t_last),
            fallback: false,
        }),
        _ => Ok(ImpactWindow {
            departure: Some(t[dep]),
            settled: None,
            window: fallback_window(),
            fallback: true,
        }),
    }
}

/// Regression summary of one run: `mean = A t + B` (r) and
/// `σ = A₁ t + B₁` (r₁) over the post-impact window, plus timing
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub impact: ImpactWindow,
    /// Mean fit over `[t_first, departure]`, when the run has an impact.
    pub pre_impact: Option<RegressionResult>,
    pub mean_fit: RegressionResult,
    pub sigma_fit: RegressionResult,
    /// Fit of `ln σ` over the same window.
    pub sigma_log_fit: Option<RegressionResult>,
    /// First upward zero crossing of the mean.
    pub t0: Option<f64>,
    pub sigma_initial: f64,
    pub sigma_min: f64,
    pub t_sigma_min: f64,
    pub sigma_final: f64,
    /// Largest mean position and when it occurs (turning point of the
    /// reflected packet).
    pub mean_peak: f64,
    pub t_mean_peak: f64,
}

/// Runs smoothing, window detection and the two line fits.
pub fn analyze_trend(t: &[f64], mean: &[f64], sigma: &[f64], settings: &TrendSettings) -> Result<TrendReport> {
    check_series(t, mean)?;
    check_series(t, sigma)?;
    let n = t.len();
    if n < 4 {
        return Err(Error::InsufficientData(
            "trend analysis needs at least four samples".into(),
        ));
    }
    let impact = match settings.window {
        WindowPolicy::Auto { settle_tolerance } => {
            detect_impact_window(t, mean, sigma, &settings.smoothing, settle_tolerance)?
        }
        WindowPolicy::Fixed { t_lo, t_hi } => {
            if !(t_lo < t_hi) {
                return Err(invalid("window", format!("need t_lo < t_hi, got [{t_lo}, {t_hi}]")));
            }
            let auto = detect_impact_window(t, mean, sigma, &settings.smoothing, default_settle_tolerance())?;
            ImpactWindow {
                window: (t_lo, t_hi),
                fallback: false,
                ..auto
            }
        }
    };

    let (fit_mean, fit_sigma) = if settings.fit_smoothed {
        (
            kernel_smooth(t, mean, &settings.smoothing)?,
            kernel_smooth(t, sigma, &settings.smoothing)?,
        )
    } else {
        (mean.to_vec(), sigma.to_vec())
    };
    let window = Some(impact.window);
    let mean_fit = linear_fit(t, &fit_mean, window)?;
    let sigma_fit = linear_fit(t, &fit_sigma, window)?;
    let sigma_log_fit = log_linear_fit(t, &fit_sigma, window).ok();
    let pre_impact = impact.departure.and_then(|d| linear_fit(t, mean, Some((t[0], d))).ok());

    let (k_min, sigma_min) =
        sigma
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (k, s)| if s < b.1 { (k, s) } else { b });
    let (k_peak, mean_peak) = mean
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (k, m)| if m > b.1 { (k, m) } else { b });

    Ok(TrendReport {
        impact,
        pre_impact,
        mean_fit,
        sigma_fit,
        sigma_log_fit,
        t0: crossing_time(t, mean, 0.0),
        sigma_initial: sigma[0],
        sigma_min,
        t_sigma_min: t[k_min],
        sigma_final: sigma[n - 1],
        mean_peak,
        t_mean_peak: t[k_peak],
    })
}
