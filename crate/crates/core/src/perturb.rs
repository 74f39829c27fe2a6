//! Fringe geometry and its relation to the lamp drive.
//!
//! A bright fringe lasts `b = Tp * D / t_d` rows and a dark one
//! `s = Tp * (1 - D) / t_d` rows. Both are kept real-valued; rounding only
//! happens when run lengths are measured on a rendered profile.

use crate::sensor::SensorConfig;
use crate::signal::{PulseParams, SignalError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("pulse period must be > 0, got {0}")]
    Period(f64),
    #[error("interline delay must be > 0, got {0}")]
    InterlineDelay(f64),
    #[error("duty cycle must lie in [0, 1], got {0}")]
    Duty(f64),
    #[error("fringe width must be > 0, got {0}")]
    Width(f64),
    #[error("fringe interval must be >= 0, got {0}")]
    Interval(f64),
    #[error("fringe width plus interval must be > 0")]
    ZeroPeriod,
    #[error("tilt must lie in [-90, 90] degrees, got {0}")]
    Tilt(f64),
    #[error("cannot parse fringe parameters {0:?}: expected \"b,s,alpha\"")]
    Syntax(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Attack parameters: bright fringe width, dark interval (both in rows) and
/// fringe tilt in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTheta", into = "RawTheta")]
pub struct PerturbationParams {
    width_rows: f64,
    interval_rows: f64,
    tilt_deg: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    b: f64,
    s: f64,
    alpha_deg: f64,
}

impl TryFrom<RawTheta> for PerturbationParams {
    type Error = PerturbError;
    fn try_from(r: RawTheta) -> Result<Self, PerturbError> {
        PerturbationParams::new(r.b, r.s, r.alpha_deg)
    }
}

impl From<PerturbationParams> for RawTheta {
    fn from(t: PerturbationParams) -> Self {
        RawTheta {
            b: t.width_rows,
            s: t.interval_rows,
            alpha_deg: t.tilt_deg,
        }
    }
}

impl PerturbationParams {
    pub fn new(width_rows: f64, interval_rows: f64, tilt_deg: f64) -> Result<Self, PerturbError> {
        if !(width_rows.is_finite() && width_rows > 0.0) {
            return Err(PerturbError::Width(width_rows));
        }
        if !(interval_rows.is_finite() && interval_rows >= 0.0) {
            return Err(PerturbError::Interval(interval_rows));
        }
        if !(tilt_deg.is_finite() && (-90.0..=90.0).contains(&tilt_deg)) {
            return Err(PerturbError::Tilt(tilt_deg));
        }
        Ok(Self {
            width_rows,
            interval_rows,
            tilt_deg,
        })
    }

    pub fn width_rows(&self) -> f64 {
        self.width_rows
    }

    pub fn interval_rows(&self) -> f64 {
        self.interval_rows
    }

    pub fn tilt_deg(&self) -> f64 {
        self.tilt_deg
    }

    /// Fringe period in rows.
    pub fn period_rows(&self) -> f64 {
        self.width_rows + self.interval_rows
    }
}

impl fmt::Display for PerturbationParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.width_rows, self.interval_rows, self.tilt_deg)
    }
}

impl FromStr for PerturbationParams {
    type Err = PerturbError;

    /// Parses `b,s,alpha`.
    fn from_str(text: &str) -> Result<Self, PerturbError> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let [b, s, a] = parts.as_slice() else {
            return Err(PerturbError::Syntax(text.to_string()));
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| PerturbError::Syntax(text.to_string()))
        };
        PerturbationParams::new(num(b)?, num(s)?, num(a)?)
    }
}

/// `(b, s)` produced by a lamp with period `period_us` and duty `duty`.
pub fn pulse_to_fringe(period_us: f64, duty: f64, interline_delay_us: f64) -> Result<(f64, f64), PerturbError> {
    if !(period_us.is_finite() && period_us > 0.0) {
        return Err(PerturbError::Period(period_us));
    }
    if !(interline_delay_us.is_finite() && interline_delay_us > 0.0) {
        return Err(PerturbError::InterlineDelay(interline_delay_us));
    }
    if !(0.0..=1.0).contains(&duty) {
        return Err(PerturbError::Duty(duty));
    }
    Ok((
        period_us * duty / interline_delay_us,
        period_us * (1.0 - duty) / interline_delay_us,
    ))
}

/// `(Tp, D)` realizing fringes of width `b` and interval `s`.
pub fn fringe_to_pulse(width_rows: f64, interval_rows: f64, interline_delay_us: f64) -> Result<(f64, f64), PerturbError> {
    if !(width_rows.is_finite() && width_rows >= 0.0) {
        return Err(PerturbError::Width(width_rows));
    }
    if !(interval_rows.is_finite() && interval_rows >= 0.0) {
        return Err(PerturbError::Interval(interval_rows));
    }
    if !(interline_delay_us.is_finite() && interline_delay_us > 0.0) {
        return Err(PerturbError::InterlineDelay(interline_delay_us));
    }
    let period_rows = width_rows + interval_rows;
    if period_rows <= 0.0 {
        return Err(PerturbError::ZeroPeriod);
    }
    Ok((period_rows * interline_delay_us, width_rows / period_rows))
}

/// Lamp drive that paints `theta` on a sensor with timing `cfg`.
/// Tilt is not part of the drive; pass `theta.tilt_deg()` to the renderer.
pub fn theta_to_signal(
    theta: &PerturbationParams,
    cfg: &SensorConfig,
    levels: (f64, f64),
    phase_us: f64,
) -> Result<PulseParams, PerturbError> {
    let (period, duty) = fringe_to_pulse(theta.width_rows, theta.interval_rows, cfg.interline_delay_us())?;
    Ok(PulseParams::new(period, duty, phase_us, levels.0, levels.1)?)
}

/// Run lengths measured on a row profile.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FringeRuns {
    /// Interior runs of rows at >= 99% of the maximum gain.
    pub bright: Vec<usize>,
    /// Interior runs of rows within 1% (of the contrast) of the minimum gain.
    pub dark: Vec<usize>,
}

/// Measures bright and dark runs, ignoring runs that touch either end of the
/// profile (they may be truncated by the frame).
pub fn measure_runs(profile: &[f64]) -> FringeRuns {
    let max = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = profile.iter().cloned().fold(f64::INFINITY, f64::min);
    if profile.is_empty() || max - min <= 1e-12 * max.abs().max(1.0) {
        return FringeRuns::default();
    }
    let bright = interior_runs(profile, |v| v >= 0.99 * max);
    let dark = interior_runs(profile, |v| v <= min + 0.01 * (max - min));
    FringeRuns { bright, dark }
}

fn interior_runs(profile: &[f64], pred: impl Fn(f64) -> bool) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in profile.iter().enumerate() {
        match (pred(v), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if s > 0 {
                    runs.push(i - s);
                }
                start = None;
            }
            _ => {}
        }
    }
    runs
}
