//! On-off keyed LED illumination.
//!
//! The lamp is modeled as a spatially uniform ideal square wave: it sits at
//! `level_on` for the first `duty * period_us` of every period (offset by
//! `phase_us`) and at `level_off` for the remainder. All times are in
//! microseconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Flicker above this frequency is not perceived by a human observer.
pub const FLICKER_FUSION_HZ: f64 = 200.0;

/// Duty cycle used by every experiment unless overridden.
pub const DEFAULT_DUTY: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("pulse period must be finite and > 0, got {0}")]
    Period(f64),
    #[error("duty cycle must lie in [0, 1], got {0}")]
    Duty(f64),
    #[error("luminance levels must satisfy 0 <= off <= on and on > 0, got on={on} off={off}")]
    Levels { on: f64, off: f64 },
    #[error("phase must be finite, got {0}")]
    Phase(f64),
}

/// Electrical drive of the modulated lamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPulse", into = "RawPulse")]
pub struct PulseParams {
    period_us: f64,
    duty: f64,
    phase_us: f64,
    level_on: f64,
    level_off: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    period_us: f64,
    duty: f64,
    #[serde(default)]
    phase_us: f64,
    #[serde(default = "one")]
    level_on: f64,
    #[serde(default)]
    level_off: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawPulse> for PulseParams {
    type Error = SignalError;

    fn try_from(raw: RawPulse) -> Result<Self, Self::Error> {
        PulseParams::new(raw.period_us, raw.duty, raw.phase_us, raw.level_on, raw.level_off)
    }
}

impl From<PulseParams> for RawPulse {
    fn from(p: PulseParams) -> Self {
        RawPulse {
            period_us: p.period_us,
            duty: p.duty,
            phase_us: p.phase_us,
            level_on: p.level_on,
            level_off: p.level_off,
        }
    }
}

impl PulseParams {
    /// Validates the drive parameters and folds `phase_us` into `[0, period_us)`.
    pub fn new(
        period_us: f64,
        duty: f64,
        phase_us: f64,
        level_on: f64,
        level_off: f64,
    ) -> Result<Self, SignalError> {
        if !(period_us.is_finite() && period_us > 0.0) {
            return Err(SignalError::Period(period_us));
        }
        if !(0.0..=1.0).contains(&duty) {
            return Err(SignalError::Duty(duty));
        }
        if !phase_us.is_finite() {
            return Err(SignalError::Phase(phase_us));
        }
        let levels_ok = level_on.is_finite()
            && level_off.is_finite()
            && level_on > 0.0
            && level_off >= 0.0
            && level_off <= level_on;
        if !levels_ok {
            return Err(SignalError::Levels {
                on: level_on,
                off: level_off,
            });
        }
        let mut phase = phase_us.rem_euclid(period_us);
        if phase >= period_us {
            phase = 0.0;
        }
        Ok(Self {
            period_us,
            duty,
            phase_us: phase,
            level_on,
            level_off,
        })
    }

    /// Full-contrast square wave (on = 1, off = 0, phase 0).
    pub fn square(period_us: f64, duty: f64) -> Result<Self, SignalError> {
        Self::new(period_us, duty, 0.0, 1.0, 0.0)
    }

    /// Unmodulated lamp at `level`.
    pub fn constant(level: f64) -> Result<Self, SignalError> {
        Self::new(1000.0, 1.0, 0.0, level, 0.0)
    }

    pub fn period_us(&self) -> f64 {
        self.period_us
    }

    pub fn duty(&self) -> f64 {
        self.duty
    }

    pub fn phase_us(&self) -> f64 {
        self.phase_us
    }

    pub fn level_on(&self) -> f64 {
        self.level_on
    }

    pub fn level_off(&self) -> f64 {
        self.level_off
    }

    pub fn with_phase(self, phase_us: f64) -> Result<Self, SignalError> {
        Self::new(
            self.period_us,
            self.duty,
            phase_us,
            self.level_on,
            self.level_off,
        )
    }

    pub fn frequency_hz(&self) -> f64 {
        1e6 / self.period_us
    }

    fn on_span(&self) -> f64 {
        self.duty * self.period_us
    }

    /// Instantaneous luminance.
    pub fn level_at(&self, t_us: f64) -> f64 {
        let x = (t_us - self.phase_us).rem_euclid(self.period_us);
        if x < self.on_span() {
            self.level_on
        } else {
            self.level_off
        }
    }

    /// On-time accumulated over `[phase_us, t]`, signed for `t < phase_us`.
    fn cumulative_on(&self, t_us: f64) -> f64 {
        let x = t_us - self.phase_us;
        let whole = (x / self.period_us).floor();
        let rem = (x - whole * self.period_us).clamp(0.0, self.period_us);
        whole * self.on_span() + rem.min(self.on_span())
    }

    /// Time within `[t_start, t_start + duration]` spent at `level_on`.
    pub fn on_overlap(&self, t_start_us: f64, duration_us: f64) -> f64 {
        if duration_us <= 0.0 {
            return 0.0;
        }
        let on = self.cumulative_on(t_start_us + duration_us) - self.cumulative_on(t_start_us);
        on.clamp(0.0, duration_us)
    }

    /// Integral of the luminance over `[t_start, t_start + duration]`.
    pub fn integrate_level(&self, t_start_us: f64, duration_us: f64) -> f64 {
        if duration_us <= 0.0 {
            return 0.0;
        }
        self.level_off * duration_us
            + (self.level_on - self.level_off) * self.on_overlap(t_start_us, duration_us)
    }

    /// True when the flicker is invisible: either the light is constant
    /// (duty 0 or 1) or its repetition frequency strictly exceeds `threshold_hz`.
    pub fn is_imperceptible(&self, threshold_hz: f64) -> bool {
        if self.duty <= 0.0 || self.duty >= 1.0 {
            return true;
        }
        self.frequency_hz() > threshold_hz
    }
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            period_us: 1000.0,
            duty: DEFAULT_DUTY,
            phase_us: 0.0,
            level_on: 1.0,
            level_off: 0.0,
        }
    }
}

/// [`PulseParams::is_imperceptible`] at the standard 200 Hz threshold.
pub fn check_imperceptible(p: &PulseParams) -> bool {
    p.is_imperceptible(FLICKER_FUSION_HZ)
}
