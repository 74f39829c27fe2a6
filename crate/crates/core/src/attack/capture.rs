use super::AttackError;
use crate::io::Image;
use crate::perturb::{theta_to_signal, PerturbationParams};
use crate::sensor::{expose, render_pattern, Pattern, SensorConfig};
use crate::signal::{PulseParams, FLICKER_FUSION_HZ};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Lamp phase relative to the start of the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    /// Lamp and sensor are synchronized at this offset (microseconds).
    Fixed(f64),
    /// A fresh uniform phase for every capture, drawn from a stream keyed by
    /// `(seed, iteration, grid index)` so results do not depend on scheduling.
    Randomized { seed: u64 },
}

/// Everything needed to turn an attack parameter into a captured frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capture {
    /// Timing and gain; the frame size is taken from each image.
    pub sensor: SensorConfig,
    pub level_on: f64,
    pub level_off: f64,
    pub phase: PhasePolicy,
    pub flicker_threshold_hz: f64,
}

impl Capture {
    pub fn new(sensor: SensorConfig) -> Self {
        Self {
            sensor,
            level_on: 1.0,
            level_off: 0.0,
            phase: PhasePolicy::Fixed(0.0),
            flicker_threshold_hz: FLICKER_FUSION_HZ,
        }
    }

    pub fn with_phase(mut self, phase: PhasePolicy) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_levels(mut self, on: f64, off: f64) -> Self {
        self.level_on = on;
        self.level_off = off;
        self
    }

    pub fn randomizes_phase(&self) -> bool {
        matches!(self.phase, PhasePolicy::Randomized { .. })
    }

    fn phase_for(&self, period_us: f64, iteration: usize, index: usize) -> f64 {
        match self.phase {
            PhasePolicy::Fixed(p) => p,
            PhasePolicy::Randomized { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((iteration as u64) << 32) | index as u64);
                rng.gen_range(0.0..period_us)
            }
        }
    }

    /// Lamp drive for `theta` on the `iteration`-th pass at grid position `index`.
    pub fn pulse(&self, theta: &PerturbationParams, iteration: usize, index: usize) -> Result<PulseParams, AttackError> {
        let base = theta_to_signal(theta, &self.sensor, (self.level_on, self.level_off), 0.0)?;
        self.phased(base, iteration, index)
    }

    /// `pulse` with its phase set by the policy for capture `(iteration, index)`.
    pub fn phased(&self, pulse: PulseParams, iteration: usize, index: usize) -> Result<PulseParams, AttackError> {
        let phase = self.phase_for(pulse.period_us(), iteration, index);
        Ok(pulse.with_phase(phase).map_err(crate::perturb::PerturbError::from)?)
    }

    /// Whether the lamp drive realizing `theta` flickers above the threshold.
    pub fn is_imperceptible(&self, theta: &PerturbationParams) -> Result<bool, AttackError> {
        let pulse = theta_to_signal(theta, &self.sensor, (self.level_on, self.level_off), 0.0)?;
        Ok(pulse.is_imperceptible(self.flicker_threshold_hz))
    }

    pub fn sensor_for(&self, image: &Image) -> Result<SensorConfig, AttackError> {
        Ok(self.sensor.with_frame(image.rows(), image.cols())?)
    }

    pub fn pattern(&self, image: &Image, pulse: &PulseParams, tilt_deg: f64) -> Result<Pattern, AttackError> {
        Ok(render_pattern(&self.sensor_for(image)?, pulse, tilt_deg)?)
    }

    /// `image` captured under the modulated lamp.
    pub fn apply(&self, image: &Image, theta: &PerturbationParams, iteration: usize, index: usize) -> Result<Image, AttackError> {
        let pulse = self.pulse(theta, iteration, index)?;
        let pattern = self.pattern(image, &pulse, theta.tilt_deg())?;
        Ok(expose(image, &pattern)?)
    }

    /// `image` captured under steady light at `level_on`.
    pub fn unmodulated(&self, image: &Image) -> Result<Image, AttackError> {
        let steady = PulseParams::constant(self.level_on).map_err(crate::perturb::PerturbError::from)?;
        let pattern = self.pattern(image, &steady, 0.0)?;
        Ok(expose(image, &pattern)?)
    }
}
