//! Success-rate sweeps over lamp and capture conditions.
//!
//! Each condition fixes one lamp drive (or steady light), one tilt and one
//! image scale standing in for shooting distance. Samples that already fail
//! under steady light at the same scale are left out of both counts. A rate
//! is NaN when no sample qualifies.

use super::{AttackError, Capture};
use crate::detector::{feature_distance, Detector, DetectorVerdict, Embedder, VerifierConfig};
use crate::io::{place_scaled, Image, RateRow};
use crate::sensor::expose;
use crate::signal::PulseParams;
use serde::{Deserialize, Serialize};

/// Distance at which a sample is used at its native scale.
pub const REFERENCE_DISTANCE_CM: f64 = 18.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCondition {
    pub label: String,
    /// `(period_us, duty)`; `None` is steady light.
    pub drive: Option<(f64, f64)>,
    pub tilt_deg: f64,
    pub scale: f64,
}

impl SweepCondition {
    pub fn normal() -> Self {
        Self {
            label: "normal".into(),
            drive: None,
            tilt_deg: 0.0,
            scale: 1.0,
        }
    }

    pub fn pulse(period_us: f64, duty: f64) -> Self {
        Self {
            label: format!("{period_us}us"),
            drive: Some((period_us, duty)),
            ..Self::normal()
        }
    }

    pub fn with_tilt(mut self, tilt_deg: f64) -> Self {
        self.tilt_deg = tilt_deg;
        self.label = format!("{}@{tilt_deg}deg", self.label);
        self
    }

    /// Shrinks samples as if shot from `cm` instead of the reference distance.
    pub fn at_distance(mut self, cm: f64) -> Self {
        self.scale = REFERENCE_DISTANCE_CM / cm;
        self.label = format!("{}@{cm}cm", self.label);
        self
    }

    pub fn is_normal(&self) -> bool {
        self.drive.is_none()
    }

    fn stage(&self, image: &Image) -> Result<Image, AttackError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(AttackError::Space(format!("condition {} has scale {}", self.label, self.scale)));
        }
        if self.scale == 1.0 {
            return Ok(image.clone());
        }
        Ok(place_scaled(image, self.scale, image.mean_luminance()))
    }

    fn capture(&self, capture: &Capture, image: &Image, iteration: usize, index: usize) -> Result<Image, AttackError> {
        let Some((period, duty)) = self.drive else {
            return capture.unmodulated(image);
        };
        let pulse = PulseParams::new(period, duty, 0.0, capture.level_on, capture.level_off)
            .map_err(crate::perturb::PerturbError::from)?;
        let pulse = capture.phased(pulse, iteration, index)?;
        let pattern = capture.pattern(image, &pulse, self.tilt_deg)?;
        Ok(expose(image, &pattern)?)
    }
}

fn row(model: &str, cond: &SweepCondition, n_b: usize, n_a: usize) -> RateRow {
    RateRow {
        model: model.to_string(),
        condition: cond.label.clone(),
        n_b,
        n_a,
        rate: if n_b == 0 { f64::NAN } else { n_a as f64 / n_b as f64 },
    }
}

/// Denial-of-service rate per condition: `n_b` samples detected under steady
/// light, `n_a` of them missed under the condition. For a steady-light
/// condition the row is the plain miss rate over all samples.
pub fn sweep_dos<D: Detector>(
    samples: &[Image],
    conditions: &[SweepCondition],
    detector: &mut D,
    capture: &Capture,
) -> Result<Vec<RateRow>, AttackError> {
    let model = detector.name();
    let mut rows = Vec::with_capacity(conditions.len());
    for (ci, cond) in conditions.iter().enumerate() {
        let (mut n_b, mut n_a) = (0, 0);
        for (si, sample) in samples.iter().enumerate() {
            let staged = cond.stage(sample)?;
            let baseline = detector
                .detect(&capture.unmodulated(&staged)?)
                .map_err(AttackError::OracleSetup)?;
            if cond.is_normal() {
                n_b += 1;
                n_a += usize::from(baseline == DetectorVerdict::Absent);
                continue;
            }
            if baseline == DetectorVerdict::Absent {
                continue;
            }
            n_b += 1;
            let adv = cond.capture(capture, &staged, ci, si)?;
            let verdict = detector.detect(&adv).map_err(AttackError::OracleSetup)?;
            n_a += usize::from(verdict == DetectorVerdict::Absent);
        }
        rows.push(row(&model, cond, n_b, n_a));
    }
    Ok(rows)
}

/// Dodging rate per condition over pairs of different faces: `m_b` pairs kept
/// apart under steady light, `m_a` of them matched under the condition. For a
/// steady-light condition the row is the false-match rate over all pairs.
pub fn sweep_dodging<E: Embedder>(
    pairs: &[(Image, Image)],
    conditions: &[SweepCondition],
    embedder: &mut E,
    verifier: &VerifierConfig,
    capture: &Capture,
) -> Result<Vec<RateRow>, AttackError> {
    let model = embedder.name();
    let mut dist = |a: &Image, b: &Image| -> Result<f64, AttackError> {
        let ea = embedder.embed(a).map_err(AttackError::OracleSetup)?;
        let eb = embedder.embed(b).map_err(AttackError::OracleSetup)?;
        Ok(feature_distance(&ea, &eb)?)
    };
    let delta = verifier.threshold();
    let mut rows = Vec::with_capacity(conditions.len());
    for (ci, cond) in conditions.iter().enumerate() {
        let (mut m_b, mut m_a) = (0, 0);
        for (pi, (x, u)) in pairs.iter().enumerate() {
            let (x, u) = (cond.stage(x)?, cond.stage(u)?);
            let before = dist(&capture.unmodulated(&x)?, &capture.unmodulated(&u)?)?;
            if cond.is_normal() {
                m_b += 1;
                m_a += usize::from(before <= delta);
                continue;
            }
            if before <= delta {
                continue;
            }
            m_b += 1;
            // both faces see the same lamp
            let after = dist(&cond.capture(capture, &x, ci, pi)?, &cond.capture(capture, &u, ci, pi)?)?;
            m_a += usize::from(after <= delta);
        }
        rows.push(row(&model, cond, m_b, m_a));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{ConstantDetector, StubFringeDetector, StubProfileEmbedder};
    use crate::io::synth_face;
    use crate::sensor::SensorConfig;

    fn capture() -> Capture {
        Capture::new(SensorConfig::new(25.0, 25.0, 1.0 / 25.0, 1, 1).unwrap())
    }

    #[test]
    fn labels() {
        assert_eq!(SweepCondition::normal().label, "normal");
        assert_eq!(SweepCondition::pulse(1000.0, 0.5).label, "1000us");
        let c = SweepCondition::pulse(600.0, 0.5).with_tilt(45.0).at_distance(36.0);
        assert_eq!(c.label, "600us@45deg@36cm");
        assert_eq!(c.scale, 0.5);
    }

    #[test]
    fn wide_fringes_hide_every_face() {
        let faces: Vec<Image> = (0..4).map(|s| synth_face(s, 160, 128).unwrap()).collect();
        // 2000 us at 25 us/row: 40 bright rows then 40 dark rows
        let conds = [SweepCondition::normal(), SweepCondition::pulse(2000.0, 0.5), SweepCondition::pulse(100.0, 0.5)];
        let rows = sweep_dos(&faces, &conds, &mut StubFringeDetector::default(), &capture()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].n_b, rows[0].n_a), (4, 0));
        assert_eq!((rows[1].n_b, rows[1].n_a, rows[1].rate), (4, 4, 1.0));
        assert_eq!((rows[2].n_b, rows[2].n_a, rows[2].rate), (4, 0, 0.0));
        assert_eq!(rows[1].model, "stub-fringe");
    }

    #[test]
    fn undetected_samples_are_excluded() {
        let faces = [synth_face(0, 64, 64).unwrap()];
        let rows = sweep_dos(
            &faces,
            &[SweepCondition::normal(), SweepCondition::pulse(1000.0, 0.5)],
            &mut ConstantDetector(DetectorVerdict::Absent),
            &capture(),
        )
        .unwrap();
        assert_eq!((rows[0].n_b, rows[0].n_a, rows[0].rate), (1, 1, 1.0));
        assert_eq!((rows[1].n_b, rows[1].n_a), (0, 0));
        assert!(rows[1].rate.is_nan());
    }

    #[test]
    fn dodging_sweep_counts_pairs() {
        let pairs: Vec<(Image, Image)> = (0..3)
            .map(|s| (synth_face(s, 128, 96).unwrap(), synth_face(s + 10, 128, 96).unwrap()))
            .collect();
        let mut emb = StubProfileEmbedder::new(16);
        let verifier = VerifierConfig::new(1e-9).unwrap();
        let rows = sweep_dodging(
            &pairs,
            &[SweepCondition::normal(), SweepCondition::pulse(1000.0, 0.5).at_distance(36.0)],
            &mut emb,
            &verifier,
            &capture(),
        )
        .unwrap();
        assert_eq!((rows[0].n_b, rows[0].n_a), (3, 0));
        assert_eq!(rows[1].n_b, 3);
        assert!(rows[1].n_a <= 3);
    }
}
