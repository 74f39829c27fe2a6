//! Band-stop repair of fringed captures.
//!
//! The fringe pattern varies along one axis only, so every column (or row,
//! for steep tilts) is filtered as an independent 1-D signal. The stop band
//! is a product of Butterworth notches at the fundamental and its harmonics,
//! with harmonics above Nyquist folded back into `[0, 0.5]`. The zero
//! frequency is always passed unchanged so the image mean survives.

use crate::detector::{feature_distance, Detector, DetectorVerdict, Embedder, EmbeddingError, OracleError, VerifierConfig};
use crate::io::Image;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shortest profile the frequency estimate accepts.
pub const MIN_ESTIMATE_ROWS: usize = 16;

#[derive(Debug, Error)]
pub enum DefenseError {
    #[error("invalid filter: {0}")]
    Spec(String),
    #[error("frequency estimate needs at least {MIN_ESTIMATE_ROWS} samples, got {0}")]
    TooShort(usize),
    #[error("no fringe detected (flat profile)")]
    NoFringe,
    #[error("defense set is empty")]
    EmptySet,
    #[error("member {0} was not a successful adversarial example before repair")]
    NotAdversarial(usize),
    #[error("tilt {0} deg outside [-90, 90]")]
    Tilt(f64),
    #[error("oracle failed: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Fundamental, cycles per row.
    pub center_cpr: f64,
    /// Full stop-band width, cycles per row.
    pub bandwidth_cpr: f64,
    pub order: u32,
    pub harmonics: u32,
}

pub const DEFAULT_ORDER: u32 = 4;
pub const DEFAULT_BANDWIDTH_RATIO: f64 = 0.25;
pub const DEFAULT_HARMONICS: u32 = 3;

impl FilterSpec {
    pub fn new(center_cpr: f64, bandwidth_cpr: f64, order: u32, harmonics: u32) -> Result<Self, DefenseError> {
        let spec = Self {
            center_cpr,
            bandwidth_cpr,
            order,
            harmonics,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Order 4, bandwidth `f0 / 4`, three harmonics.
    pub fn tuned(center_cpr: f64) -> Result<Self, DefenseError> {
        Self::new(center_cpr, center_cpr * DEFAULT_BANDWIDTH_RATIO, DEFAULT_ORDER, DEFAULT_HARMONICS)
    }

    pub fn validate(&self) -> Result<(), DefenseError> {
        if !(self.center_cpr > 0.0 && self.center_cpr < 0.5) {
            return Err(DefenseError::Spec(format!("center {} not in (0, 0.5)", self.center_cpr)));
        }
        if !(self.bandwidth_cpr.is_finite() && self.bandwidth_cpr > 0.0) {
            return Err(DefenseError::Spec(format!("bandwidth {} must be > 0", self.bandwidth_cpr)));
        }
        if self.order < 1 || self.harmonics < 1 {
            return Err(DefenseError::Spec("order and harmonics must be >= 1".into()));
        }
        Ok(())
    }

    /// Magnitude response at `f` cycles per row, `f` in `[0, 0.5]`.
    pub fn gain(&self, f: f64) -> f64 {
        if f == 0.0 {
            return 1.0;
        }
        let half = self.bandwidth_cpr / 2.0;
        let mut g = 1.0;
        for h in 1..=self.harmonics {
            let x = h as f64 * self.center_cpr;
            let center = (x - x.round()).abs();
            let r = ((f - center) / half).powi(2 * self.order as i32);
            g *= 1.0 - 1.0 / (1.0 + r);
        }
        g
    }
}

fn dft_magnitudes(signal: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// Frequency (cycles per sample) of the strongest DFT peak in `(0, 0.5)` of
/// the mean-removed `profile`.
pub fn estimate_profile_frequency(profile: &[f64]) -> Result<f64, DefenseError> {
    let n = profile.len();
    if n < MIN_ESTIMATE_ROWS {
        return Err(DefenseError::TooShort(n));
    }
    let mean = profile.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = profile.iter().map(|v| v - mean).collect();
    let scale = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if centered.iter().all(|v| v.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(DefenseError::NoFringe);
    }
    let mags = dft_magnitudes(&centered);
    let mut best = 1;
    for k in 1..n {
        if 2 * k >= n {
            break;
        }
        if mags[k] > mags[best] {
            best = k;
        }
    }
    if 2 * best >= n {
        return Err(DefenseError::NoFringe);
    }
    Ok(best as f64 / n as f64)
}

/// Fringe frequency in cycles per row from the column-averaged luminance.
pub fn estimate_fringe_frequency(image: &Image) -> Result<f64, DefenseError> {
    estimate_profile_frequency(&image.row_means())
}

fn response(spec: &FilterSpec, n: usize) -> Vec<f64> {
    (0..n).map(|k| spec.gain(k.min(n - k) as f64 / n as f64)).collect()
}

struct Filter1d {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    gain: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl Filter1d {
    fn new(spec: &FilterSpec, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            gain: response(spec, n),
            buf: vec![Complex::default(); n],
        }
    }

    fn apply(&mut self, signal: &mut [f64]) {
        let n = signal.len() as f64;
        for (b, &v) in self.buf.iter_mut().zip(signal.iter()) {
            *b = Complex::new(v, 0.0);
        }
        self.fft.process(&mut self.buf);
        for (b, g) in self.buf.iter_mut().zip(&self.gain) {
            *b *= *g;
        }
        self.ifft.process(&mut self.buf);
        for (v, b) in signal.iter_mut().zip(&self.buf) {
            *v = b.re / n;
        }
    }
}

/// Filters a single profile; no clamping.
pub fn filter_profile(profile: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, DefenseError> {
    spec.validate()?;
    let mut out = profile.to_vec();
    if !out.is_empty() {
        Filter1d::new(spec, out.len()).apply(&mut out);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Columns,
    Rows,
}

fn filter_along(image: &Image, spec: &FilterSpec, axis: Axis) -> Image {
    let (rows, cols) = (image.rows(), image.cols());
    let nc = image.channels().count();
    let mut data = image.data().to_vec();
    let (len, lines) = match axis {
        Axis::Columns => (rows, cols),
        Axis::Rows => (cols, rows),
    };
    let mut filter = Filter1d::new(spec, len);
    let mut line = vec![0.0; len];
    for l in 0..lines {
        for c in 0..nc {
            let idx = |t: usize| match axis {
                Axis::Columns => (t * cols + l) * nc + c,
                Axis::Rows => (l * cols + t) * nc + c,
            };
            for (t, v) in line.iter_mut().enumerate() {
                *v = data[idx(t)];
            }
            filter.apply(&mut line);
            for (t, v) in line.iter().enumerate() {
                data[idx(t)] = v.max(0.0);
            }
        }
    }
    Image::new(rows, cols, image.channels(), data).expect("filtered samples are finite and clamped")
}

/// Notch-filters every column along the row axis. Output is clamped to `>= 0`.
pub fn butterworth_notch(image: &Image, spec: &FilterSpec) -> Result<Image, DefenseError> {
    spec.validate()?;
    Ok(filter_along(image, spec, Axis::Columns))
}

/// Notch filter for fringes tilted by `tilt_deg`, whose fundamental along
/// the fringe normal is `spec.center_cpr`. The filter runs along whichever
/// image axis the fringes cross more steeply, at the projected frequency.
pub fn butterworth_notch_tilted(image: &Image, spec: &FilterSpec, tilt_deg: f64) -> Result<Image, DefenseError> {
    spec.validate()?;
    if tilt_deg.is_nan() || tilt_deg.abs() > 90.0 {
        return Err(DefenseError::Tilt(tilt_deg));
    }
    let (s, c) = tilt_deg.to_radians().sin_cos();
    let (axis, factor) = if c.abs() >= s.abs() { (Axis::Columns, c.abs()) } else { (Axis::Rows, s.abs()) };
    let projected = FilterSpec {
        center_cpr: spec.center_cpr * factor,
        bandwidth_cpr: spec.bandwidth_cpr * factor,
        ..*spec
    };
    projected.validate()?;
    Ok(filter_along(image, &projected, axis))
}

/// Attenuation in dB of the DFT bin nearest `f0` between two profiles.
pub fn suppression_db(before: &[f64], after: &[f64], f0: f64) -> f64 {
    let bin = |p: &[f64]| {
        let k = (f0 * p.len() as f64).round() as usize;
        dft_magnitudes(p)[k.min(p.len() - 1)]
    };
    20.0 * (bin(before) / bin(after)).log10()
}

/// How a member is repaired before being shown to the oracle again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Repair {
    Identity,
    Fixed(FilterSpec),
    /// Notch centred on each image's own estimated fringe frequency, with
    /// bandwidth `bandwidth_ratio * f0`.
    Estimated {
        order: u32,
        bandwidth_ratio: f64,
        harmonics: u32,
    },
}

impl Repair {
    pub fn tuned_estimate() -> Self {
        Repair::Estimated {
            order: DEFAULT_ORDER,
            bandwidth_ratio: DEFAULT_BANDWIDTH_RATIO,
            harmonics: DEFAULT_HARMONICS,
        }
    }

    /// The filter that would be applied to `image`, if any.
    pub fn spec_for(&self, image: &Image) -> Result<Option<FilterSpec>, DefenseError> {
        match *self {
            Repair::Identity => Ok(None),
            Repair::Fixed(spec) => Ok(Some(spec)),
            Repair::Estimated {
                order,
                bandwidth_ratio,
                harmonics,
            } => {
                let f0 = estimate_fringe_frequency(image)?;
                Ok(Some(FilterSpec::new(f0, f0 * bandwidth_ratio, order, harmonics)?))
            }
        }
    }

    pub fn apply(&self, image: &Image) -> Result<Image, DefenseError> {
        match self.spec_for(image) {
            Ok(Some(spec)) => butterworth_notch(image, &spec),
            Ok(None) => Ok(image.clone()),
            // nothing to notch
            Err(DefenseError::NoFringe) => Ok(image.clone()),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenseOutcome {
    pub members: usize,
    pub flipped: usize,
    pub rate: f64,
}

impl DefenseOutcome {
    fn new(members: usize, flipped: usize) -> Self {
        Self {
            members,
            flipped,
            rate: flipped as f64 / members as f64,
        }
    }
}

/// Fraction of hidden faces the detector finds again after repair.
pub fn evaluate_defense_dos<D: Detector>(
    set: &[Image],
    repair: &Repair,
    detector: &mut D,
) -> Result<DefenseOutcome, DefenseError> {
    if set.is_empty() {
        return Err(DefenseError::EmptySet);
    }
    let mut flipped = 0;
    for (i, adv) in set.iter().enumerate() {
        if detector.detect(adv)? != DetectorVerdict::Absent {
            return Err(DefenseError::NotAdversarial(i));
        }
        let fixed = repair.apply(adv)?;
        flipped += usize::from(detector.detect(&fixed)? == DetectorVerdict::Present);
    }
    Ok(DefenseOutcome::new(set.len(), flipped))
}

/// Fraction of falsely matched pairs pushed back above the threshold.
pub fn evaluate_defense_dodging<E: Embedder>(
    set: &[(Image, Image)],
    repair: &Repair,
    embedder: &mut E,
    verifier: &VerifierConfig,
) -> Result<DefenseOutcome, DefenseError> {
    if set.is_empty() {
        return Err(DefenseError::EmptySet);
    }
    let mut dist = |a: &Image, b: &Image| -> Result<f64, DefenseError> {
        Ok(feature_distance(&embedder.embed(a)?, &embedder.embed(b)?)?)
    };
    let mut flipped = 0;
    for (i, (x, u)) in set.iter().enumerate() {
        if dist(x, u)? > verifier.threshold() {
            return Err(DefenseError::NotAdversarial(i));
        }
        let after = dist(&repair.apply(x)?, &repair.apply(u)?)?;
        flipped += usize::from(after > verifier.threshold());
    }
    Ok(DefenseOutcome::new(set.len(), flipped))
}
