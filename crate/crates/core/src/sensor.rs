//! Rolling-shutter exposure.
//!
//! Row `i` integrates the illumination over `[t0 + i * t_d, t0 + i * t_d + t_e]`
//! and scales it by the conversion gain. Because the scene is static during
//! the exposure, the captured frame is the scene multiplied element-wise by a
//! gain field that only depends on the (possibly rotated) row coordinate.

use crate::io::{Encoding, Image, ImageError};
use crate::signal::PulseParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Interline delay used when none is given: a 960-row frame reads out in 24 ms.
pub const DEFAULT_INTERLINE_DELAY_US: f64 = 25.0;
/// 1/4000 s shutter.
pub const DEFAULT_EXPOSURE_US: f64 = 250.0;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("{name} must be finite and > 0, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("frame must have at least one row and column, got {rows}x{cols}")]
    EmptyFrame { rows: usize, cols: usize },
    #[error("row {row} out of range for {rows}-row sensor")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("tilt must lie in [-90, 90] degrees, got {0}")]
    Tilt(f64),
    #[error("image is {image_rows}x{image_cols} but pattern is {rows}x{cols}")]
    DimensionMismatch {
        image_rows: usize,
        image_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("exposure start must be finite, got {0}")]
    Start(f64),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSensor", into = "RawSensor")]
pub struct SensorConfig {
    interline_delay_us: f64,
    exposure_us: f64,
    gain: f64,
    rows: usize,
    cols: usize,
    start_us: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    interline_delay_us: f64,
    exposure_us: f64,
    gain: f64,
    rows: usize,
    cols: usize,
    #[serde(default)]
    start_us: f64,
}

impl TryFrom<RawSensor> for SensorConfig {
    type Error = SensorError;
    fn try_from(r: RawSensor) -> Result<Self, SensorError> {
        SensorConfig::new(r.interline_delay_us, r.exposure_us, r.gain, r.rows, r.cols)?
            .with_start(r.start_us)
    }
}

impl From<SensorConfig> for RawSensor {
    fn from(c: SensorConfig) -> Self {
        RawSensor {
            interline_delay_us: c.interline_delay_us,
            exposure_us: c.exposure_us,
            gain: c.gain,
            rows: c.rows,
            cols: c.cols,
            start_us: c.start_us,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, SensorError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(SensorError::NonPositive { name, value })
    }
}

impl SensorConfig {
    pub fn new(
        interline_delay_us: f64,
        exposure_us: f64,
        gain: f64,
        rows: usize,
        cols: usize,
    ) -> Result<Self, SensorError> {
        if rows == 0 || cols == 0 {
            return Err(SensorError::EmptyFrame { rows, cols });
        }
        Ok(Self {
            interline_delay_us: positive("interline delay", interline_delay_us)?,
            exposure_us: positive("exposure", exposure_us)?,
            gain: positive("gain", gain)?,
            rows,
            cols,
            start_us: 0.0,
        })
    }

    pub fn with_start(mut self, start_us: f64) -> Result<Self, SensorError> {
        if !start_us.is_finite() {
            return Err(SensorError::Start(start_us));
        }
        self.start_us = start_us;
        Ok(self)
    }

    /// Same timing, resized frame.
    pub fn with_frame(mut self, rows: usize, cols: usize) -> Result<Self, SensorError> {
        if rows == 0 || cols == 0 {
            return Err(SensorError::EmptyFrame { rows, cols });
        }
        self.rows = rows;
        self.cols = cols;
        Ok(self)
    }

    pub fn interline_delay_us(&self) -> f64 {
        self.interline_delay_us
    }

    pub fn exposure_us(&self) -> f64 {
        self.exposure_us
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn start_us(&self) -> f64 {
        self.start_us
    }

    /// Exposure start of (possibly fractional) row coordinate `u`.
    pub fn row_start_us(&self, u: f64) -> f64 {
        self.start_us + u * self.interline_delay_us
    }

    /// Continuous gain profile `r(u)`.
    pub fn gain_at(&self, pulse: &PulseParams, u: f64) -> f64 {
        self.gain * pulse.integrate_level(self.row_start_us(u), self.exposure_us)
    }
}

impl Default for SensorConfig {
    /// 960x1280 frame, 25 us interline delay, 1/4000 s exposure and a gain
    /// that maps a fully lit exposure at unit luminance to 1.
    fn default() -> Self {
        Self {
            interline_delay_us: DEFAULT_INTERLINE_DELAY_US,
            exposure_us: DEFAULT_EXPOSURE_US,
            gain: 1.0 / DEFAULT_EXPOSURE_US,
            rows: 960,
            cols: 1280,
            start_us: 0.0,
        }
    }
}

/// Gain of row `row`.
pub fn row_gain(cfg: &SensorConfig, pulse: &PulseParams, row: usize) -> Result<f64, SensorError> {
    if row >= cfg.rows {
        return Err(SensorError::RowOutOfRange {
            row,
            rows: cfg.rows,
        });
    }
    Ok(cfg.gain_at(pulse, row as f64))
}

/// Per-pixel multiplicative gain field.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    gains: Vec<f64>,
    profile: Vec<f64>,
    tilt_deg: f64,
}

impl Pattern {
    /// Pattern with every gain equal to 1.
    pub fn identity(rows: usize, cols: usize) -> Pattern {
        Pattern {
            rows,
            cols,
            gains: vec![1.0; rows * cols],
            profile: vec![1.0; rows],
            tilt_deg: 0.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn gain(&self, row: usize, col: usize) -> f64 {
        self.gains[row * self.cols + col]
    }

    /// Untilted row profile `r(i)` the pattern was built from.
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn tilt_deg(&self) -> f64 {
        self.tilt_deg
    }

    /// Grayscale preview with gains divided by `full_scale`
    /// (normally `k * level_on * t_e`).
    pub fn preview(&self, full_scale: f64) -> Image {
        let data = self
            .gains
            .iter()
            .map(|g| (g / full_scale).max(0.0))
            .collect();
        Image::gray(self.rows, self.cols, data).expect("gains are finite and non-negative")
    }

    pub fn preview_bytes(&self, full_scale: f64, encoding: Encoding) -> Vec<u8> {
        crate::io::encode_image(&self.preview(full_scale), encoding)
    }
}

/// JSON echo of a rendered pattern: enough to rebuild it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternRecord {
    pub sensor: SensorConfig,
    pub pulse: PulseParams,
    pub tilt_deg: f64,
    pub profile: Vec<f64>,
}

impl PatternRecord {
    pub fn new(sensor: SensorConfig, pulse: PulseParams, pattern: &Pattern) -> Self {
        Self {
            sensor,
            pulse,
            tilt_deg: pattern.tilt_deg,
            profile: pattern.profile.clone(),
        }
    }
}

/// Renders the gain field for a lamp driven by `pulse`, with fringes rotated
/// by `tilt_deg`. Pixel `(i, j)` samples the continuous profile at
/// `u = i cos(tilt) - j sin(tilt)`.
pub fn render_pattern(cfg: &SensorConfig, pulse: &PulseParams, tilt_deg: f64) -> Result<Pattern, SensorError> {
    if !(tilt_deg.is_finite() && (-90.0..=90.0).contains(&tilt_deg)) {
        return Err(SensorError::Tilt(tilt_deg));
    }
    let (rows, cols) = (cfg.rows, cfg.cols);
    let profile: Vec<f64> = (0..rows).map(|i| cfg.gain_at(pulse, i as f64)).collect();
    let mut gains = Vec::with_capacity(rows * cols);
    if tilt_deg == 0.0 {
        for &g in &profile {
            gains.extend(std::iter::repeat_n(g, cols));
        }
    } else if tilt_deg.abs() == 90.0 {
        let sign = tilt_deg.signum();
        let row: Vec<f64> = (0..cols).map(|j| cfg.gain_at(pulse, -sign * j as f64)).collect();
        for _ in 0..rows {
            gains.extend_from_slice(&row);
        }
    } else {
        let (sin, cos) = tilt_deg.to_radians().sin_cos();
        for i in 0..rows {
            for j in 0..cols {
                gains.push(cfg.gain_at(pulse, i as f64 * cos - j as f64 * sin));
            }
        }
    }
    Ok(Pattern {
        rows,
        cols,
        gains,
        profile,
        tilt_deg,
    })
}

/// Captured frame: the scene multiplied by the gain field, every channel alike.
/// No clamping happens here.
pub fn expose(image: &Image, pattern: &Pattern) -> Result<Image, SensorError> {
    if image.rows() != pattern.rows || image.cols() != pattern.cols {
        return Err(SensorError::DimensionMismatch {
            image_rows: image.rows(),
            image_cols: image.cols(),
            rows: pattern.rows,
            cols: pattern.cols,
        });
    }
    let nc = image.channels().count();
    let data: Vec<f64> = image
        .data()
        .chunks_exact(nc)
        .zip(&pattern.gains)
        .flat_map(|(px, &g)| px.iter().map(move |v| v * g))
        .collect();
    Ok(Image::new(image.rows(), image.cols(), image.channels(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Channels;
    use proptest::prelude::*;

    fn unit_cfg(rows: usize, cols: usize) -> SensorConfig {
        SensorConfig::new(1.0, 1.0, 1.0, rows, cols).unwrap()
    }

    // Independent per-row midpoint quadrature of an ideal square wave.
    fn oracle_row(cfg: &SensorConfig, p: &PulseParams, u: f64) -> f64 {
        let step = 0.01;
        let n = (cfg.exposure_us() / step).round() as usize;
        let t0 = cfg.start_us() + u * cfg.interline_delay_us();
        let on_span = p.duty() * p.period_us();
        let mut acc = 0.0;
        for k in 0..n {
            let t = t0 + (k as f64 + 0.5) * step - p.phase_us();
            let x = t - (t / p.period_us()).floor() * p.period_us();
            acc += if x < on_span { p.level_on() } else { p.level_off() } * step;
        }
        cfg.gain() * acc
    }

    #[test]
    fn constant_light_gives_k_te() {
        let cfg = SensorConfig::new(25.0, 250.0, 0.5, 10, 4).unwrap();
        let p = PulseParams::constant(1.0).unwrap();
        for i in 0..10 {
            assert_eq!(row_gain(&cfg, &p, i).unwrap(), 125.0);
        }
    }

    #[test]
    fn period_four_profile() {
        let cfg = unit_cfg(8, 3);
        let p = PulseParams::square(4.0, 0.5).unwrap();
        let got: Vec<f64> = (0..8).map(|i| row_gain(&cfg, &p, i).unwrap()).collect();
        let oracle: Vec<f64> = (0..8).map(|i| oracle_row(&cfg, &p, i as f64)).collect();
        assert_eq!(got, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-9);
        }
    }

    #[test]
    fn whole_period_exposure_is_flat() {
        let p = PulseParams::new(40.0, 0.3, 7.0, 2.0, 0.5).unwrap();
        let cfg = SensorConfig::new(3.0, 80.0, 0.1, 50, 1).unwrap();
        let expected = 0.1 * 80.0 * (0.3 * 2.0 + 0.7 * 0.5);
        for i in 0..50 {
            assert!((row_gain(&cfg, &p, i).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn row_out_of_range() {
        let cfg = unit_cfg(4, 4);
        let p = PulseParams::default();
        assert_eq!(
            row_gain(&cfg, &p, 4),
            Err(SensorError::RowOutOfRange { row: 4, rows: 4 })
        );
    }

    #[test]
    fn tilt_cases() {
        let cfg = unit_cfg(12, 12);
        let p = PulseParams::square(4.0, 0.5).unwrap();
        let flat = render_pattern(&cfg, &p, 0.0).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(flat.gain(i, j), flat.profile()[i]);
            }
        }
        let quarter = render_pattern(&cfg, &p, 90.0).unwrap();
        for i in 1..12 {
            for j in 0..12 {
                assert_eq!(quarter.gain(i, j), quarter.gain(0, j));
            }
        }
        let diag = render_pattern(&cfg, &p, 45.0).unwrap();
        assert!((diag.gain(1, 1) - 1.0).abs() < 1e-9);
        assert!((diag.gain(1, 1) - oracle_row(&cfg, &p, 0.0)).abs() < 1e-9);
        assert_eq!(render_pattern(&cfg, &p, 91.0), Err(SensorError::Tilt(91.0)));
    }

    #[test]
    fn expose_identity_zero_and_profile() {
        let img = Image::from_fn(8, 5, |i, j| (i * 5 + j) as f64 / 40.0).unwrap();
        let same = expose(&img, &Pattern::identity(8, 5)).unwrap();
        assert_eq!(same, img);
        assert_eq!(same.get(0, 0, 0), 0.0);

        let cfg = unit_cfg(8, 5);
        let pat = render_pattern(&cfg, &PulseParams::square(4.0, 0.5).unwrap(), 0.0).unwrap();
        let lit = expose(&Image::filled(8, 5, Channels::Gray, 1.0).unwrap(), &pat).unwrap();
        assert_eq!(lit.row_means(), vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);

        let wrong = Image::filled(8, 4, Channels::Gray, 1.0).unwrap();
        assert!(matches!(expose(&wrong, &pat), Err(SensorError::DimensionMismatch { .. })));
    }

    #[test]
    fn expose_rgb_scales_all_channels() {
        let img = Image::filled(4, 2, Channels::Rgb, 0.5).unwrap();
        let cfg = unit_cfg(4, 2);
        let pat = render_pattern(&cfg, &PulseParams::square(4.0, 0.5).unwrap(), 0.0).unwrap();
        let out = expose(&img, &pat).unwrap();
        assert_eq!(out.get(0, 1, 2), 0.5);
        assert_eq!(out.get(2, 1, 1), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn integer_period_repeats(period in 2usize..30, duty in 1u32..100, te in 1u32..60) {
            let cfg = SensorConfig::new(1.0, te as f64, 1.0, 3 * period, 1).unwrap();
            let p = PulseParams::square(period as f64, duty as f64 / 100.0).unwrap();
            for i in 0..2 * period {
                let a = row_gain(&cfg, &p, i).unwrap();
                let b = row_gain(&cfg, &p, i + period).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn gains_stay_in_bounds(tp in 10f64..500.0, duty in 0f64..1.0, te in 1f64..400.0,
                                off in 0f64..1.0, tilt in -90f64..90.0) {
            let cfg = SensorConfig::new(5.0, te, 0.3, 20, 20).unwrap();
            let p = PulseParams::new(tp, duty, 0.0, 1.0, off).unwrap();
            let pat = render_pattern(&cfg, &p, tilt).unwrap();
            let lo = 0.3 * off * te;
            let hi = 0.3 * te;
            for &g in pat.gains() {
                prop_assert!(g >= lo - 1e-9 * hi && g <= hi + 1e-9 * hi);
            }
        }

        #[test]
        fn exposure_is_linear(c in 0f64..10.0, seed in 0u64..1000) {
            let img = Image::from_fn(6, 4, |i, j| ((seed as usize + i * 4 + j) % 7) as f64 / 7.0).unwrap();
            let cfg = SensorConfig::new(2.0, 3.0, 1.0, 6, 4).unwrap();
            let pat = render_pattern(&cfg, &PulseParams::square(9.0, 0.4).unwrap(), 30.0).unwrap();
            let lhs = expose(&img.scaled(c).unwrap(), &pat).unwrap();
            let rhs = expose(&img, &pat).unwrap().scaled(c).unwrap();
            for (a, b) in lhs.data().iter().zip(rhs.data()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
