//! Deterministic stand-ins for real face models.
//!
//! The fringe detector reports "no face" when a long enough run of dark rows
//! crosses the feature band, which is how wide dark fringes break real
//! detectors. The profile embedder summarizes the vertical luminance profile,
//! so strong shared fringes pull two different faces together.

use super::{Detector, DetectorVerdict, Embedder, Embedding, OracleError};
use crate::io::{Image, FEATURE_BAND};
use std::ops::Range;

/// Label 0 iff some run of at least `min_run` consecutive rows inside `band`
/// has mean luminance below `dark_thresh` times the image mean.
pub fn stub_fringe_detect(
    image: &Image,
    band: Range<usize>,
    dark_thresh: f64,
    min_run: usize,
) -> Result<DetectorVerdict, OracleError> {
    if band.is_empty() {
        return Err(OracleError::Input("empty detection band".into()));
    }
    if band.end > image.rows() {
        return Err(OracleError::Input(format!(
            "band {band:?} exceeds image height {}",
            image.rows()
        )));
    }
    let means = image.row_means();
    let limit = dark_thresh * means.iter().sum::<f64>() / means.len() as f64;
    let mut run = 0usize;
    for &m in &means[band] {
        if m < limit {
            run += 1;
            if run >= min_run.max(1) {
                return Ok(DetectorVerdict::Absent);
            }
        } else {
            run = 0;
        }
    }
    Ok(DetectorVerdict::Present)
}

/// Configured [`stub_fringe_detect`]. The band is given as fractions of the
/// image height so one detector works across frame sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct StubFringeDetector {
    pub band: (f64, f64),
    pub dark_thresh: f64,
    pub min_run: usize,
}

impl StubFringeDetector {
    pub fn new(band: (f64, f64), dark_thresh: f64, min_run: usize) -> Self {
        Self {
            band,
            dark_thresh,
            min_run,
        }
    }

    pub fn band_rows(&self, rows: usize) -> Range<usize> {
        let lo = (self.band.0 * rows as f64).round().max(0.0) as usize;
        let hi = (self.band.1 * rows as f64).round().max(0.0) as usize;
        lo.min(rows)..hi.min(rows)
    }
}

impl Default for StubFringeDetector {
    /// Feature band of the synthetic faces, dark below half the mean, 15 rows.
    fn default() -> Self {
        Self::new(FEATURE_BAND, 0.5, 15)
    }
}

impl Detector for StubFringeDetector {
    fn detect(&mut self, image: &Image) -> Result<DetectorVerdict, OracleError> {
        stub_fringe_detect(image, self.band_rows(image.rows()), self.dark_thresh, self.min_run)
    }

    fn name(&self) -> String {
        "stub-fringe".to_string()
    }
}

/// Detector that always gives the same answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDetector(pub DetectorVerdict);

impl Detector for ConstantDetector {
    fn detect(&mut self, _image: &Image) -> Result<DetectorVerdict, OracleError> {
        Ok(self.0)
    }

    fn name(&self) -> String {
        format!("constant-{}", self.0.label())
    }
}

/// Splits the row-mean luminance profile into `dim` contiguous buckets,
/// averages each and L2-normalizes the result. An all-black image maps to
/// the zero vector.
pub fn stub_profile_embed(image: &Image, dim: usize) -> Result<Embedding, OracleError> {
    if dim == 0 {
        return Err(OracleError::Input("embedding dimension must be >= 1".into()));
    }
    let profile = image.row_means();
    let n = profile.len();
    let mut v: Vec<f64> = (0..dim)
        .map(|k| {
            let lo = k * n / dim;
            let hi = ((k + 1) * n / dim).max(lo + 1).min(n);
            let lo = lo.min(hi - 1);
            profile[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Embedding::new(v).map_err(|e| OracleError::Input(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubProfileEmbedder {
    pub dim: usize,
}

impl StubProfileEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Default for StubProfileEmbedder {
    fn default() -> Self {
        Self { dim: 16 }
    }
}

impl Embedder for StubProfileEmbedder {
    fn embed(&mut self, image: &Image) -> Result<Embedding, OracleError> {
        stub_profile_embed(image, self.dim)
    }

    fn name(&self) -> String {
        format!("stub-profile-{}", self.dim)
    }
}
