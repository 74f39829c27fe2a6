//! Black-box face detection (label) and face embedding (feature vector).
//!
//! Searches only ever see these two traits. Deterministic stubs live in
//! [`stub`]; [`external`] drives a model adapter process over a line-based
//! JSON protocol defined in [`wire`].

pub mod external;
pub mod stub;
pub mod wire;

use crate::io::Image;
use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

pub use external::{AdapterCommand, ExternalConfig, ExternalOracle};
pub use stub::{stub_fringe_detect, stub_profile_embed, ConstantDetector, StubFringeDetector, StubProfileEmbedder};

/// Failure to obtain an answer from an oracle. None of these is a verdict.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("adapter unavailable: {0}")]
    Unavailable(String),
    #[error("adapter did not answer within {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("adapter reported an error: {0}")]
    Remote(String),
    #[error("invalid oracle input: {0}")]
    Input(String),
}

/// Output of the face detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum DetectorVerdict {
    Absent,
    Present,
}

impl DetectorVerdict {
    pub fn label(self) -> u8 {
        match self {
            DetectorVerdict::Absent => 0,
            DetectorVerdict::Present => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(DetectorVerdict::Absent),
            1 => Some(DetectorVerdict::Present),
            _ => None,
        }
    }
}

impl From<DetectorVerdict> for u8 {
    fn from(v: DetectorVerdict) -> u8 {
        v.label()
    }
}

impl TryFrom<u8> for DetectorVerdict {
    type Error = String;
    fn try_from(label: u8) -> Result<Self, String> {
        DetectorVerdict::from_label(label).ok_or_else(|| format!("label must be 0 or 1, got {label}"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding must have at least one entry")]
    Empty,
    #[error("embedding entry {0} is not finite")]
    NonFinite(usize),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("verification threshold must be finite and > 0, got {0}")]
    Threshold(f64),
}

/// Face feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(vector: Vec<f64>) -> Result<Self, EmbeddingError> {
        if vector.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(k) = vector.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(k));
        }
        Ok(Embedding(vector))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = EmbeddingError;
    fn try_from(v: Vec<f64>) -> Result<Self, EmbeddingError> {
        Embedding::new(v)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Vec<f64> {
        e.0
    }
}

/// Euclidean distance between two embeddings of equal dimension.
pub fn feature_distance(a: &Embedding, b: &Embedding) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Verification threshold: two faces match when their distance is <= `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    threshold: f64,
}

impl VerifierConfig {
    pub fn new(threshold: f64) -> Result<Self, EmbeddingError> {
        if threshold.is_finite() && threshold > 0.0 {
            Ok(Self { threshold })
        } else {
            Err(EmbeddingError::Threshold(threshold))
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn matches(&self, a: &Embedding, b: &Embedding) -> Result<bool, EmbeddingError> {
        Ok(feature_distance(a, b)? <= self.threshold)
    }
}

/// Face detector `f1`.
pub trait Detector: Send {
    fn detect(&mut self, image: &Image) -> Result<DetectorVerdict, OracleError>;

    /// Label used in reports.
    fn name(&self) -> String {
        "detector".to_string()
    }
}

/// Face feature extractor `f2`.
pub trait Embedder: Send {
    fn embed(&mut self, image: &Image) -> Result<Embedding, OracleError>;

    fn name(&self) -> String {
        "embedder".to_string()
    }
}

impl<T: Detector + ?Sized> Detector for Box<T> {
    fn detect(&mut self, image: &Image) -> Result<DetectorVerdict, OracleError> {
        (**self).detect(image)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: Embedder + ?Sized> Embedder for Box<T> {
    fn embed(&mut self, image: &Image) -> Result<Embedding, OracleError> {
        (**self).embed(image)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(feature_distance(&e(&[1.0, 2.0]), &e(&[1.0, 2.0])).unwrap(), 0.0);
        let d = feature_distance(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(feature_distance(&e(&[1.0, 2.0, 2.0]), &e(&[1.0, 5.0, 6.0])).unwrap(), 5.0);
        assert_eq!(
            feature_distance(&e(&[1.0]), &e(&[1.0, 2.0])),
            Err(EmbeddingError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn embedding_validation() {
        assert_eq!(Embedding::new(vec![]), Err(EmbeddingError::Empty));
        assert_eq!(Embedding::new(vec![0.0, f64::NAN]), Err(EmbeddingError::NonFinite(1)));
        assert!(VerifierConfig::new(0.0).is_err());
        let v = VerifierConfig::new(1.0).unwrap();
        assert!(v.matches(&e(&[0.0]), &e(&[1.0])).unwrap());
        assert!(!v.matches(&e(&[0.0]), &e(&[1.5])).unwrap());
    }

    #[test]
    fn verdict_labels() {
        assert_eq!(serde_json::to_string(&DetectorVerdict::Present).unwrap(), "1");
        assert_eq!(serde_json::from_str::<DetectorVerdict>("0").unwrap(), DetectorVerdict::Absent);
        assert!(serde_json::from_str::<DetectorVerdict>("2").is_err());
    }

    fn vec3() -> impl Strategy<Value = Embedding> {
        prop::collection::vec(-100f64..100.0, 3).prop_map(|v| Embedding::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn metric_axioms(a in vec3(), b in vec3(), c in vec3()) {
            let ab = feature_distance(&a, &b).unwrap();
            let ba = feature_distance(&b, &a).unwrap();
            let bc = feature_distance(&b, &c).unwrap();
            let ac = feature_distance(&a, &c).unwrap();
            prop_assert_eq!(feature_distance(&a, &a).unwrap(), 0.0);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
