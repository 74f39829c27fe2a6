//! Dataset manifests: one entry per captured (or simulated) image.

use crate::signal::PulseParams;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate manifest path {0:?}")]
    DuplicatePath(String),
    #[error("manifest entry {0} has an empty path")]
    EmptyPath(usize),
    #[error("manifest has no entries")]
    Empty,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Illumination an image was captured under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Normal,
    Pulse(PulseParams),
}

impl Condition {
    /// Short column label, e.g. `normal` or `1000us`.
    pub fn label(&self) -> String {
        match self {
            Condition::Normal => "normal".to_string(),
            Condition::Pulse(p) => format!("{}us", p.period_us()),
        }
    }
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Condition::Normal => s.serialize_str("normal"),
            Condition::Pulse(p) => p.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        match value {
            serde_json::Value::String(s) if s == "normal" => Ok(Condition::Normal),
            serde_json::Value::Object(_) => serde_json::from_value(value)
                .map(Condition::Pulse)
                .map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!(
                "condition must be \"normal\" or pulse parameters, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub subject: String,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, ManifestError> {
        let m = Manifest { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut seen = HashSet::new();
        for (k, e) in self.entries.iter().enumerate() {
            if e.path.is_empty() {
                return Err(ManifestError::EmptyPath(k));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(ManifestError::DuplicatePath(e.path.clone()));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let m: Manifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest is always serializable")
    }

    /// Entry path resolved against the directory holding the manifest.
    pub fn resolve(&self, manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(path: &str, condition: Condition) -> ManifestEntry {
        ManifestEntry {
            path: path.into(),
            subject: "s1".into(),
            condition,
            distance_cm: Some(18.0),
            tilt_deg: None,
        }
    }

    #[test]
    fn json_round_trip() {
        let m = Manifest::new(vec![
            entry("a.pgm", Condition::Normal),
            entry("b.pgm", Condition::Pulse(PulseParams::square(1000.0, 0.5).unwrap())),
        ])
        .unwrap();
        let text = m.to_json();
        assert!(text.contains("\"normal\""));
        assert_eq!(Manifest::parse(&text).unwrap(), m);
    }

    #[test]
    fn rejects_duplicates_and_bad_conditions() {
        let dup = vec![entry("a.pgm", Condition::Normal), entry("a.pgm", Condition::Normal)];
        assert!(matches!(Manifest::new(dup), Err(ManifestError::DuplicatePath(_))));
        let bad = r#"{"entries":[{"path":"x","subject":"s","condition":"dim"}]}"#;
        assert!(matches!(Manifest::parse(bad), Err(ManifestError::Parse(_))));
        let bad_pulse = r#"{"entries":[{"path":"x","subject":"s","condition":{"period_us":0,"duty":0.5}}]}"#;
        assert!(Manifest::parse(bad_pulse).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(Condition::Normal.label(), "normal");
        let p = PulseParams::square(1200.0, 0.5).unwrap();
        assert_eq!(Condition::Pulse(p).label(), "1200us");
    }
}
