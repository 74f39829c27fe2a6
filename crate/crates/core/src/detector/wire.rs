//! Newline-delimited JSON spoken with adapter processes.
//!
//! ```text
//! -> {"id": 7, "op": "detect", "image_path": "/scratch/ab12.pgm"}
//! <- {"id": 7, "label": 1}
//! -> {"id": 8, "op": "embed", "image_path": "/scratch/ab12.pgm"}
//! <- {"id": 8, "vector": [0.1, 0.2]}
//! <- {"id": 9, "error": "model crashed"}
//! ```
//!
//! An adapter that cannot parse a request answers with id `-1`.

use super::{DetectorVerdict, OracleError};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Detect,
    Embed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: Op,
    pub image_path: String,
}

impl Request {
    /// One protocol line, including the trailing newline.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("request is always serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Label(DetectorVerdict),
    Vector(Vec<f64>),
    Error(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub id: i64,
    pub reply: Reply,
}

impl Response {
    pub fn to_line(&self) -> String {
        let body = match &self.reply {
            Reply::Label(v) => serde_json::json!({"id": self.id, "label": v.label()}),
            Reply::Vector(v) => serde_json::json!({"id": self.id, "vector": v}),
            Reply::Error(e) => serde_json::json!({"id": self.id, "error": e}),
        };
        format!("{body}\n")
    }
}

fn protocol(msg: impl Into<String>) -> OracleError {
    OracleError::Protocol(msg.into())
}

/// Structural parse of one response line.
pub fn parse_response(line: &str) -> Result<Response, OracleError> {
    let value: Value = serde_json::from_str(line.trim_end_matches(['\n', '\r']))
        .map_err(|e| protocol(format!("response is not JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(protocol("response is not a JSON object"));
    };
    let id = obj
        .get("id")
        .and_then(Value::as_i64)
        .ok_or_else(|| protocol("response lacks an integer id"))?;
    let present: Vec<&str> = ["label", "vector", "error"]
        .into_iter()
        .filter(|k| obj.contains_key(*k))
        .collect();
    let reply = match present.as_slice() {
        ["label"] => Reply::Label(parse_label(&obj)?),
        ["vector"] => Reply::Vector(parse_vector(&obj)?),
        ["error"] => Reply::Error(
            obj["error"]
                .as_str()
                .ok_or_else(|| protocol("error must be a string"))?
                .to_string(),
        ),
        [] => return Err(protocol("response carries no label, vector or error")),
        _ => return Err(protocol(format!("response carries several payloads: {present:?}"))),
    };
    Ok(Response { id, reply })
}

fn parse_label(obj: &Map<String, Value>) -> Result<DetectorVerdict, OracleError> {
    obj["label"]
        .as_u64()
        .and_then(|l| u8::try_from(l).ok())
        .and_then(DetectorVerdict::from_label)
        .ok_or_else(|| protocol(format!("label must be 0 or 1, got {}", obj["label"])))
}

fn parse_vector(obj: &Map<String, Value>) -> Result<Vec<f64>, OracleError> {
    let items = obj["vector"]
        .as_array()
        .ok_or_else(|| protocol("vector must be an array"))?;
    let v: Vec<f64> = items
        .iter()
        .map(|x| x.as_f64().filter(|f| f.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| protocol("vector entries must be finite numbers"))?;
    if v.is_empty() {
        return Err(protocol("vector is empty"));
    }
    if let Some(declared) = obj.get("dim") {
        if declared.as_u64() != Some(v.len() as u64) {
            return Err(protocol(format!(
                "declared dim {declared} but vector has {} entries",
                v.len()
            )));
        }
    }
    Ok(v)
}

/// Parses `line` as the answer to request `expected_id` of kind `op`.
///
/// The id must echo; the payload must fit the op; vectors must have
/// `expected_dim` entries when a dimension is configured. Error replies
/// become [`OracleError::Remote`].
pub fn validate_response(
    line: &str,
    expected_id: u64,
    op: Op,
    expected_dim: Option<usize>,
) -> Result<Reply, OracleError> {
    let resp = parse_response(line)?;
    if let Reply::Error(msg) = &resp.reply {
        if resp.id == -1 || resp.id == expected_id as i64 {
            return Err(OracleError::Remote(msg.clone()));
        }
    }
    if resp.id != expected_id as i64 {
        return Err(protocol(format!(
            "response id {} does not match request id {expected_id}",
            resp.id
        )));
    }
    match (&resp.reply, op) {
        (Reply::Label(_), Op::Detect) => {}
        (Reply::Vector(v), Op::Embed) => {
            if let Some(dim) = expected_dim {
                if v.len() != dim {
                    return Err(protocol(format!(
                        "expected a {dim}-dim vector, got {}",
                        v.len()
                    )));
                }
            }
        }
        (reply, op) => {
            return Err(protocol(format!("{op:?} request answered with {reply:?}")));
        }
    }
    Ok(resp.reply)
}
