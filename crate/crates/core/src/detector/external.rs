//! Bridge to an adapter process hosting a real face model.
//!
//! Images are written once per content hash into a scratch directory and
//! passed by path. Answers are cached by `(op, hash)`. One adapter serves one
//! request at a time; run several bridges to parallelize.

use super::wire::{validate_response, Op, Reply, Request};
use super::{Detector, DetectorVerdict, Embedder, Embedding, OracleError};
use crate::io::{encode_image, Channels, Encoding, Image};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Program plus arguments used to launch an adapter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl AdapterCommand {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Splits a command line on whitespace (no shell quoting).
    pub fn parse(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace();
        let program = parts.next()?;
        Some(Self::new(program, parts))
    }
}

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    pub command: AdapterCommand,
    pub scratch_dir: PathBuf,
    pub timeout: Duration,
    /// Required embedding length, when known.
    pub embedding_dim: Option<usize>,
    /// Name used in reports.
    pub model: String,
}

impl ExternalConfig {
    pub fn new(command: AdapterCommand, scratch_dir: impl Into<PathBuf>) -> Self {
        let model = Path::new(&command.program)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "external".to_string());
        Self {
            command,
            scratch_dir: scratch_dir.into(),
            timeout: DEFAULT_TIMEOUT,
            embedding_dim: None,
            model,
        }
    }
}

pub struct ExternalOracle {
    config: ExternalConfig,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    cache: HashMap<(Op, [u8; 32]), Reply>,
    /// Set once the stream can no longer be trusted to stay in step.
    broken: Option<String>,
    requests_sent: u64,
}

impl ExternalOracle {
    pub fn spawn(config: ExternalConfig) -> Result<Self, OracleError> {
        std::fs::create_dir_all(&config.scratch_dir).map_err(|e| {
            OracleError::Unavailable(format!(
                "cannot create scratch dir {}: {e}",
                config.scratch_dir.display()
            ))
        })?;
        let mut child = Command::new(&config.command.program)
            .args(&config.command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                OracleError::Unavailable(format!("cannot start {}: {e}", config.command.program))
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(Self {
            config,
            child,
            stdin,
            lines: rx,
            next_id: 1,
            cache: HashMap::new(),
            broken: None,
            requests_sent: 0,
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    /// Requests actually written to the adapter (cache hits excluded).
    pub fn requests_sent(&self) -> u64 {
        self.requests_sent
    }

    fn stage_image(&self, image: &Image, hash: &[u8; 32]) -> Result<PathBuf, OracleError> {
        let ext = match image.channels() {
            Channels::Gray => "pgm",
            Channels::Rgb => "ppm",
        };
        let path = self.config.scratch_dir.join(format!("{}.{ext}", hex::encode(hash)));
        if !path.exists() {
            // write-then-rename so a concurrent reader never sees a partial file
            let tmp = path.with_extension(format!("{ext}.{}.tmp", std::process::id()));
            std::fs::write(&tmp, encode_image(image, Encoding::Pnm))
                .and_then(|_| std::fs::rename(&tmp, &path))
                .map_err(|e| OracleError::Unavailable(format!("cannot stage image: {e}")))?;
        }
        Ok(path)
    }

    fn fail(&mut self, err: OracleError) -> OracleError {
        self.broken = Some(err.to_string());
        let _ = self.child.kill();
        err
    }

    fn request(&mut self, op: Op, image: &Image) -> Result<Reply, OracleError> {
        if let Some(why) = &self.broken {
            return Err(OracleError::Unavailable(format!("adapter already failed: {why}")));
        }
        let hash = image.content_hash();
        if let Some(hit) = self.cache.get(&(op, hash)) {
            return Ok(hit.clone());
        }
        let path = self.stage_image(image, &hash)?;
        let id = self.next_id;
        self.next_id += 1;
        let line = Request {
            id,
            op,
            image_path: path.to_string_lossy().into_owned(),
        }
        .to_line();
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(OracleError::Unavailable("adapter stdin closed".into()));
        };
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
            return Err(self.fail(OracleError::Unavailable(format!("cannot write request: {e}"))));
        }
        self.requests_sent += 1;
        let answer = match self.lines.recv_timeout(self.config.timeout) {
            Ok(Ok(answer)) => answer,
            Ok(Err(e)) => {
                return Err(self.fail(OracleError::Unavailable(format!("cannot read response: {e}"))))
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(self.fail(OracleError::Timeout(self.config.timeout)));
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.fail(OracleError::Unavailable("adapter closed its output".into())));
            }
        };
        match validate_response(&answer, id, op, self.config.embedding_dim) {
            Ok(reply) => {
                self.cache.insert((op, hash), reply.clone());
                Ok(reply)
            }
            // the adapter is still in step after reporting an error
            Err(e @ OracleError::Remote(_)) => Err(e),
            Err(e) => Err(self.fail(e)),
        }
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved adapter exit on its own
        self.stdin.take();
        if matches!(self.child.try_wait(), Ok(None)) {
            std::thread::sleep(Duration::from_millis(20));
            if matches!(self.child.try_wait(), Ok(None)) {
                let _ = self.child.kill();
            }
        }
        let _ = self.child.wait();
    }
}

impl Detector for ExternalOracle {
    fn detect(&mut self, image: &Image) -> Result<DetectorVerdict, OracleError> {
        match self.request(Op::Detect, image)? {
            Reply::Label(v) => Ok(v),
            other => Err(OracleError::Protocol(format!("unexpected reply {other:?}"))),
        }
    }

    fn name(&self) -> String {
        self.config.model.clone()
    }
}

impl Embedder for ExternalOracle {
    fn embed(&mut self, image: &Image) -> Result<Embedding, OracleError> {
        match self.request(Op::Embed, image)? {
            Reply::Vector(v) => Embedding::new(v).map_err(|e| OracleError::Protocol(e.to_string())),
            other => Err(OracleError::Protocol(format!("unexpected reply {other:?}"))),
        }
    }

    fn name(&self) -> String {
        self.config.model.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_parsing() {
        let c = AdapterCommand::parse("  python3 adapter.py --mode echo ").unwrap();
        assert_eq!(c.program, "python3");
        assert_eq!(c.args, vec!["adapter.py", "--mode", "echo"]);
        assert!(AdapterCommand::parse("   ").is_none());
    }

    #[test]
    fn missing_program_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExternalConfig::new(AdapterCommand::new("/nonexistent/adapter", Vec::<String>::new()), dir.path());
        assert!(matches!(ExternalOracle::spawn(cfg), Err(OracleError::Unavailable(_))));
    }

    #[cfg(unix)]
    #[test]
    fn adapter_that_exits_is_unavailable_not_a_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExternalConfig::new(AdapterCommand::new("true", Vec::<String>::new()), dir.path());
        let mut oracle = ExternalOracle::spawn(cfg).unwrap();
        let img = Image::filled(2, 2, Channels::Gray, 0.5).unwrap();
        assert!(matches!(oracle.detect(&img), Err(OracleError::Unavailable(_))));
        assert!(matches!(oracle.detect(&img), Err(OracleError::Unavailable(_))));
    }

    #[cfg(unix)]
    #[test]
    fn silent_adapter_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExternalConfig::new(AdapterCommand::new("sleep", ["5"]), dir.path());
        cfg.timeout = Duration::from_millis(100);
        let mut oracle = ExternalOracle::spawn(cfg).unwrap();
        let img = Image::filled(2, 2, Channels::Gray, 0.5).unwrap();
        assert_eq!(
            oracle.detect(&img),
            Err(OracleError::Timeout(Duration::from_millis(100)))
        );
    }
}
