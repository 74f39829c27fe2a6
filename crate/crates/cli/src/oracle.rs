//! Oracle selection: in-process stubs, or adapter processes when `--adapter` is given.

use crate::args::OracleArgs;
use crate::util::parse_list;
use anyhow::{bail, Context, Result};
use rsfringe::detector::{
    AdapterCommand, Detector, Embedder, ExternalConfig, ExternalOracle, StubFringeDetector, StubProfileEmbedder,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const SCRATCH_ENV: &str = "RSFRINGE_SCRATCH_DIR";
pub const TIMEOUT_ENV: &str = "RSFRINGE_ADAPTER_TIMEOUT";
const DEFAULT_EMBED_DIM: usize = 16;

/// Resolved oracle settings, echoed into `run.json`.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleEcho {
    Stub {
        band: (f64, f64),
        dark_thresh: f64,
        min_run: usize,
        embed_dim: usize,
        jobs: usize,
    },
    External {
        program: String,
        args: Vec<String>,
        scratch_dir: PathBuf,
        timeout_s: f64,
        embed_dim: Option<usize>,
        jobs: usize,
    },
}

enum Plan {
    Stub(StubFringeDetector, StubProfileEmbedder),
    External(ExternalConfig),
}

pub struct Oracles {
    plan: Plan,
    jobs: usize,
    pub echo: OracleEcho,
}

fn timeout(args: &OracleArgs) -> Result<Duration> {
    let secs = match (args.adapter_timeout, std::env::var(TIMEOUT_ENV)) {
        (Some(s), _) => s,
        (None, Ok(v)) => v
            .trim()
            .parse::<f64>()
            .with_context(|| format!("{TIMEOUT_ENV}={v:?} is not a number of seconds"))?,
        (None, Err(_)) => return Ok(rsfringe::detector::external::DEFAULT_TIMEOUT),
    };
    if !(secs.is_finite() && secs > 0.0) {
        bail!("adapter timeout must be > 0 seconds, got {secs}");
    }
    Ok(Duration::from_secs_f64(secs))
}

impl Oracles {
    pub fn from_args(args: &OracleArgs, out: &Path) -> Result<Self> {
        if args.jobs == 0 {
            bail!("--jobs must be >= 1");
        }
        if let Some(line) = &args.adapter {
            let command = AdapterCommand::parse(line).context("--adapter is empty")?;
            let scratch = args
                .scratch_dir
                .clone()
                .or_else(|| std::env::var_os(SCRATCH_ENV).map(PathBuf::from))
                .unwrap_or_else(|| out.join("scratch"));
            let mut config = ExternalConfig::new(command, scratch);
            config.timeout = timeout(args)?;
            config.embedding_dim = args.embed_dim;
            let echo = OracleEcho::External {
                program: config.command.program.clone(),
                args: config.command.args.clone(),
                scratch_dir: config.scratch_dir.clone(),
                timeout_s: config.timeout.as_secs_f64(),
                embed_dim: config.embedding_dim,
                jobs: args.jobs,
            };
            return Ok(Self {
                plan: Plan::External(config),
                jobs: args.jobs,
                echo,
            });
        }
        let band = match parse_list(&args.stub_band)?.as_slice() {
            &[lo, hi] if 0.0 <= lo && lo < hi && hi <= 1.0 => (lo, hi),
            other => bail!("--stub-band needs two fractions lo,hi with 0 <= lo < hi <= 1, got {other:?}"),
        };
        let dim = args.embed_dim.unwrap_or(DEFAULT_EMBED_DIM);
        if dim == 0 {
            bail!("--embed-dim must be >= 1");
        }
        let detector = StubFringeDetector::new(band, args.stub_dark, args.stub_min_run);
        Ok(Self {
            plan: Plan::Stub(detector, StubProfileEmbedder::new(dim)),
            jobs: args.jobs,
            echo: OracleEcho::Stub {
                band,
                dark_thresh: args.stub_dark,
                min_run: args.stub_min_run,
                embed_dim: dim,
                jobs: args.jobs,
            },
        })
    }

    fn spawn(config: &ExternalConfig, n: usize) -> Result<Vec<ExternalOracle>> {
        (0..n)
            .map(|_| ExternalOracle::spawn(config.clone()).map_err(anyhow::Error::from))
            .collect()
    }

    pub fn detectors(&self) -> Result<Vec<Box<dyn Detector>>> {
        self.detector_pool(self.jobs)
    }

    pub fn detector_pool(&self, n: usize) -> Result<Vec<Box<dyn Detector>>> {
        Ok(match &self.plan {
            Plan::Stub(d, _) => (0..n).map(|_| Box::new(d.clone()) as Box<dyn Detector>).collect(),
            Plan::External(c) => Self::spawn(c, n)?
                .into_iter()
                .map(|o| Box::new(o) as Box<dyn Detector>)
                .collect(),
        })
    }

    pub fn embedders(&self) -> Result<Vec<Box<dyn Embedder>>> {
        self.embedder_pool(self.jobs)
    }

    pub fn embedder_pool(&self, n: usize) -> Result<Vec<Box<dyn Embedder>>> {
        Ok(match &self.plan {
            Plan::Stub(_, e) => (0..n).map(|_| Box::new(*e) as Box<dyn Embedder>).collect(),
            Plan::External(c) => Self::spawn(c, n)?
                .into_iter()
                .map(|o| Box::new(o) as Box<dyn Embedder>)
                .collect(),
        })
    }
}
