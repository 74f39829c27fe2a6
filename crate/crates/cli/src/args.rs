use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser, Serialize)]
#[command(name = "rsfringe", version, about = "Rolling-shutter fringe attack simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Render one lamp drive onto an image.
    Simulate(SimulateArgs),
    /// Search for fringes that hide the face from a detector.
    AttackDos(AttackDosArgs),
    /// Search for fringes that make two faces verify as one.
    AttackDodge(AttackDodgeArgs),
    /// Notch-filter fringed images and score the repair.
    Defend(DefendArgs),
    /// Success rates over lamp periods, distances and tilts.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SceneArgs {
    /// Input image (PGM, PPM or PNG). Without it a synthetic face is drawn from --seed.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Seed for synthetic faces and randomized lamp phase.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 960)]
    pub rows: usize,
    #[arg(long, default_value_t = 1280)]
    pub cols: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SensorArgs {
    /// Interline delay, microseconds.
    #[arg(long, default_value_t = 25.0)]
    pub td: f64,
    /// Exposure time, microseconds.
    #[arg(long, default_value_t = 250.0)]
    pub te: f64,
    /// Sensor gain; defaults to 1/te.
    #[arg(long)]
    pub gain: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct LampArgs {
    #[arg(long, default_value_t = 1.0)]
    pub level_on: f64,
    #[arg(long, default_value_t = 0.0)]
    pub level_off: f64,
    /// Lamp phase relative to the frame start, microseconds.
    #[arg(long, default_value_t = 0.0)]
    pub phase_us: f64,
    /// Draw a fresh phase for every capture from --seed.
    #[arg(long)]
    pub random_phase: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    /// Adapter command line; selects the external oracle instead of the stubs.
    #[arg(long)]
    pub adapter: Option<String>,
    /// Seconds to wait for each adapter reply (env RSFRINGE_ADAPTER_TIMEOUT).
    #[arg(long)]
    pub adapter_timeout: Option<f64>,
    /// Where images are staged for the adapter (env RSFRINGE_SCRATCH_DIR).
    #[arg(long)]
    pub scratch_dir: Option<PathBuf>,
    /// Stub detector band as fractions of the height.
    #[arg(long, default_value = "0.4,0.6")]
    pub stub_band: String,
    #[arg(long, default_value_t = 0.5)]
    pub stub_dark: f64,
    #[arg(long, default_value_t = 15)]
    pub stub_min_run: usize,
    /// Embedding length: stub size (default 16), or the length adapter replies must have.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Parallel oracle workers (adapter processes when external).
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    FirstHit,
    CollectAll,
}

#[derive(Debug, Args, Serialize)]
pub struct SpaceArgs {
    #[arg(long, default_value_t = 40.0)]
    pub b_max: f64,
    #[arg(long, default_value_t = 40.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 90.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b_step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s_step: f64,
    #[arg(long, default_value_t = 45.0)]
    pub alpha_step: f64,
    /// Passes over the grid; only useful with --random-phase.
    #[arg(long, default_value_t = 1)]
    pub iters: usize,
    #[arg(long, value_enum, default_value = "first-hit")]
    pub mode: ModeArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Fringe parameters "b,s,alpha".
    #[arg(long, conflicts_with = "period_us")]
    pub theta: Option<String>,
    /// Lamp period instead of --theta, microseconds.
    #[arg(long)]
    pub period_us: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tilt: f64,
    /// Interline delay, microseconds.
    #[arg(long)]
    pub td: f64,
    #[arg(long, default_value_t = 250.0)]
    pub te: f64,
    /// Sensor gain; defaults to 1/te.
    #[arg(long)]
    pub gain: Option<f64>,
    #[command(flatten)]
    pub lamp: LampArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackDosArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub lamp: LampArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Sweep these lamp periods instead of searching, e.g. "1000,1200,...,2000".
    #[arg(long)]
    pub pulse_periods: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackDodgeArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Second face; without it a synthetic face is drawn from --seed + 1.
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Verification threshold on the embedding distance.
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub lamp: LampArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DefendArgs {
    /// Single fringed image to repair.
    #[arg(long, conflicts_with = "manifest")]
    pub image: Option<PathBuf>,
    /// Batch of adversarial images; emits a defense-rate table.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Fringe fundamental, cycles per row; estimated per image when absent.
    #[arg(long)]
    pub f0: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub order: u32,
    /// Stop-band width as a fraction of f0.
    #[arg(long, default_value_t = 0.25)]
    pub bandwidth_ratio: f64,
    #[arg(long, default_value_t = 3)]
    pub harmonics: u32,
    /// Known fringe tilt, degrees (single image only).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tilt: f64,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    Dos,
    Dodging,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "dos")]
    pub objective: ObjectiveArg,
    /// Images to sweep; without it --count synthetic faces are drawn.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Synthetic samples (pairs for dodging).
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 960)]
    pub rows: usize,
    #[arg(long, default_value_t = 1280)]
    pub cols: usize,
    /// Lamp periods, microseconds, e.g. "1000,1200,...,2000".
    #[arg(long)]
    pub pulse_periods: String,
    #[arg(long, default_value_t = 0.5)]
    pub duty: f64,
    /// Shooting distances, cm (image-scale proxy).
    #[arg(long)]
    pub distances: Option<String>,
    /// Fringe tilts, degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub tilts: Option<String>,
    /// Verification threshold (dodging only).
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub lamp: LampArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
