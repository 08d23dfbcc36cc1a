use std::path::PathBuf;

use argus_core::preprocessing::Method;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "argus", version, about = "Disagreement-based supervision of paired decision systems")]
pub struct Cli {
    /// Run every data-parallel loop on the calling thread
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Score a classification log: single systems, baselines, supervised arbitration
    Arbitrate(ArbitrateArgs),
    /// FAR/FRR sweep of the steering disagreement threshold against disengagements
    Sweep(SweepArgs),
    /// Export the per-frame steering disagreement signal
    Signal(SignalArgs),
    /// Build network inputs (m1..m5) from frames
    Preprocess(PreprocessArgs),
    /// Cap one-degree steering-angle bins at the smallest occupied count
    Balance(BalanceArgs),
    /// Generate a classification log with prescribed joint counts
    SimulateLog(SimulateLogArgs),
    /// Generate a steering trace with divergence ramps before disengagements
    SimulateSteering(SimulateSteeringArgs),
    /// Re-run the command recorded in a manifest and check its outputs
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ArbitrateArgs {
    /// Classification log (JSONL)
    #[arg(long)]
    pub log: PathBuf,
    /// Top-k values, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub k: Vec<usize>,
    /// Base seed of the random-arbitrator draws
    #[arg(long)]
    pub seed: u64,
    /// Random-arbitrator Monte Carlo draws
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Random-arbitrator review budget in [0, 1]; defaults to the disagreement rate
    #[arg(long)]
    pub budget: Option<f64>,
    /// Also score the fused-probability ensemble
    #[arg(long)]
    pub ensemble: bool,
    /// Weight of the primary vector in the ensemble
    #[arg(long, default_value_t = 0.5)]
    pub ensemble_weight: f64,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TraceArgs {
    /// Steering trace (CSV)
    #[arg(long)]
    pub trace: PathBuf,
    /// Frames per second of the trace
    #[arg(long, default_value_t = 30)]
    pub fps: u32,
    /// Angles are clamped to [-range, range] degrees
    #[arg(long, default_value_t = 10.0)]
    pub range: f64,
    /// Window length in frames
    #[arg(long, default_value_t = 30)]
    pub window: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub trace: TraceArgs,
    /// Disengagement events (CSV)
    #[arg(long)]
    pub events: PathBuf,
    /// Window stride in frames; defaults to the window length
    #[arg(long)]
    pub stride: Option<usize>,
    /// Thresholds, comma separated; defaults to 0 to 2*window in steps of 0.5
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Also write roc.svg
    #[arg(long)]
    pub svg: bool,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SignalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub trace: TraceArgs,
    /// Flag threshold
    #[arg(long, default_value_t = 10.0)]
    pub threshold: f64,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Directory of PNG frames (sorted by name), or a raw u8 planar video
    /// with a JSON sidecar of the same stem
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Frame rate recorded for a PNG directory
    #[arg(long, default_value_t = 30)]
    pub fps: u32,
    /// Index of the first PNG frame
    #[arg(long, default_value_t = 0)]
    pub start_frame: u64,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: argus_core::preprocessing::PreprocessError| e.to_string())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepArg {
    Earliest,
    Seeded,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BalanceArgs {
    /// CSV with a header row
    #[arg(long)]
    pub angles: PathBuf,
    /// Column holding steering angles in degrees
    #[arg(long, default_value = "angle_deg")]
    pub column: String,
    /// Which frames an over-full bin keeps
    #[arg(long, value_enum, default_value_t = KeepArg::Earliest)]
    pub keep: KeepArg,
    /// Seed for --keep seeded
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateLogArgs {
    /// Spec as JSON; individual flags override its fields
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Start from the 50000-item reference counts
    #[arg(long, conflicts_with = "spec")]
    pub reference: bool,
    /// Generator seed; required unless the spec file carries one
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of records
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of classes [default: 1000]
    #[arg(long)]
    pub classes: Option<u32>,
    /// Records whose truth is outside the primary top-1
    #[arg(long)]
    pub fail1: Option<usize>,
    /// Records whose truth is outside the primary top-5
    #[arg(long)]
    pub fail5: Option<usize>,
    /// Records where the top-1 answers differ
    #[arg(long)]
    pub disagree: Option<usize>,
    /// Disagreeing records among the top-1 failures
    #[arg(long)]
    pub tp1: Option<usize>,
    /// Disagreeing records among the top-5 failures
    #[arg(long)]
    pub tp5: Option<usize>,
    /// Secondary top-1 failures
    #[arg(long)]
    pub secondary_fail1: Option<usize>,
    /// Secondary top-5 failures
    #[arg(long)]
    pub secondary_fail5: Option<usize>,
    /// Fused-probability top-1 failures (needs --with-probs)
    #[arg(long)]
    pub ensemble_fail1: Option<usize>,
    /// Fused-probability top-5 failures (needs --with-probs)
    #[arg(long)]
    pub ensemble_fail5: Option<usize>,
    /// Emit probability vectors
    #[arg(long)]
    pub with_probs: bool,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSteeringArgs {
    /// Spec as JSON; individual flags override its fields
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Generator seed; required unless the spec file carries one
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace length in frames
    #[arg(long)]
    pub duration: Option<u64>,
    /// Frames per second
    #[arg(long)]
    pub fps: Option<u32>,
    /// Event frames, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with = "event_count")]
    pub events: Option<Vec<u64>>,
    /// Number of evenly spaced events
    #[arg(long)]
    pub event_count: Option<u64>,
    /// Standard deviation of the agreeing-phase angle difference, degrees
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Offset applied to each stream (in opposite directions) before an event, degrees
    #[arg(long)]
    pub divergence: Option<f64>,
    /// Frames of divergence before each event
    #[arg(long)]
    pub ramp: Option<u64>,
    /// AR(1) coefficient of the noise
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Amplitude of the shared steering signal, degrees
    #[arg(long)]
    pub base_amplitude: Option<f64>,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// manifest.json written by an earlier run
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the re-run
    #[arg(long)]
    pub out: PathBuf,
}
