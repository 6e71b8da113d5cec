mod commands;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use specguard::attack::AttackConfig;
use specguard::experiments::TraceGenConfig;
use specguard::guard::{GuardConfig, TrainConfig};
use specguard::ssm::{SelectiveSsm, SelectiveSsmConfig};
use specguard::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "specguard",
    version,
    about = "Spectral monitoring experiments for selective state-space models"
)]
struct Cli {
    /// JSON run configuration (model, guard, attack, train, traces sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every generator in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Exit with status 2 when an acceptance assertion fails.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Initialise the toy model and save its weights.
    InitModel,
    /// Power method against exact eigenvalues on sampled operators.
    ValidateSpectral(ValidateArgs),
    /// Memory-horizon bound over a grid of radii.
    Horizon(HorizonArgs),
    /// Run the spectral-collapse attack on seeded prompts.
    Attack(AttackArgs),
    /// Stealth/damage sweep over lambda.
    Pareto(ParetoArgs),
    /// Run a stream with clamped operators.
    Clamp(ClampArgs),
    /// Retention phase grid over radius and distance.
    Phase(PhaseArgs),
    /// Generate labeled spectral traces.
    GenData(GenDataArgs),
    /// Train the spectral-feature classifier.
    TrainGuard(TrainArgs),
    /// Detection metrics from a model, counts or a threshold ablation.
    EvalGuard(EvalArgs),
    /// Replay traces through the windowed threshold monitor.
    Monitor(MonitorArgs),
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1000)]
    n_matrices: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
}

#[derive(Debug, Args, Serialize)]
struct HorizonArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.99, 0.98])]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    h0: f64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_max: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModeArg {
    SpectralOnly,
    JointLoss,
    RandomBaseline,
}

#[derive(Debug, Args, Serialize)]
struct AttackArgs {
    #[arg(long, default_value_t = 1)]
    n_prompts: usize,
    #[arg(long, default_value_t = 20)]
    prompt_len: usize,
    /// Explicit comma-separated prompt (overrides --n-prompts).
    #[arg(long, value_delimiter = ',')]
    prompt: Vec<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SweepArg {
    Both,
    JointLoss,
    RandomBaseline,
}

#[derive(Debug, Args, Serialize)]
struct ParetoArgs {
    #[arg(long, default_value_t = 20)]
    n_prompts: usize,
    #[arg(long, default_value_t = 20)]
    prompt_len: usize,
    #[arg(long, value_delimiter = ',', default_values_t = specguard::attack::DEFAULT_LAMBDAS)]
    lambdas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SweepArg::Both)]
    mode: SweepArg,
    /// Zipf exponent of the benign prompt distribution.
    #[arg(long, default_value_t = 1.1)]
    zipf: f64,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct ClampArgs {
    #[arg(long, default_value_t = 0.2)]
    rho_target: f64,
    /// Clamp only this layer (default: all layers).
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long, default_value_t = 64)]
    length: usize,
}

#[derive(Debug, Args, Serialize)]
struct PhaseArgs {
    #[arg(long, value_delimiter = ',', default_values_t = specguard::experiments::DEFAULT_RHO_LEVELS)]
    rho_levels: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = specguard::experiments::DEFAULT_DISTANCES)]
    distances: Vec<usize>,
    #[arg(long, default_value_t = specguard::experiments::DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SourceArg {
    Clamp,
    Pgd,
    /// Radius-only traces with one injected sub-threshold record.
    Synthetic,
}

#[derive(Debug, Args, Serialize)]
struct GenDataArgs {
    #[arg(long, default_value_t = 250)]
    benign: usize,
    #[arg(long, default_value_t = 250)]
    adversarial: usize,
    #[arg(long, value_enum, default_value_t = SourceArg::Clamp)]
    source: SourceArg,
    #[arg(long, default_value_t = 0.2)]
    rho_target: f64,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value = "traces.jsonl")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Labeled traces (default: <out>/traces.jsonl).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// Append per-layer mean spectral gaps to the features.
    #[arg(long)]
    gaps: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// Trained classifier JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Labeled traces to score or ablate.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Confusion counts `tn,fp,fn,tp`.
    #[arg(long, value_delimiter = ',')]
    counts: Vec<u64>,
    /// JSON fixture `{"tn":..,"fp":..,"fn":..,"tp":..}`.
    #[arg(long)]
    counts_file: Option<PathBuf>,
    /// rho_min grid for the threshold ablation (needs --data).
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct MonitorArgs {
    /// Labeled traces JSONL or a single stream of step records.
    #[arg(long)]
    trace: PathBuf,
    /// Layers per token for a plain record stream (default: model config).
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: SelectiveSsmConfig,
    /// Saved weights; when set, `model` is ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    pub guard: GuardConfig,
    pub attack: AttackConfig,
    pub train: TrainConfig,
    pub traces: TraceGenConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn build_model(&self) -> Result<SelectiveSsm> {
        match &self.model_path {
            Some(p) => SelectiveSsm::load(p),
            None => SelectiveSsm::init(self.model.clone()),
        }
    }
}

/// Result of one subcommand: a one-line summary plus named assertions.
pub struct Outcome {
    pub summary: String,
    pub checks: Vec<(String, bool)>,
    /// Assertions enforced even without `--check`.
    pub hard: Vec<(String, bool)>,
}

impl Outcome {
    fn new(summary: String) -> Self {
        Self {
            summary,
            checks: Vec::new(),
            hard: Vec::new(),
        }
    }

    fn check(mut self, name: impl Into<String>, ok: bool) -> Self {
        self.checks.push((name.into(), ok));
        self
    }
}

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let config = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        None => RunConfig::default(),
    };
    let ctx = Context {
        config,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    match commands::dispatch(&ctx, &cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            let mut failed = false;
            for (name, ok) in &outcome.hard {
                if !ok {
                    eprintln!("assertion failed: {name}");
                    failed = true;
                }
            }
            if cli.check {
                for (name, ok) in &outcome.checks {
                    if !ok {
                        eprintln!("check failed: {name}");
                        failed = true;
                    }
                }
            }
            if failed {
                EXIT_CHECK
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
