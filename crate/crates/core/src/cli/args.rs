use crate::generator::{NoiseConfig, PatternConfig, PatternSource, SamplingConfig};
use crate::gnn::{Activation, LossKind, ModelConfig};
use crate::hydraulics::SolverConfig;
use crate::training::{OptimizerKind, TrainConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "gatres", version, about = "Water network pressure estimation pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network file and print its validation report.
    Validate {
        /// INP file, or a network name looked up in the data directory.
        network: String,
    },
    /// Solve one steady state.
    Simulate {
        network: String,
        /// JSON file with demands, reservoir heads and pump speeds.
        #[arg(long)]
        controls: Option<PathBuf>,
        /// Multiplier applied to every junction demand.
        #[arg(long, default_value_t = 1.0)]
        demand_scale: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a snapshot dataset.
    Generate(GenerateArgs),
    /// Train a model on one dataset.
    Train {
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train one model on several datasets at once.
    Pretrain {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Continue training a checkpoint on a target dataset.
    Finetune {
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        /// Learning-rate multiplier relative to --lr.
        #[arg(long, default_value_t = 0.1)]
        lr_factor: f64,
    },
    /// Score a checkpoint or the interpolation baseline on a dataset.
    Evaluate(EvaluateArgs),
    /// Distribution shift between two datasets plus metric tables.
    Report {
        train: PathBuf,
        test: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = crate::generator::DEFAULT_BINS)]
        bins: usize,
        /// Metrics JSON files to tabulate.
        #[arg(long)]
        metrics: Vec<PathBuf>,
    },
    /// Re-run the command recorded in a run manifest.
    Rerun {
        manifest: PathBuf,
        /// Write artifacts here instead of the recorded directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().tol_flow)]
    pub tol_flow: f64,
    #[arg(long, default_value_t = SolverConfig::default().tol_head)]
    pub tol_head: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iterations)]
    pub max_iterations: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            tol_flow: self.tol_flow,
            tol_head: self.tol_head,
            max_iterations: self.max_iterations,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Random,
    Realistic,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub network: String,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Random)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0.2)]
    pub demand_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub demand_max: f64,
    #[arg(long, default_value_t = 5.0)]
    pub head_delta: f64,
    #[arg(long, default_value_t = 0.8)]
    pub speed_min: f64,
    #[arg(long, default_value_t = 1.2)]
    pub speed_max: f64,
    /// One demand multiplier per snapshot instead of one per junction.
    #[arg(long)]
    pub shared_multiplier: bool,
    #[arg(long, default_value_t = 24)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub timestep_hours: f64,
    /// "model", "diurnal" or the id of a pattern in the file.
    #[arg(long, default_value = "model")]
    pub pattern: String,
    #[arg(long, default_value_t = 0.05)]
    pub sigma_demand: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_head: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

impl GenerateArgs {
    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            demand_range: [self.demand_min, self.demand_max],
            head_delta: self.head_delta,
            speed_range: [self.speed_min, self.speed_max],
            independent: !self.shared_multiplier,
            seed: self.seed,
        }
    }

    pub fn patterns(&self) -> PatternConfig {
        let source = match self.pattern.as_str() {
            "model" => PatternSource::Model,
            "diurnal" => PatternSource::Diurnal,
            other => PatternSource::Named(other.to_string()),
        };
        PatternConfig {
            timesteps: self.timesteps,
            timestep_hours: self.timestep_hours,
            source,
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            sigma_demand: self.sigma_demand,
            sigma_head: self.sigma_head,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mae,
    Mse,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Fraction of junctions hidden from the model.
    #[arg(long, default_value_t = TrainConfig::default().masking_ratio)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().clip_norm)]
    pub clip: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Mae)]
    pub loss: LossArg,
    #[arg(long, default_value_t = TrainConfig::default().validation_trials)]
    pub validation_trials: usize,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            optimizer: match self.optimizer {
                OptimizerArg::Adam => OptimizerKind::Adam,
                OptimizerArg::Sgd => OptimizerKind::Sgd,
            },
            masking_ratio: self.ratio,
            seed: self.seed,
            patience: self.patience,
            clip_norm: self.clip,
            loss: match self.loss {
                LossArg::Mae => LossKind::Mae,
                LossArg::Mse => LossKind::Mse,
            },
            validation_trials: self.validation_trials,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Elu,
    Relu,
    Tanh,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = ModelConfig::default().blocks)]
    pub blocks: usize,
    #[arg(long, default_value_t = ModelConfig::default().heads)]
    pub heads: usize,
    #[arg(long, default_value_t = ModelConfig::default().hidden)]
    pub hidden: usize,
    #[arg(long, default_value_t = ModelConfig::default().decoder_width)]
    pub decoder_width: usize,
    /// Feed pipe attributes into the attention scores.
    #[arg(long)]
    pub edge_attr: bool,
    /// Give the model junction demands as an extra input.
    #[arg(long)]
    pub demand_channel: bool,
    #[arg(long, value_enum, default_value_t = ActivationArg::Elu)]
    pub activation: ActivationArg,
}

impl ModelArgs {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            blocks: self.blocks,
            heads: self.heads,
            hidden: self.hidden,
            decoder_width: self.decoder_width,
            use_edge_attr: self.edge_attr,
            demand_channel: self.demand_channel,
            activation: match self.activation {
                ActivationArg::Elu => Activation::Elu,
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            },
            ..ModelConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Train,
    Validation,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub dataset: PathBuf,
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// Score harmonic interpolation instead of a model.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, default_value_t = 0.95)]
    pub ratio: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    /// Also write metrics and per-node errors here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
