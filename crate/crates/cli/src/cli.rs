//! Argument parsing. Flags override values from `--config`.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ncpdrive::data::Condition;
use ncpdrive::models::Variant;

use crate::checkpoint::load_checkpoint;
use crate::commands::{cmd_eval, cmd_experiment, cmd_synth, cmd_train};
use crate::config::{DataSource, RunConfig};
use crate::server::{Server, ServerConfig, DEFAULT_MAX_LINE};

#[derive(Debug, Parser)]
#[command(
    name = "ncpdrive",
    version,
    about = "Train, evaluate and serve LTC/NCP steering models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic episode as PNG frames plus a drive log.
    Synth {
        #[arg(long, default_value = "sunny")]
        condition: Condition,
        #[arg(long, default_value_t = 500)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes model.ncpd, report.txt and report.json.
    Train(RunArgs),
    /// Evaluate a checkpoint on a drive log or a synthetic episode.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Drive-log directory; synthetic frames are generated when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "sunny")]
        condition: Condition,
        #[arg(long, default_value_t = 500)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append the result row to this CSV.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Train every variant on one condition and compare across conditions.
    Experiment(RunArgs),
    /// Serve steering predictions over newline-delimited JSON on TCP.
    Drive {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 4567)]
        port: u16,
        #[arg(long, default_value_t = 20.0)]
        target_speed: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_LINE)]
        max_line: usize,
    },
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub target_train_mse: Option<f64>,
    #[arg(long)]
    pub no_augment: bool,
    /// Drive-log directory for training data.
    #[arg(long)]
    pub train_dir: Option<PathBuf>,
    #[arg(long)]
    pub train_condition: Option<Condition>,
    #[arg(long)]
    pub train_frames: Option<usize>,
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// Comma-separated experiment seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated experiment variants.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,
}

impl RunArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $($field:tt)+) => {
                if let Some(v) = $flag.clone() {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(self.variant => variant);
        set!(self.seed => seed);
        set!(self.out_dir => out_dir);
        set!(self.epochs => training.epochs);
        set!(self.lr => training.lr);
        set!(self.val_fraction => training.val_fraction);
        set!(self.train_condition => train_data.condition);
        set!(self.train_frames => train_data.frames);
        set!(self.train_seed => train_data.seed);
        set!(self.seeds => experiment.seeds);
        set!(self.variants => experiment.variants);
        if self.max_steps.is_some() {
            cfg.training.max_steps = self.max_steps;
        }
        if self.target_train_mse.is_some() {
            cfg.training.target_train_mse = self.target_train_mse;
        }
        if self.train_dir.is_some() {
            cfg.train_data.dir = self.train_dir.clone();
        }
        if self.no_augment {
            cfg.training.augment = false;
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth {
            condition,
            frames,
            seed,
            out,
        } => {
            cmd_synth(condition, frames, seed, &out)?;
            println!("wrote {frames} {condition} frames to {}", out.display());
        }
        Command::Train(args) => {
            let outcome = cmd_train(&args.resolve()?)?;
            if let Some(best) = outcome.report.best() {
                println!(
                    "best epoch {}: train_mse {} val_mse {}",
                    best.epoch,
                    best.train_mse,
                    best.val_mse.map_or_else(|| "-".into(), |v| v.to_string())
                );
            }
            println!("checkpoint {}", outcome.checkpoint.display());
        }
        Command::Eval {
            checkpoint,
            data,
            condition,
            frames,
            seed,
            results,
        } => {
            let source = DataSource {
                condition,
                frames,
                seed,
                dir: data,
            };
            let row = cmd_eval(&checkpoint, &source, results.as_deref())?;
            println!("{}", row.to_csv());
        }
        Command::Experiment(args) => {
            let outcome = cmd_experiment(&args.resolve()?)?;
            print!("{}", outcome.table);
        }
        Command::Drive {
            checkpoint,
            host,
            port,
            target_speed,
            max_line,
        } => {
            let (model, _) =
                load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let server = Server::bind((host.as_str(), port), model, ServerConfig { target_speed, max_line })?;
            eprintln!("listening on {}", server.local_addr()?);
            server.serve()?;
        }
    }
    Ok(())
}
