use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flexdock::config::RunConfig;
use flexdock::sampler::SamplerMode;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "flexdock", version, about = "Flexible protein-protein docking by hierarchical diffusion")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Drift-only global updates during sampling
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump node features and the four residue graphs of an unbound pair
    Featurize(commands::FeaturizeArgs),
    /// Mean-square fluctuations and correlations of one chain
    Nma(commands::NmaArgs),
    /// Noise a bound complex at global time t and local time tau
    Noise(commands::NoiseArgs),
    /// Overfit a small manifest and write a checkpoint
    TrainToy(commands::TrainArgs),
    /// Generate and rank docked candidates
    Sample(commands::SampleArgs),
    /// Metric tables for predicted structures
    Eval(commands::EvalArgs),
    /// Precompute the IGSO(3) lookup table
    Tables(commands::TablesArgs),
}

impl Global {
    fn run_config(&self) -> flexdock::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.train.seed = s;
            cfg.sampler.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.train.threads = t.max(1);
            cfg.sampler.threads = t.max(1);
        }
        if self.deterministic {
            cfg.sampler.mode = SamplerMode::Deterministic;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.global.run_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let r = match cli.command {
        Command::Featurize(a) => commands::featurize(&cfg, a),
        Command::Nma(a) => commands::nma(&cfg, a),
        Command::Noise(a) => commands::noise(&cfg, a),
        Command::TrainToy(a) => commands::train_toy(&cfg, a),
        Command::Sample(a) => commands::sample(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Tables(a) => commands::tables(&cfg, a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
