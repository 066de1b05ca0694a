//! Experiment harness around `scoamp`: configs, seeded trial batches, CSV
//! tables and JSON summaries.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{Algo, ConfigError, ExperimentConfig, FilterSpec};
use output::{Meta, Report};

#[derive(Debug, Parser)]
#[command(name = "scoamp", version, about = "Spatially coupled OAMP experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo runs of OAMP, LM-OAMP or AMP.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algo: Option<Algo>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        filter: Option<FilterSpec>,
    },
    /// State evolution trajectories.
    Se {
        #[command(flatten)]
        common: Common,
    },
    /// Potential curves and their minimizers.
    Potential {
        #[command(flatten)]
        common: Common,
    },
    /// Uncoupled and coupled thresholds.
    Threshold {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML or JSON experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; the JSON summary goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. } | Command::Se { common } | Command::Potential { common } | Command::Threshold { common } => {
                common
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Se { .. } => "se",
            Command::Potential { .. } => "potential",
            Command::Threshold { .. } => "threshold",
        }
    }

    /// The config with command-line overrides folded in.
    pub fn config(&self) -> Result<ExperimentConfig, ConfigError> {
        let common = self.common();
        let mut cfg = ExperimentConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            cfg.seed = Some(seed);
        }
        if let Command::Simulate { algo, trials, zeta, filter, .. } = self {
            let sim = cfg.simulate.get_or_insert_with(Default::default);
            if let Some(a) = algo {
                sim.algo = *a;
            }
            if let Some(t) = trials {
                sim.trials = *t;
            }
            if let Some(z) = zeta {
                sim.zeta = *z;
                for p in &mut sim.points {
                    p.zeta = None;
                }
            }
            if let Some(f) = filter {
                sim.filter = *f;
            }
        }
        Ok(cfg)
    }
}

/// Parses the config, runs the command on a worker pool and writes its
/// output.
pub fn run(cli: &Cli) -> Result<()> {
    let cmd = &cli.command;
    let cfg = cmd.config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cmd.common().workers {
        if w == 0 {
            return Err(ConfigError("workers must be positive".into()).into());
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    let report: Report = pool.install(|| match cmd {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Se { .. } => commands::se(&cfg),
        Command::Potential { .. } => commands::potential(&cfg),
        Command::Threshold { .. } => commands::threshold(&cfg),
    })?;
    let meta = Meta { command: cmd.name().into(), config_sha256: cfg.hash(), seed: cfg.seed() };
    report.emit(&meta, cmd.common().out.as_deref())
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        2
    } else {
        1
    }
}
