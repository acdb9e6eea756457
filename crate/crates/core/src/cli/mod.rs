//! Command-line front end: preset and config-file loading, override flags,
//! and the scan runner behind the `run` subcommand.

mod config;
mod presets;
mod runner;

pub use config::{
    ExperimentConfig, GeometrySection, Grid, InteractionSection, McSection,
    OutputSection, PartitionSection, PhysicsSection, ScanSection,
};
pub use presets::{preset, PRESET_NAMES};
pub use runner::{
    run_and_write, run_experiment, CountingPoint, DensityResult, DetuningPoint,
    PairCorrelationRun, ScanResults,
};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

#[derive(Parser, Debug)]
#[command(
    name = "rydsim",
    version,
    about = "Steady-state simulator for laser-driven, strongly interacting atom ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a built-in preset or a TOML experiment file.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Built-in experiment name.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,

    /// Path to a TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Master seed for all random streams.
    #[arg(long)]
    seed: Option<u64>,

    /// Independent chains per spatial realization.
    #[arg(long)]
    trajectories: Option<u32>,

    /// Spatial realizations per scan point.
    #[arg(long)]
    realizations: Option<u32>,

    /// Worker threads; defaults to one per core.
    #[arg(long)]
    workers: Option<usize>,

    /// Suppress per-task progress lines.
    #[arg(long)]
    quiet: bool,

    /// Pair-distance histogram bin width in um.
    #[arg(long)]
    bin_width: Option<f64>,

    /// Treat every atom singly (rate-equation baseline).
    #[arg(long)]
    sare: bool,

    /// Lower pair-window bound in um (pairs need l_lower < d).
    #[arg(long)]
    l_lower: Option<f64>,

    /// Upper pair-window bound in um (pairs need d <= l_upper).
    #[arg(long)]
    l_upper: Option<f64>,

    /// Reuse steady-state solves for repeated parameter values.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    memoize: Option<bool>,

    /// Also write the sampled atom positions of every realization.
    #[arg(long)]
    dump_positions: bool,
}

impl RunArgs {
    /// Loads the base configuration (preset or file) and applies the
    /// override flags. Flags beat file values, which beat preset defaults.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), None) => presets::preset(name)?,
            (None, Some(path)) => ExperimentConfig::from_path(path)?,
            // clap enforces exactly one of the two
            _ => unreachable!("clap guarantees exactly one of --preset/--config"),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.mc.seed = seed;
        }
        if let Some(t) = self.trajectories {
            cfg.mc.trajectories = t;
        }
        if let Some(r) = self.realizations {
            cfg.mc.realizations = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if self.quiet {
            cfg.quiet = true;
        }
        if let Some(b) = self.bin_width {
            cfg.output.bin_width = b;
        }
        if self.sare {
            cfg.partition.sare = true;
        }
        if let Some(l) = self.l_lower {
            cfg.partition.l_lower = Some(l);
        }
        if let Some(l) = self.l_upper {
            cfg.partition.l_upper = Some(l);
        }
        if let Some(m) = self.memoize {
            cfg.mc.memoize = m;
        }
        if self.dump_positions {
            cfg.output.dump_positions = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Entry point behind the binary; parses `std::env::args`.
pub fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            run_and_write(&config)?;
            eprintln!("results written to {}", config.output.dir.display());
            Ok(())
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}
