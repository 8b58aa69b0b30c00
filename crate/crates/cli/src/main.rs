use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rbfv_core::scenario::{run_scenario, sweep_k, sweep_levels, write_profile, SWEEP_HEADER};
use rbfv_core::{Mode, ScenarioConfig};

/// Reduced-basis and global solvers for a reactive channel flow.
#[derive(Parser, Debug)]
#[command(name = "rbfv", version)]
struct Cli {
    #[command(flatten)]
    scenario: ScenarioArgs,

    #[command(subcommand)]
    command: Command,
}

/// Scenario flags. Each overrides the matching key of `--config`.
#[derive(Args, Debug)]
struct ScenarioArgs {
    /// key=value file with scenario settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// refinement level (10 * 2^level nodes per direction)
    #[arg(long, global = true)]
    level: Option<u32>,
    /// diffusion coefficient
    #[arg(long = "D", global = true)]
    diffusion: Option<f64>,
    /// rate constant
    #[arg(long, global = true)]
    k: Option<f64>,
    /// inlet speed of the channel flow
    #[arg(long, global = true)]
    vin: Option<f64>,
    /// global, reduced or both
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// number of combined basis functions (0 keeps one per node)
    #[arg(long, global = true)]
    compress: Option<usize>,
    #[arg(long, global = true)]
    ftol: Option<f64>,
    /// timing repeats (median is reported)
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// output CSV path (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// allow levels above 6
    #[arg(long, global = true)]
    allow_large: bool,
    /// rebuild the transport matrix in every global Newton step
    #[arg(long, global = true)]
    full_reassembly: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and print its sweep row.
    Run {
        /// also write the boundary profile CSV here
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// One row per refinement level.
    SweepLevels {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        levels: Vec<u32>,
        /// degree-of-freedom counts only, no solves
        #[arg(long)]
        count_only: bool,
    },
    /// One row per rate constant on a fixed level.
    SweepK {
        #[arg(long, value_delimiter = ',', default_value = "1e2,1e4,1e6,1e8,1e10")]
        ks: Vec<f64>,
    },
    /// Species values along the catalytic wall.
    Profile,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioConfig::from_kv(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(v) = self.level {
            cfg.level = v;
        }
        if let Some(v) = self.diffusion {
            cfg.diffusion = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.vin {
            cfg.v_in = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.compress {
            cfg.compress = (v > 0).then_some(v);
        }
        if let Some(v) = self.ftol {
            cfg.ftol = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        cfg.allow_large |= self.allow_large;
        cfg.force_full_reassembly |= self.full_reassembly;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = cli.scenario.resolve()?;
    match cli.command {
        Command::Run { profile } => {
            if profile.is_some() {
                cfg.profile_out = profile;
            }
            let report = run_scenario(&cfg)?;
            if cfg.out.is_none() {
                println!("{SWEEP_HEADER}");
                println!("{}", report.row.csv());
            }
        }
        Command::SweepLevels { levels, count_only } => {
            let mut out = sink(cfg.out.as_ref())?;
            sweep_levels(&cfg, &levels, count_only, &mut out)?;
            out.flush()?;
        }
        Command::SweepK { ks } => {
            let mut out = sink(cfg.out.as_ref())?;
            sweep_k(&cfg, &ks, &mut out)?;
            out.flush()?;
        }
        Command::Profile => {
            let out_path = cfg.out.take();
            let report = run_scenario(&cfg)?;
            let mut out = sink(out_path.as_ref())?;
            write_profile(&report.profile, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}
