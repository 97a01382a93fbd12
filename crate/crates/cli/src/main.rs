//! `gpdrift`: simulate drifted stationary Gaussian processes, estimate their
//! parameters and reproduce the Monte Carlo study from the command line.
//!
//! Exit status is 0 on success, 2 for configuration or input errors and 3 for
//! numerical failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gpdrift::{Error, Result};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(
    name = "gpdrift",
    version,
    about = "Drifted stationary Gaussian processes at high frequency"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML or JSON configuration file; a manifest.json from an earlier run also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed of the simulated path, or master seed of a replication study.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: $GPDRIFT_OUT_DIR, then ./gpdrift-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set kernel.alpha=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Worker threads for replication studies (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path and write `path.csv` with its JSON sidecar.
    Simulate {
        /// Number of increments.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Estimate drift and kernel parameters of a path CSV into `estimate.json`.
    Estimate {
        #[arg(long)]
        input: Option<String>,
        /// gaussian, rq, ou or contrast (default from the kernel family).
        #[arg(long)]
        method: Option<String>,
    },
    /// Moment statistics of a path CSV into `moments.json`.
    Moments {
        #[arg(long)]
        input: Option<String>,
        /// Moment function for z-estimation (`x2`, `x4`, `x^k`); repeat for several.
        #[arg(long = "moment", value_name = "NAME")]
        moments: Vec<String>,
        /// Two-argument functional (`(y-x)^2`, `(y-x)y^2`); repeat for several.
        #[arg(long = "functional", value_name = "NAME")]
        functionals: Vec<String>,
    },
    /// Run a Monte Carlo study and write summary, records and QQ files.
    Replicate {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Normal QQ files for a study, from `records.csv` or a fresh run.
    Qq {
        #[command(flatten)]
        study: StudyArgs,
        /// `records.csv` of an earlier replicate run.
        #[arg(long)]
        input: Option<String>,
    },
    /// Kernel values and derivatives at the origin over a lag grid.
    KernelInfo,
}

#[derive(clap::Args, Debug)]
struct StudyArgs {
    /// I, II, III or custom.
    #[arg(long)]
    case: Option<String>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

impl StudyArgs {
    fn overrides(&self, seed: Option<u64>, out: &mut Vec<(String, Value)>) {
        if let Some(c) = &self.case {
            out.push(("experiment.case".into(), Value::from(c.clone())));
        }
        if !self.n.is_empty() {
            out.push(("experiment.n_values".into(), Value::from(self.n.clone())));
        }
        if let Some(r) = self.reps {
            out.push(("experiment.reps".into(), Value::from(r)));
        }
        if let Some(s) = seed {
            out.push(("experiment.master_seed".into(), Value::from(s)));
        }
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>> {
    let mut out = cli
        .set
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    let mut input = |section: &str, v: &Option<String>| {
        if let Some(p) = v {
            out.push((format!("{section}.input"), Value::from(p.clone())));
        }
    };
    match &cli.command {
        Command::Estimate { input: i, .. } => input("estimate", i),
        Command::Moments { input: i, .. } => input("moments", i),
        Command::Qq { input: i, .. } => input("qq", i),
        _ => {}
    }
    match &cli.command {
        Command::Simulate { n } => {
            if let Some(n) = n {
                out.push(("sampling.n".into(), Value::from(*n)));
            }
            if let Some(s) = cli.seed {
                out.push(("seed".into(), Value::from(s)));
            }
        }
        Command::Estimate { method, .. } => {
            if let Some(m) = method {
                out.push(("estimate.method".into(), Value::from(m.clone())));
            }
        }
        Command::Moments {
            moments, functionals, ..
        } => {
            if !moments.is_empty() {
                out.push(("moments.functions".into(), Value::from(moments.clone())));
            }
            if !functionals.is_empty() {
                out.push(("moments.functionals".into(), Value::from(functionals.clone())));
            }
        }
        Command::Replicate { study } | Command::Qq { study, .. } => study.overrides(cli.seed, &mut out),
        Command::KernelInfo => {}
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<()> {
    let loaded = config::load(cli.config.as_deref(), &overrides(cli)?)?;
    let out = config::out_dir(cli.out.as_deref());
    let prov = match &cli.command {
        Command::Simulate { .. } => commands::simulate(&loaded, &out)?,
        Command::Estimate { .. } => commands::estimate(&loaded, &out)?,
        Command::Moments { .. } => commands::moments(&loaded, &out)?,
        Command::Replicate { .. } => commands::replicate(&loaded, &out, cli.jobs)?,
        Command::Qq { .. } => commands::qq(&loaded, &out, cli.jobs)?,
        Command::KernelInfo => commands::kernel_info(&loaded, &out)?,
    };
    let manifest = prov.write(&out)?;
    for p in &prov.outputs {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", manifest.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gpdrift: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
