use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddns::commands::{self, PartitionKey};
use ddns::config::ProjectConfig;
use ddns::{Error, Result};
use ddns_core::schemes::SchemeKind;
use ddns_core::trace::Direction;

/// Data-driven network simulation for vehicular cellular links.
#[derive(Parser)]
#[command(name = "ddns", version)]
struct Cli {
    /// Project configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Operator label selecting traces and models.
    #[arg(long, global = true)]
    mno: Option<String>,
    /// uplink | downlink
    #[arg(long, global = true)]
    direction: Option<String>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate trace CSVs and rewrite them in canonical form.
    Ingest { files: Vec<PathBuf> },
    /// Generate synthetic labeled traces into the first trace directory.
    Synth,
    /// Train forest and derivation model for the selected operator/direction.
    Train,
    /// Build the connectivity map and attach it to the model document.
    Map,
    /// Replay every selected trace once.
    Replay {
        #[arg(long, default_value = "CAT")]
        scheme: String,
        #[arg(long)]
        phi_max: Option<f64>,
    },
    /// Φ_max sweep for one or more schemes.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "CAT")]
        scheme: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        phi_max: Option<Vec<f64>>,
        /// Repetitions per trace and Φ_max value.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Cross-partition R² matrix.
    Matrix {
        /// mno | scenario
        #[arg(long, default_value = "mno")]
        by: String,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// ECDF similarity of per-scheme rates in two `scheme,rate_mbits` files.
    Validate { real: PathBuf, simulated: PathBuf },
    /// Time repeated replays of the first selected trace.
    Bench {
        #[arg(long, default_value = "ML-CAT")]
        scheme: String,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
}

fn parse_scheme(s: &str) -> Result<SchemeKind> {
    s.parse().map_err(Error::from)
}

fn project(cli: &Cli) -> Result<ProjectConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => {
            let mut c = ProjectConfig::default();
            c.resolve(&std::env::current_dir().map_err(|e| Error::config(e.to_string()))?);
            c
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = &cli.mno {
        cfg.mno = m.clone();
    }
    if let Some(d) = &cli.direction {
        cfg.direction = d.parse::<Direction>()?;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = project(&cli)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest { files } => commands::cmd_ingest(&cfg, &files),
        Command::Synth => commands::cmd_synth(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Map => commands::cmd_map(&cfg),
        Command::Replay { scheme, phi_max } => commands::cmd_replay(&cfg, parse_scheme(&scheme)?, phi_max),
        Command::Sweep { scheme, phi_max, seeds } => {
            let kinds = scheme.iter().map(|s| parse_scheme(s)).collect::<Result<Vec<_>>>()?;
            if let Some(n) = seeds {
                cfg.sweep.seeds_per_point = n;
                cfg.validate()?;
            }
            commands::cmd_sweep(&cfg, &kinds, phi_max.as_deref())
        }
        Command::Matrix { by, folds } => {
            if let Some(k) = folds {
                cfg.training.folds = k;
                cfg.validate()?;
            }
            commands::cmd_matrix(&cfg, by.parse::<PartitionKey>()?)
        }
        Command::Validate { real, simulated } => commands::cmd_validate(&cfg, &real, &simulated),
        Command::Bench { scheme, repetitions } => commands::cmd_bench(&cfg, parse_scheme(&scheme)?, repetitions),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
