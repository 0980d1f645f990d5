//! `isac`: training, baseline rollouts, sweeps and summaries from a TOML config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isac_core::experiment::{self, ConfigError, ExperimentConfig, ExperimentError, PolicyKind, RunReport};
use isac_core::AccessScheme;

/// Exit categories.
mod code {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const RUN: u8 = 4;
}

#[derive(Parser)]
#[command(name = "isac", version, about = "Energy-efficient RSMA IRS-assisted ISAC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the PPO agent at the base configuration.
    Train(RunArgs),
    /// Run every point of the configured sweep for every configured policy.
    Sweep(RunArgs),
    /// Roll out a reference policy at the base configuration.
    Baseline {
        #[arg(value_enum)]
        policy: BaselineArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Recompute summary.csv and effects.csv from a run directory.
    Summarize {
        /// Directory containing runs.csv.
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Random,
    Greedy,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the configured seed list; repeat for several seeds.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Use the SDMA benchmark (no common stream) at every point.
    #[arg(long)]
    sdma: bool,
    /// Overrides the configured episode count.
    #[arg(long)]
    episodes: Option<usize>,
}

enum Failure {
    Config(String),
    Io(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => code::CONFIG,
            Failure::Io(_) => code::IO,
            Failure::Run(_) => code::RUN,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Run(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn load(args: &RunArgs, policies: Option<Vec<PolicyKind>>, sweep: bool) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    if let Some(n) = args.episodes {
        cfg.ppo.episodes = n;
    }
    if let Some(p) = policies {
        cfg.policies = p;
    }
    if !sweep {
        cfg.sweep = Default::default();
    }
    if args.sdma {
        cfg.scheme = AccessScheme::Sdma;
        cfg.sweep.scheme.clear();
    }
    if args.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    cfg.validate()
        .map_err(|(key, msg)| Failure::Config(format!("`{key}`: {msg}")))?;
    Ok(cfg)
}

fn print_report(report: &RunReport) {
    println!(
        "{:<32} {:<7} {:>4} {:>12} {:>10} {:>10} {:>10}",
        "point", "policy", "runs", "EE", "sum rate", "echo dB", "violation"
    );
    for r in &report.summary {
        if r.status == "ok" {
            println!(
                "{:<32} {:<7} {:>4} {:>6.3}±{:<5.3} {:>10.3} {:>10.2} {:>10.3}",
                r.point, r.policy, r.runs, r.ee_mean, r.ee_std, r.sum_rate_mean, r.echo_snr_db_mean, r.violation_mean
            );
        } else {
            println!("{:<32} {:<7} {}", r.point, r.policy, r.status);
        }
    }
    for e in &report.effects {
        println!(
            "effect {} {} → {} ({}): EE ratio {:.3} ± {:.3}",
            e.axis, e.from, e.to, e.policy, e.ratio, e.ci_half_width
        );
    }
}

fn execute(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<(), Failure> {
    let report = experiment::run(cfg, out, jobs)?;
    print_report(&report);
    let failed = report.records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        return Err(Failure::Run(format!(
            "{failed} of {} runs failed; see {}",
            report.records.len(),
            out.join("runs.csv").display()
        )));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load(&args, Some(vec![PolicyKind::Ppo]), false)?;
            execute(&cfg, &args.out, args.jobs)
        }
        Command::Sweep(args) => {
            let cfg = load(&args, None, true)?;
            execute(&cfg, &args.out, args.jobs)
        }
        Command::Baseline { policy, run } => {
            let kind = match policy {
                BaselineArg::Random => PolicyKind::Random,
                BaselineArg::Greedy => PolicyKind::Greedy,
            };
            let cfg = load(&run, Some(vec![kind]), false)?;
            execute(&cfg, &run.out, run.jobs)
        }
        Command::Summarize { dir } => {
            let records = experiment::read_records(&dir.join("runs.csv"))?;
            if records.is_empty() {
                return Err(Failure::Run(format!("{}: no runs recorded", dir.display())));
            }
            let (summary, effects) = experiment::write_summaries(&dir, &records)?;
            let report = RunReport {
                records,
                summary,
                effects,
            };
            print_report(&report);
            let missing: Vec<_> = report.summary.iter().filter(|r| r.status != "ok").map(|r| &r.point).collect();
            if !missing.is_empty() {
                return Err(Failure::Run(format!("incomplete sweep points: {missing:?}")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
