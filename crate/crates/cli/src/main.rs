use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use moretro::experiment::{
    emit_front_plotdata, oracle_dump, run_benchmark, run_single, RunConfig, RunReport, RunSettings, Strategy,
    SuiteConfig,
};
use moretro::oracle::DEFAULT_ROUTE_CAP;

/// Exit code for a run that found no route.
const NO_ROUTE: u8 = 2;

#[derive(Parser)]
#[command(name = "moretro", version, about = "Multi-objective retrosynthesis planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Weight-sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Expansion budget N_B.
    #[arg(long)]
    budget: Option<usize>,
    /// Additive slack for bound pruning.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Overrides {
    fn apply(&self, s: &mut RunSettings) {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(budget) = self.budget {
            s.budget = budget;
        }
        if let Some(epsilon) = self.epsilon {
            s.epsilon = epsilon;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Search one target and write the run JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run JSON destination; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Hypervolume trace CSV destination.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every strategy on every target of a suite and aggregate.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Aggregate CSV destination; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for the per-run JSON files.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
        /// Replaces the suite's strategy list; repeatable.
        #[arg(long)]
        strategy: Vec<Strategy>,
        #[arg(long, env = "MORETRO_WORKERS")]
        workers: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Enumerate every route of a run config's world and its true front.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ROUTE_CAP)]
        cap: usize,
    },
    /// Front points of a run JSON as CSV.
    Plotdata {
        /// Run JSON written by `run`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Run {
            config,
            out,
            trace,
            strategy,
            overrides,
        } => {
            let mut c = RunConfig::load(&config)?;
            overrides.apply(&mut c.settings);
            if let Some(s) = strategy {
                c.strategy = s;
            }
            if out.is_some() {
                c.output = out;
            }
            if trace.is_some() {
                c.trace_output = trace;
            }
            let report = run_single(&c)?;
            if c.output.is_none() {
                println!("{}", report.to_json());
            }
            log::info!(
                "{} routes, {} expansions, {:?}",
                report.archive.len(),
                report.stats.expansions,
                report.stats.termination
            );
            Ok(if report.success { 0 } else { NO_ROUTE })
        }
        Command::Bench {
            config,
            out,
            runs_dir,
            strategy,
            workers,
            overrides,
        } => {
            let mut suite = SuiteConfig::load(&config)?;
            overrides.apply(&mut suite.settings);
            if !strategy.is_empty() {
                suite.strategies = strategy;
            }
            if out.is_some() {
                suite.output = out;
            }
            if runs_dir.is_some() {
                suite.runs_dir = runs_dir;
            }
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let report = run_benchmark(&suite, workers)?;
            if suite.output.is_none() {
                print!("{}", report.to_csv()?);
            }
            Ok(0)
        }
        Command::Oracle { config, out, cap } => {
            let c = RunConfig::load(&config)?;
            let dump = oracle_dump(&c, cap)?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&dump)? + "\n"))?;
            Ok(0)
        }
        Command::Plotdata { run, out } => {
            let report = RunReport::load(&run)?;
            emit(out.as_deref(), &emit_front_plotdata(&report)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap uses 2 for usage errors, which is taken by "no route"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
