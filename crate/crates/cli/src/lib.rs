//! Command-line front end for the double-step Rothe scheme on the 1-D heat
//! problem with a nonsmooth boundary condition.
//!
//! ```text
//! rothe-hvi run|study|compare|check <config.toml> [--out DIR] [--seed N] [--jobs N] [--quiet]
//! ```

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::Summary;

#[derive(Debug, Parser)]
#[command(name = "rothe-hvi", version, about = "Double-step Rothe scheme experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Run,
    Study,
    Compare,
    Check,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single trajectory at the finest configured step.
    Run(CommonArgs),
    /// Step-size ladder: estimates, errors and fitted order.
    Study(CommonArgs),
    /// BDF2 against backward Euler on the same ladder.
    Compare(CommonArgs),
    /// Hypothesis checks; exits nonzero on any violation.
    Check(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Config file (TOML).
    #[arg(value_name = "CONFIG", required_unless_present = "config", conflicts_with = "config")]
    pub path: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, value_name = "DIR", env = "ROTHE_HVI_OUT")]
    pub out: Option<PathBuf>,
    /// Overrides `[check] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    pub fn split(&self) -> (CommandKind, &CommonArgs) {
        match self {
            Command::Run(a) => (CommandKind::Run, a),
            Command::Study(a) => (CommandKind::Study, a),
            Command::Compare(a) => (CommandKind::Compare, a),
            Command::Check(a) => (CommandKind::Check, a),
        }
    }
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Run => "run",
            CommandKind::Study => "study",
            CommandKind::Compare => "compare",
            CommandKind::Check => "check",
        }
    }
}

/// Runs one command and writes `summary.csv`. A command that errors still
/// leaves a summary with a FAIL row.
pub fn execute(kind: CommandKind, cfg: &ExperimentConfig, ctx: &Context) -> Result<Summary, CliError> {
    output::ensure_dir(&ctx.out_dir)?;
    let result = match kind {
        CommandKind::Run => commands::cmd_run(cfg, ctx),
        CommandKind::Study => commands::cmd_study(cfg, ctx),
        CommandKind::Compare => commands::cmd_compare(cfg, ctx),
        CommandKind::Check => commands::cmd_check(cfg, ctx),
    };
    match result {
        Ok(summary) => {
            summary.write(&ctx.out_dir)?;
            Ok(summary)
        }
        Err(e) => {
            let mut summary = Summary::default();
            summary.push(kind.name(), "error", false, f64::NAN, e.to_string());
            summary.write(&ctx.out_dir)?;
            Err(e)
        }
    }
}

fn run_cli(cli: &Cli) -> Result<Summary, CliError> {
    let (kind, args) = cli.command.split();
    let path = args.path.as_ref().or(args.config.as_ref()).expect("clap requires a config path");
    let cfg = ExperimentConfig::load(path)?;
    let ctx = Context {
        out_dir: args.out.clone().unwrap_or_else(|| cfg.output.dir.clone()),
        seed: args.seed,
        quiet: args.quiet,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let summary = pool.install(|| execute(kind, &cfg, &ctx))?;
    if !args.quiet {
        for r in &summary.rows {
            let status = if r.passed { "PASS" } else { "FAIL" };
            println!("{status} {} {} = {:e} {}", r.command, r.item, r.value, r.detail);
        }
        println!("wrote {}", ctx.out_dir.join("summary.csv").display());
    }
    let failed = summary.failures();
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total: summary.rows.len() });
    }
    Ok(summary)
}

/// Exit codes: 0 success, 1 failed checks or run, 2 bad config or usage.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run_cli(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e @ (CliError::Config(_) | CliError::Io { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
