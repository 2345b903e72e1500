use clap::{Parser, Subcommand};
use jklab_cli::runner::{self, RunOptions, SEED_ENV};
use jklab_cli::{builtin, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run heat-kernel and stability experiments on finite metric measure spaces.
#[derive(Debug, Parser)]
#[command(name = "jklab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random component (overrides JKLAB_SEED and the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum number of checkers run concurrently.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment given as a TOML file or a built-in name.
    Run { config: String },
    /// List the built-in experiments.
    List,
    /// Write the envelope table `envelope.csv` of an experiment.
    Envelope { config: String },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let opts = RunOptions {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out,
    };
    if opts.workers == Some(0) {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    match cli.command {
        Command::List => {
            for line in builtin::list_lines() {
                println!("{line}");
            }
            Ok(0)
        }
        Command::Envelope { config } => {
            let (cfg, text) = runner::load_config(&config)?;
            let dir = runner::output_dir(&opts, &cfg);
            let prep = runner::prepare(cfg, &text)?;
            let path = runner::write_atomic(&dir, "envelope.csv", &runner::envelope_csv(&prep)?)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Run { config } => {
            let (cfg, text) = runner::load_config(&config)?;
            let env = std::env::var(SEED_ENV).ok();
            let seed = runner::resolve_seed(opts.seed, env.as_deref(), cfg.seed)?;
            let dir = runner::output_dir(&opts, &cfg);
            let prep = runner::prepare(cfg, &text)?;
            for w in &prep.warnings {
                eprintln!("warning: {w}");
            }
            let outcome = runner::run_experiment(&prep, seed, opts.workers)?;
            runner::write_outputs(&dir, &outcome)?;
            for c in &outcome.report.checks {
                match &c.error {
                    Some(e) => println!("{:<18} error  {e}", c.check),
                    None => println!("{:<18} {}", c.check, c.status),
                }
            }
            for v in &outcome.report.verdicts {
                println!(
                    "  {:<12} {:<4} worst_ratio = {:.4} (threshold {})",
                    v.condition,
                    if v.pass { "pass" } else { "FAIL" },
                    v.worst_ratio,
                    v.threshold
                );
            }
            println!("reports written to {}", dir.display());
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
