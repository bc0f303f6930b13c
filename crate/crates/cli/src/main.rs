use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iph::Parallelism;
use iph_cli::commands::{self, Query};
use iph_cli::config::{FitOptions, RunConfig};
use iph_cli::error::{CliError, CliResult};
use iph_cli::report::run_fit;

/// Fit and evaluate transformed phase-type distributions.
#[derive(Parser)]
#[command(name = "iph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a transformed phase-type model to positive data
    Fit {
        /// TOML file with the same keys as the flags; flags win
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        options: Box<FitOptions>,
    },
    /// Evaluate a saved model
    Eval {
        /// Parameter document written by `fit`
        #[arg(long)]
        params: PathBuf,
        #[arg(value_enum)]
        query: Query,
        /// Point or probability level (omit for `mean`)
        #[arg(allow_negative_numbers = true)]
        arg: Option<f64>,
    },
    /// Draw a seeded sample from a saved model
    Sample {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the matrix evaluation path against closed-form densities
    OracleCheck,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { config, options } => {
            let options = match config {
                Some(path) => options.over(FitOptions::from_toml_file(&path)?),
                None => *options,
            };
            let cfg = RunConfig::resolve(options)?;
            let report = run_fit(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let s = &report.summary;
            println!("observations        {}", s.n_obs);
            println!("shift               {}", report.shift);
            println!("iterations          {} (converged: {})", s.iterations, s.converged);
            println!("loglik transformed  {:.6}", s.loglik_transformed);
            println!("loglik original     {:.6}", s.loglik_original);
            if let Some(b) = &report.baseline {
                println!(
                    "erlang({}) rate      {:.6}, loglik transformed {:.6}, original {:.6}",
                    b.phases, b.rate, b.loglik_transformed, b.loglik_original
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Eval { params, query, arg } => {
            let model = commands::load_model(&params)?;
            println!("{}", commands::eval(&model, query, arg)?);
        }
        Command::Sample { params, count, seed, out } => {
            let model = commands::load_model(&params)?;
            let text = commands::sample(&model, count, seed, Parallelism::Deterministic)?;
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{text}"),
            }
        }
        Command::OracleCheck => {
            let r = commands::oracle_check()?;
            for l in &r.lines {
                println!("{l}");
            }
            if !r.passed {
                return Err(CliError::numerical("oracle check failed"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iph: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
