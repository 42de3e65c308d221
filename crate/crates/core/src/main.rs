use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sharpbound::cli::{run_bound, run_sweep, write_csv, write_report, CliError, SweepSpec};
use sharpbound::report::RunOptions;

#[derive(Parser)]
#[command(name = "sharpbound", version, about = "Sharp bounds on expectations under moment constraints")]
struct Args {
    /// Leave timestamps and timings out of the output
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Progress and summaries on standard error; keep the iterate history in reports
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one config and write a JSON report
    Bound {
        config: PathBuf,
        /// Report path (standard output by default)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve a config over a range of one parameter and write CSV
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 81)]
        steps: usize,
        /// CSV path (standard output by default)
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn run(args: &Args) -> Result<i32> {
    let opts = RunOptions {
        timestamp: !args.no_timestamp,
        keep_history: args.verbose,
    };
    match &args.command {
        Command::Bound { config, out } => {
            let report = run_bound(config, opts)?;
            if args.verbose {
                for r in &report.results {
                    eprintln!(
                        "{}: {:?} ({:?}, {} stages, {} evaluations)",
                        r.result.direction.as_str(),
                        r.result.bound,
                        r.result.status,
                        r.result.stages.len(),
                        r.result.evaluations
                    );
                }
            }
            write_report(&report, &mut output(out)?)?;
            if let Some(alpha) = infeasible_alpha(&report) {
                eprintln!("infeasible: separating direction alpha = {alpha:?}");
            }
            Ok(report.exit_code)
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
            out,
        } => {
            let spec = SweepSpec {
                param: param.clone(),
                from: *from,
                to: *to,
                steps: *steps,
            };
            let rows = run_sweep(config, &spec, opts)?;
            if args.verbose {
                let failed = rows.iter().filter(|r| r.status != "ok").count();
                eprintln!("{} rows, {failed} not ok", rows.len());
            }
            write_csv(&rows, output(out)?)?;
            Ok(0)
        }
    }
}

fn infeasible_alpha(report: &sharpbound::report::Report) -> Option<Vec<f64>> {
    match &report.feasibility.status {
        sharpbound::dual::FeasibilityStatus::Infeasible { alpha, .. } => Some(alpha.clone()),
        _ => None,
    }
}
