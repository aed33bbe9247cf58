use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emo_core::builtin::Builtin;
use emo_core::config::{AlgorithmChoice, ExperimentConfig};
use emo_core::diagnostics::OracleOptions;
use emo_core::problem::validate;
use emo_core::runner::{generate_fixture, run_config, EXIT_INVALID, EXIT_NUMERICAL};

#[derive(Parser)]
#[command(name = "emo", version, about = "Distributed continuous-time solvers for extended monotropic optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate DPOFA and/or DDFA and write trajectories and summaries.
    Run(RunArgs),
    /// Check the problem assumptions without running.
    Validate(Source),
    /// Solve a builtin with the centralized oracle and write a fixture.
    Fixture {
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// nonsmooth10, netflow6x12 or minnorm
    #[arg(long)]
    builtin: Option<String>,
    /// TOML experiment file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// dpofa, ddfa or both
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(source: &Source) -> emo_core::Result<ExperimentConfig> {
    match (&source.builtin, &source.config) {
        (Some(b), None) => Ok(ExperimentConfig::builtin(b.parse()?)),
        (None, Some(path)) => ExperimentConfig::from_file(path),
        _ => unreachable!("clap enforces exactly one source"),
    }
}

fn invalid(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_INVALID as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let mut config = match load(&args.source) {
                Ok(c) => c,
                Err(e) => return invalid(e),
            };
            if let Some(a) = &args.algorithm {
                match a.parse::<AlgorithmChoice>() {
                    Ok(a) => config.run.algorithm = Some(a),
                    Err(e) => return invalid(e),
                }
            }
            config.run.h = args.h.or(config.run.h);
            config.run.t_end = args.t_end.or(config.run.t_end);
            config.run.tol = args.tol.or(config.run.tol);
            config.run.seed = args.seed.or(config.run.seed);

            let outcome = run_config(&config, &args.out);
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            for run in &outcome.runs {
                let s = &run.summary;
                let gap = s.oracle_gap.map_or("n/a".to_string(), |g| format!("{g:.3e}"));
                println!(
                    "{} {}: converged={} steps={} t={:.3} |Wx-d0|^2={:.3e} stationarity={:.3e} gap={gap} wall={:.3}s",
                    s.problem, s.algorithm, s.converged, s.steps, s.final_time, s.eq_residual_sq, s.stationarity, s.wall_time_s
                );
                for e in &s.events {
                    println!("  {e}");
                }
                for f in &run.files {
                    println!("  wrote {}", f.display());
                }
            }
            if let Some(e) = &outcome.error {
                eprintln!("error: {e}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Command::Validate(source) => {
            let experiment = match load(&source).and_then(|c| c.resolve()) {
                Ok(e) => e,
                Err(e) => return invalid(e),
            };
            let report = validate(&experiment.problem, &experiment.graph);
            print!("{report}");
            match report.ensure_solvable() {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => invalid(e),
            }
        }
        Command::Fixture { builtin, out, tol } => {
            let b: Builtin = match builtin.parse() {
                Ok(b) => b,
                Err(e) => return invalid(e),
            };
            let opts = OracleOptions { tol, ..OracleOptions::default() };
            match generate_fixture(b, opts).and_then(|f| f.write(&out).map(|_| f)) {
                Ok(f) => {
                    println!("wrote {} ({} variables)", out.display(), f.x_star.len());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_NUMERICAL as u8)
                }
            }
        }
    }
}
