//! Runs an [`Experiment`] end to end: integrate, compare with the reference
//! optimum, write telemetry.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;

use crate::builtin::{least_norm_solution, Builtin};
use crate::config::{Experiment, ExperimentConfig};
use crate::diagnostics::{centralized_oracle, kkt_residual, OracleOptions};
use crate::dynamics::{integrate, Algorithm, Trajectory};
use crate::error::{EmoError, Result};
use crate::fixture::Fixture;
use crate::problem::{stack, validate};
use crate::telemetry::{write_csv_file, RunSummary};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Known optimum used to report the optimality gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: DVector<f64>,
    pub source: String,
}

#[derive(Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub runs: Vec<RunReport>,
    pub notes: Vec<String>,
    pub error: Option<EmoError>,
}

/// Reference optimum: the shipped fixture for builtins with one, the
/// least-norm formula for `minnorm`, otherwise the centralized oracle.
pub fn reference_for(experiment: &Experiment, notes: &mut Vec<String>) -> Option<Reference> {
    match experiment.builtin {
        Some(Builtin::Minnorm) => {
            let s = stack(&experiment.problem);
            return least_norm_solution(&s.w, experiment.problem.d0()).map(|x_star| Reference {
                x_star,
                source: "closed-form least-norm solution".into(),
            });
        }
        Some(b) => match Fixture::embedded(b) {
            Some(Ok(f)) if f.matches(&experiment.problem) => {
                return Some(Reference {
                    x_star: f.x_star,
                    source: format!("fixture {} ({})", f.problem, f.oracle_version),
                })
            }
            Some(Ok(_)) => notes.push(format!("embedded fixture for {b} does not match the problem hash")),
            Some(Err(e)) => notes.push(format!("embedded fixture for {b} unreadable: {e}")),
            None => {}
        },
        None => {}
    }
    match centralized_oracle(&experiment.problem, OracleOptions::default()) {
        Ok(sol) => Some(Reference {
            x_star: sol.x_star,
            source: "centralized oracle".into(),
        }),
        Err(e) => {
            notes.push(format!("no reference optimum: {e}"));
            None
        }
    }
}

fn summarize(
    experiment: &Experiment,
    traj: &Trajectory,
    reference: Option<&Reference>,
    wall_time_s: f64,
) -> Result<RunSummary> {
    let kkt = kkt_residual(&experiment.problem, &experiment.graph, &traj.final_x, &traj.final_state.lambda)?;
    let last = traj.samples.last().expect("trajectory has samples");
    Ok(RunSummary {
        problem: experiment.name.clone(),
        algorithm: traj.algorithm.name().to_string(),
        converged: traj.converged,
        steps: traj.steps,
        final_time: traj.final_state.t,
        h: traj.step,
        h_final: traj.h_final,
        wall_time_s,
        objective: last.f_value,
        eq_residual_sq: last.eq_residual_sq,
        stationarity: kkt.stationarity,
        feasibility: kkt.feasibility,
        consensus: kkt.consensus,
        oracle_gap: reference.map(|r| (&traj.final_x - &r.x_star).amax()),
        reference: reference.map(|r| r.source.clone()),
        events: traj.events.clone(),
        x: traj.final_x.iter().copied().collect(),
        lambda_bar: kkt.lambda_bar.iter().copied().collect(),
    })
}

fn run_one(experiment: &Experiment, algorithm: Algorithm) -> Result<(Trajectory, f64)> {
    let init = experiment.initial_state(algorithm)?;
    let start = Instant::now();
    let traj = integrate(&experiment.problem, &experiment.graph, algorithm, init, &experiment.options)?;
    Ok((traj, start.elapsed().as_secs_f64()))
}

fn is_numerical(e: &EmoError) -> bool {
    match e {
        EmoError::NonFinite { .. } | EmoError::Io(_) | EmoError::Csv(_) => true,
        EmoError::Precondition(msg) => msg.starts_with("integrator fault"),
        _ => false,
    }
}

/// Resolves, validates and runs a configuration, writing
/// `{name}_{alg}.csv`, `{name}_{alg}_summary.txt` and `.json` into `out_dir`.
/// With both algorithms selected the two runs execute concurrently.
pub fn run_config(config: &ExperimentConfig, out_dir: &Path) -> Outcome {
    let mut notes = Vec::new();
    let fail = |code, e, notes| Outcome {
        exit_code: code,
        runs: Vec::new(),
        notes,
        error: Some(e),
    };
    let experiment = match config.resolve() {
        Ok(e) => e,
        Err(e) => return fail(EXIT_INVALID, e, notes),
    };
    let report = validate(&experiment.problem, &experiment.graph);
    if let Err(e) = report.ensure_solvable() {
        return fail(EXIT_INVALID, e, notes);
    }
    for check in &report.checks {
        if check.status != crate::problem::CheckStatus::Pass {
            notes.push(format!("assumption {}: {:?} ({})", check.name, check.status, check.detail));
        }
    }
    for &alg in &experiment.algorithms {
        if let Err(e) = experiment.initial_state(alg) {
            return fail(EXIT_INVALID, e, notes);
        }
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return fail(EXIT_NUMERICAL, e.into(), notes);
    }
    let reference = reference_for(&experiment, &mut notes);

    let results: Vec<Result<(Trajectory, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = experiment
            .algorithms
            .iter()
            .map(|&alg| {
                let exp = &experiment;
                scope.spawn(move || run_one(exp, alg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    let mut runs = Vec::new();
    for result in results {
        let (traj, wall) = match result {
            Ok(r) => r,
            Err(e) => {
                let code = if is_numerical(&e) { EXIT_NUMERICAL } else { EXIT_INVALID };
                return Outcome {
                    exit_code: code,
                    runs,
                    notes,
                    error: Some(e),
                };
            }
        };
        let written = summarize(&experiment, &traj, reference.as_ref(), wall)
            .and_then(|summary| write_outputs(&experiment.name, &traj, &summary, out_dir).map(|files| (summary, files)));
        match written {
            Ok((summary, files)) => runs.push(RunReport {
                summary,
                trajectory: traj,
                files,
            }),
            Err(e) => {
                return Outcome {
                    exit_code: EXIT_NUMERICAL,
                    runs,
                    notes,
                    error: Some(e),
                }
            }
        }
    }
    let exit_code = if runs.iter().all(|r| r.summary.converged) {
        EXIT_CONVERGED
    } else {
        EXIT_NOT_CONVERGED
    };
    Outcome {
        exit_code,
        runs,
        notes,
        error: None,
    }
}

fn write_outputs(name: &str, traj: &Trajectory, summary: &RunSummary, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let stem = format!("{name}_{}", traj.algorithm.name());
    let csv = out_dir.join(format!("{stem}.csv"));
    write_csv_file(traj, &csv)?;
    let txt = out_dir.join(format!("{stem}_summary.txt"));
    std::fs::write(&txt, summary.to_text())?;
    let json = out_dir.join(format!("{stem}_summary.json"));
    std::fs::write(&json, summary.to_json())?;
    Ok(vec![csv, txt, json])
}

/// Solves a builtin with the centralized oracle and packages the result.
pub fn generate_fixture(builtin: Builtin, opts: OracleOptions) -> Result<Fixture> {
    let (problem, _) = builtin.load(0);
    let solution = centralized_oracle(&problem, opts)?;
    Ok(Fixture::from_solution(builtin.name(), &problem, &solution, opts.tol))
}
