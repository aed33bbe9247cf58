mod common;

use std::sync::Arc;

use emo_core::builtin::{builtin_minnorm, builtin_nonsmooth10, Builtin};
use emo_core::config::ExperimentConfig;
use emo_core::diagnostics::{build_equilibrium, Lyapunov};
use emo_core::dynamics::{Flow, StopRule};
use emo_core::runner::run_config;
use emo_core::{
    ddfa_rhs, dpofa_rhs, integrate, kkt_residual, lyapunov_ddfa, lyapunov_dpofa, AgentProblem, Algorithm,
    CommGraph, ConvexSet, EmoError, EmoProblem, IntegrateOptions, QuadraticL1, SolverState,
};
use nalgebra::{dmatrix, dvector};

fn equilibrium_state(inst: &common::Instance, alg: Algorithm) -> SolverState {
    let eq = build_equilibrium(&inst.problem, &inst.graph, &inst.solution.x_star, &inst.solution.lambda_bar, alg)
        .unwrap();
    SolverState {
        primal: match alg {
            Algorithm::Dpofa => eq.y_star.unwrap(),
            Algorithm::Ddfa => eq.x_star,
        },
        lambda: eq.lambda_star,
        z: eq.z_star,
        t: 0.0,
    }
}

#[test]
fn oracle_equilibria_are_fixed_points() {
    for seed in 100..106 {
        let inst = common::random_instance(seed);
        let (rhs, x) = dpofa_rhs(&inst.problem, &inst.graph, &equilibrium_state(&inst, Algorithm::Dpofa)).unwrap();
        assert!(rhs.norm() <= 1e-8, "seed {seed}: {}", rhs.norm());
        assert!((x - &inst.solution.x_star).amax() <= 1e-9);
        let rhs = ddfa_rhs(&inst.problem, &inst.graph, &equilibrium_state(&inst, Algorithm::Ddfa)).unwrap();
        assert!(rhs.norm() <= 1e-8, "seed {seed}: {}", rhs.norm());
    }
}

#[test]
fn lyapunov_vanishes_at_the_equilibrium() {
    let inst = common::random_instance(7);
    for alg in [Algorithm::Dpofa, Algorithm::Ddfa] {
        let eq = build_equilibrium(&inst.problem, &inst.graph, &inst.solution.x_star, &inst.solution.lambda_bar, alg)
            .unwrap();
        let state = equilibrium_state(&inst, alg);
        let v = match alg {
            Algorithm::Dpofa => lyapunov_dpofa(&inst.problem, &state, &eq).unwrap(),
            Algorithm::Ddfa => lyapunov_ddfa(&inst.problem, &state, &eq).unwrap(),
        };
        assert!(v.abs() < 1e-10, "{alg}: {v}");
        let mut moved = state.clone();
        moved.lambda[0] += 0.5;
        let v = Lyapunov::new(&inst.problem, &eq, alg).unwrap().at(&moved).unwrap();
        assert!((v - 0.125).abs() < 1e-10, "{alg}: {v}");
    }
}

#[test]
fn dpofa_lyapunov_needs_auxiliary_state() {
    let inst = common::random_instance(1);
    let eq = build_equilibrium(&inst.problem, &inst.graph, &inst.solution.x_star, &inst.solution.lambda_bar, Algorithm::Ddfa)
        .unwrap();
    let state = SolverState::zeros(&inst.problem);
    assert!(matches!(lyapunov_dpofa(&inst.problem, &state, &eq), Err(EmoError::MissingAuxiliary)));
}

#[test]
fn converged_limits_satisfy_kkt() {
    // Smooth instance run to a tight tolerance: a state with a tiny
    // right-hand side must be (nearly) optimal.
    let (problem, graph) = builtin_minnorm(3);
    for alg in [Algorithm::Dpofa, Algorithm::Ddfa] {
        let opts = IntegrateOptions {
            h: 1e-2,
            t_end: 2000.0,
            stop: Some(StopRule { tol: 1e-11, dwell: 10 }),
            ..Default::default()
        };
        let traj = integrate(&problem, &graph, alg, SolverState::initial(&problem, alg), &opts).unwrap();
        assert!(traj.converged, "{alg}");
        let rhs = Flow::new(&problem, &graph).unwrap().evaluate(alg, &traj.final_state).unwrap().rhs;
        assert!(rhs.norm() <= 1e-9, "{alg}: {}", rhs.norm());
        let kkt = kkt_residual(&problem, &graph, &traj.final_x, &traj.final_state.lambda).unwrap();
        assert!(kkt.max() <= 1e-6, "{alg}: {kkt:?}");
    }
}

#[test]
fn ddfa_stays_in_set_for_unit_step() {
    let (problem, graph) = builtin_nonsmooth10();
    let opts = IntegrateOptions {
        h: 1.0,
        t_end: 30.0,
        stop: None,
        ..Default::default()
    };
    let (_, log) = common::observed_run(&problem, &graph, Algorithm::Ddfa, &opts, None);
    assert_eq!(log.times.len(), 31);
    assert!(log.max_set_distance <= 1e-10);
}

#[test]
fn ddfa_rejects_steps_above_one() {
    let (problem, graph) = builtin_nonsmooth10();
    let opts = IntegrateOptions { h: 1.5, ..Default::default() };
    let init = SolverState::initial(&problem, Algorithm::Ddfa);
    assert!(matches!(
        integrate(&problem, &graph, Algorithm::Ddfa, init, &opts),
        Err(EmoError::Precondition(_))
    ));
}

#[test]
fn z_mass_is_conserved() {
    for seed in [2, 5] {
        let inst = common::random_instance(seed);
        for alg in [Algorithm::Dpofa, Algorithm::Ddfa] {
            let (_, log) = common::observed_run(&inst.problem, &inst.graph, alg, &IntegrateOptions::default(), None);
            assert!(log.max_z_mass_drift <= 1e-8, "seed {seed} {alg}: {}", log.max_z_mass_drift);
        }
    }
}

#[test]
fn consensus_is_reached_on_converged_runs() {
    let (problem, graph) = builtin_nonsmooth10();
    for alg in [Algorithm::Dpofa, Algorithm::Ddfa] {
        let traj = integrate(&problem, &graph, alg, SolverState::initial(&problem, alg), &IntegrateOptions::default())
            .unwrap();
        assert!(traj.converged);
        let lambda = &traj.final_state.lambda;
        let l_lambda = graph.apply_laplacian(problem.m(), lambda);
        assert!(l_lambda.norm() < 1e-4);
    }
}

#[test]
fn mismatched_graph_is_rejected() {
    let (problem, _) = builtin_nonsmooth10();
    assert!(Flow::new(&problem, &CommGraph::ring(9)).is_err());
}

#[test]
fn disconnected_graph_has_no_equilibrium() {
    let inst = common::random_instance(4);
    let graph = CommGraph::empty(inst.problem.n());
    let err = build_equilibrium(&inst.problem, &graph, &inst.solution.x_star, &inst.solution.lambda_bar, Algorithm::Ddfa)
        .unwrap_err();
    assert!(matches!(err, EmoError::Disconnected { .. }));
}

#[test]
fn chattering_guard_halves_step_once() {
    // One agent, f = |x|, no coupling pressure: x = 0 is optimal, but the
    // sign selection makes Euler bounce around it once x leaves the kink.
    let agent = AgentProblem::new(
        Arc::new(QuadraticL1::new(dmatrix![0.0], dvector![0.0], 1.0).unwrap()),
        ConvexSet::interval(-1.0, 1.0).unwrap(),
        dmatrix![0.0],
        dvector![0.0],
    );
    let problem = EmoProblem::new(vec![agent], dvector![0.0]).unwrap();
    let graph = CommGraph::empty(1);
    let mut init = SolverState::zeros(&problem);
    init.primal[0] = 0.0105;
    let opts = IntegrateOptions {
        h: 1e-2,
        t_end: 300.0,
        stop: Some(StopRule::default()),
        ..Default::default()
    };
    let traj = integrate(&problem, &graph, Algorithm::Ddfa, init, &opts).unwrap();
    assert_eq!(traj.events.len(), 1, "{:?}", traj.events);
    assert_eq!(traj.h_final, 5e-3);
    let dt: Vec<f64> = traj.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    assert!(dt.iter().all(|d| (d - 1e-2).abs() < 1e-9 || (d - 5e-3).abs() < 1e-9));
}

#[test]
fn identical_configs_give_identical_csv_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::builtin(Builtin::Minnorm);
    cfg.run.seed = Some(9);
    cfg.run.t_end = Some(20.0);
    let oa = run_config(&cfg, a.path());
    let ob = run_config(&cfg, b.path());
    assert!(oa.error.is_none() && ob.error.is_none());
    for alg in ["dpofa", "ddfa"] {
        let name = format!("minnorm_{alg}.csv");
        let ba = std::fs::read(a.path().join(&name)).unwrap();
        let bb = std::fs::read(b.path().join(&name)).unwrap();
        assert!(!ba.is_empty());
        assert_eq!(ba, bb, "{name}");
    }
}

#[test]
fn csv_file_matches_in_memory_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::builtin(Builtin::Nonsmooth10);
    cfg.run.t_end = Some(5.0);
    let out = run_config(&cfg, dir.path());
    assert_eq!(out.runs.len(), 2);
    for run in &out.runs {
        let back = emo_core::telemetry::read_csv_file(&run.files[0]).unwrap();
        assert_eq!(back, run.trajectory.samples);
        let last = back.last().unwrap();
        assert_eq!(last.x, run.trajectory.final_x.iter().copied().collect::<Vec<_>>());
    }
}
