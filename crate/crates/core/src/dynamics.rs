//! Right-hand sides of the two distributed flows and the fixed-step
//! integrator that simulates them.
//!
//! Both flows share the multiplier and auxiliary dynamics
//!
//! ```text
//! λ̇ = d − W̄x − Lλ − Lz  [− W̄ẋ for DDFA]
//! ż = Lλ
//! ```
//!
//! with `L = L_n ⊗ I_m`. DPOFA drives an unconstrained `y` and reads out
//! `x = P_Ω(y)`; DDFA moves `x` along `p = P_Ω(x − g(x) + W̄ᵀλ) − x` and
//! feeds `p` back into `λ̇`. Each agent only touches its own blocks and its
//! neighbours' `λ_j`, `z_j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, EmoError, Result};
use crate::network::CommGraph;
use crate::problem::{stack, EmoProblem, StackedForm};
use crate::projection::project_vec;

/// Largest distance from `Ω` tolerated for a DDFA state.
pub const DDFA_MEMBERSHIP_TOL: f64 = 1e-9;

/// Steps without a new best residual before the chattering guard halves `h`.
pub const CHATTER_WINDOW: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Projected output feedback.
    Dpofa,
    /// Derivative feedback.
    Ddfa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dpofa => "dpofa",
            Self::Ddfa => "ddfa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = EmoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dpofa" => Ok(Self::Dpofa),
            "ddfa" => Ok(Self::Ddfa),
            other => Err(EmoError::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Stacked state. `primal` is `y` for DPOFA and `x` for DDFA.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub primal: DVector<f64>,
    pub lambda: DVector<f64>,
    pub z: DVector<f64>,
    pub t: f64,
}

impl SolverState {
    pub fn zeros(problem: &EmoProblem) -> Self {
        let nm = problem.n() * problem.m();
        Self {
            primal: DVector::zeros(problem.total_dim()),
            lambda: DVector::zeros(nm),
            z: DVector::zeros(nm),
            t: 0.0,
        }
    }

    /// `y₀ = 0` for DPOFA, `x₀ = P_Ω(0)` for DDFA, `λ₀ = z₀ = 0`.
    pub fn initial(problem: &EmoProblem, algorithm: Algorithm) -> Self {
        let mut s = Self::zeros(problem);
        if algorithm == Algorithm::Ddfa {
            s.primal = project_vec(&stack(problem).omega, &s.primal);
        }
        s
    }

    fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        for (name, v) in [("primal", &self.primal), ("lambda", &self.lambda), ("z", &self.z)] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Some((name, i));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub primal: DVector<f64>,
    pub lambda: DVector<f64>,
    pub z: DVector<f64>,
}

impl Rhs {
    pub fn norm(&self) -> f64 {
        (self.primal.norm_squared() + self.lambda.norm_squared() + self.z.norm_squared()).sqrt()
    }
}

/// Right-hand side together with the residuals the stop rule looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rhs: Rhs,
    /// Current estimate: `P_Ω(y)` for DPOFA, the state itself for DDFA.
    pub x: DVector<f64>,
    /// `‖P_Ω(x − g(x) + W̄ᵀλ) − x‖∞`.
    pub stationarity: f64,
    /// `‖Wx − d₀‖∞`.
    pub feasibility: f64,
    /// `‖Lλ‖∞`.
    pub consensus: f64,
}

/// Precomputed operators for one problem/graph pair.
#[derive(Debug, Clone)]
pub struct Flow<'a> {
    problem: &'a EmoProblem,
    graph: &'a CommGraph,
    stacked: StackedForm,
    d: DVector<f64>,
}

impl<'a> Flow<'a> {
    pub fn new(problem: &'a EmoProblem, graph: &'a CommGraph) -> Result<Self> {
        if graph.n() != problem.n() {
            return Err(EmoError::InvalidGraph(format!(
                "graph has {} nodes but the problem has {} agents",
                graph.n(),
                problem.n()
            )));
        }
        Ok(Self {
            problem,
            graph,
            stacked: stack(problem),
            d: problem.stacked_supply(),
        })
    }

    pub fn problem(&self) -> &EmoProblem {
        self.problem
    }

    pub fn graph(&self) -> &CommGraph {
        self.graph
    }

    pub fn stacked(&self) -> &StackedForm {
        &self.stacked
    }

    fn check_state(&self, state: &SolverState) -> Result<()> {
        let nm = self.problem.n() * self.problem.m();
        check_len("primal state", self.stacked.total_dim, state.primal.len())?;
        check_len("lambda state", nm, state.lambda.len())?;
        check_len("z state", nm, state.z.len())
    }

    fn laplacian(&self, v: &DVector<f64>) -> DVector<f64> {
        self.graph.apply_laplacian(self.problem.m(), v)
    }

    /// `d − W̄x − Lλ − Lz` and `Lλ`.
    fn multiplier_terms(&self, x: &DVector<f64>, state: &SolverState) -> (DVector<f64>, DVector<f64>) {
        let l_lambda = self.laplacian(&state.lambda);
        let l_z = self.laplacian(&state.z);
        let dlambda = &self.d - &self.stacked.wbar * x - &l_lambda - l_z;
        (dlambda, l_lambda)
    }

    /// `P_Ω(x − g(x) + W̄ᵀλ) − x`.
    fn projected_direction(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        let g = self.problem.subgradient(x);
        let arg = x - g + self.stacked.wbar.tr_mul(lambda);
        project_vec(&self.stacked.omega, &arg) - x
    }

    /// DPOFA right-hand side and the projected output `x = P_Ω(y)`.
    pub fn dpofa(&self, state: &SolverState) -> Result<(Rhs, DVector<f64>)> {
        self.check_state(state)?;
        let y = &state.primal;
        let x = project_vec(&self.stacked.omega, y);
        let g = self.problem.subgradient(&x);
        let dy = -y + &x - g + self.stacked.wbar.tr_mul(&state.lambda);
        let (dlambda, dz) = self.multiplier_terms(&x, state);
        Ok((
            Rhs {
                primal: dy,
                lambda: dlambda,
                z: dz,
            },
            x,
        ))
    }

    /// DDFA right-hand side. The derivative feedback uses `p` directly.
    pub fn ddfa(&self, state: &SolverState) -> Result<Rhs> {
        self.check_state(state)?;
        let x = &state.primal;
        let distance = self.stacked.omega.distance(x.as_slice());
        if !(distance <= DDFA_MEMBERSHIP_TOL) {
            return Err(EmoError::NotInSet { distance });
        }
        let p = self.projected_direction(x, &state.lambda);
        let (dlambda, dz) = self.multiplier_terms(x, state);
        let dlambda = dlambda - &self.stacked.wbar * &p;
        Ok(Rhs {
            primal: p,
            lambda: dlambda,
            z: dz,
        })
    }

    pub fn evaluate(&self, algorithm: Algorithm, state: &SolverState) -> Result<Evaluation> {
        let (rhs, x, stationarity) = match algorithm {
            Algorithm::Dpofa => {
                let (rhs, x) = self.dpofa(state)?;
                let s = self.projected_direction(&x, &state.lambda).amax();
                (rhs, x, s)
            }
            Algorithm::Ddfa => {
                let rhs = self.ddfa(state)?;
                let s = rhs.primal.amax();
                (rhs, state.primal.clone(), s)
            }
        };
        let feasibility = (&self.stacked.w * &x - self.problem.d0()).amax();
        let consensus = rhs.z.amax();
        Ok(Evaluation {
            rhs,
            x,
            stationarity,
            feasibility,
            consensus,
        })
    }
}

pub fn dpofa_rhs(problem: &EmoProblem, graph: &CommGraph, state: &SolverState) -> Result<(Rhs, DVector<f64>)> {
    Flow::new(problem, graph)?.dpofa(state)
}

pub fn ddfa_rhs(problem: &EmoProblem, graph: &CommGraph, state: &SolverState) -> Result<Rhs> {
    Flow::new(problem, graph)?.ddfa(state)
}

/// Fires once stationarity, feasibility and consensus residuals have all
/// stayed below `tol` for `dwell` consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub tol: f64,
    pub dwell: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { tol: 1e-6, dwell: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub h: f64,
    pub t_end: f64,
    pub stop: Option<StopRule>,
    /// Telemetry is recorded every `sample_stride` steps and at the end.
    pub sample_stride: usize,
    /// Halve `h` once when a nonsmooth run stops improving for
    /// [`CHATTER_WINDOW`] steps.
    pub chattering_guard: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            h: 1e-2,
            t_end: 100.0,
            stop: Some(StopRule::default()),
            sample_stride: 1,
            chattering_guard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub f_value: f64,
    pub eq_residual_sq: f64,
    pub lambda_norm_sq: f64,
    pub z_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    /// Step size the run started with.
    pub step: f64,
    /// Step size at the end (differs from `step` after a chattering halving).
    pub h_final: f64,
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub final_state: SolverState,
    pub final_x: DVector<f64>,
    pub converged: bool,
    pub stationarity: f64,
    pub feasibility: f64,
    pub consensus: f64,
    pub events: Vec<String>,
}

/// What an observer sees after every accepted step (and for the initial
/// state, with `step == 0`).
#[derive(Debug)]
pub struct StepView<'s> {
    pub step: usize,
    pub h: f64,
    pub state: &'s SolverState,
    pub eval: &'s Evaluation,
}

pub fn integrate(
    problem: &EmoProblem,
    graph: &CommGraph,
    algorithm: Algorithm,
    init: SolverState,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    integrate_observed(problem, graph, algorithm, init, opts, |_| {})
}

/// Forward Euler, `state ← state + h·rhs(state)`, until `t_end` or the stop
/// rule fires.
pub fn integrate_observed<F>(
    problem: &EmoProblem,
    graph: &CommGraph,
    algorithm: Algorithm,
    init: SolverState,
    opts: &IntegrateOptions,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&StepView<'_>),
{
    if !(opts.h > 0.0 && opts.h.is_finite()) {
        return Err(EmoError::Precondition(format!("step size must be positive, got {}", opts.h)));
    }
    if algorithm == Algorithm::Ddfa && opts.h > 1.0 {
        return Err(EmoError::Precondition(format!(
            "DDFA needs h <= 1 to keep x in the constraint set, got {}",
            opts.h
        )));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(EmoError::Precondition(format!("t_end must be finite and >= 0, got {}", opts.t_end)));
    }
    if opts.sample_stride == 0 {
        return Err(EmoError::Precondition("sample stride must be at least 1".into()));
    }
    let flow = Flow::new(problem, graph)?;
    flow.check_state(&init)?;
    if algorithm == Algorithm::Ddfa {
        let distance = flow.stacked.omega.distance(init.primal.as_slice());
        if !(distance <= DDFA_MEMBERSHIP_TOL) {
            return Err(EmoError::Precondition(format!(
                "DDFA initial point lies {distance:e} outside the constraint set"
            )));
        }
    }
    if let Some((field, index)) = init.first_non_finite() {
        return Err(EmoError::NonFinite { step: 0, field, index });
    }

    let guard_active = opts.chattering_guard && !problem.is_smooth();
    let mut h = opts.h;
    let mut state = init;
    let t0 = state.t;
    let (mut anchor_t, mut anchor_k) = (t0, 0usize);
    let mut k = 0usize;
    let mut eval = flow.evaluate(algorithm, &state)?;
    let mut samples = vec![sample(problem, &flow.stacked.w, &state, &eval)];
    let mut last_sampled = 0usize;
    let mut below = 0usize;
    let mut converged = false;
    let mut events = Vec::new();
    let mut halved = false;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    observer(&StepView {
        step: 0,
        h,
        state: &state,
        eval: &eval,
    });

    loop {
        let residual = eval.stationarity.max(eval.feasibility);
        if let Some(rule) = &opts.stop {
            if residual.max(eval.consensus) < rule.tol {
                below += 1;
                if below >= rule.dwell {
                    converged = true;
                    break;
                }
            } else {
                below = 0;
            }
        }
        if guard_active && !halved {
            if residual < best {
                best = residual;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= CHATTER_WINDOW {
                    halved = true;
                    h *= 0.5;
                    anchor_t = state.t;
                    anchor_k = k;
                    events.push(format!(
                        "step {k} (t = {:.6}): residual stalled at {residual:.3e} for {CHATTER_WINDOW} steps, h halved to {h}",
                        state.t
                    ));
                }
            }
        }
        if state.t >= t0 + opts.t_end - 0.5 * h {
            break;
        }

        state.primal.axpy(h, &eval.rhs.primal, 1.0);
        state.lambda.axpy(h, &eval.rhs.lambda, 1.0);
        state.z.axpy(h, &eval.rhs.z, 1.0);
        k += 1;
        state.t = anchor_t + (k - anchor_k) as f64 * h;
        if let Some((field, index)) = state.first_non_finite() {
            return Err(EmoError::NonFinite { step: k, field, index });
        }
        eval = flow.evaluate(algorithm, &state).map_err(|e| match e {
            EmoError::NotInSet { distance } => EmoError::Precondition(format!(
                "integrator fault at step {k}: DDFA state left the constraint set by {distance:e}"
            )),
            other => other,
        })?;
        observer(&StepView {
            step: k,
            h,
            state: &state,
            eval: &eval,
        });
        if k % opts.sample_stride == 0 {
            samples.push(sample(problem, &flow.stacked.w, &state, &eval));
            last_sampled = k;
        }
    }
    if last_sampled != k {
        samples.push(sample(problem, &flow.stacked.w, &state, &eval));
    }

    Ok(Trajectory {
        algorithm,
        step: opts.h,
        h_final: h,
        samples,
        steps: k,
        final_x: eval.x.clone(),
        final_state: state,
        converged,
        stationarity: eval.stationarity,
        feasibility: eval.feasibility,
        consensus: eval.consensus,
        events,
    })
}

fn sample(problem: &EmoProblem, w: &nalgebra::DMatrix<f64>, state: &SolverState, eval: &Evaluation) -> Sample {
    let residual = w * &eval.x - problem.d0();
    Sample {
        t: state.t,
        x: eval.x.iter().copied().collect(),
        f_value: problem.objective_value(&eval.x),
        eq_residual_sq: residual.norm_squared(),
        lambda_norm_sq: state.lambda.norm_squared(),
        z_norm_sq: state.z.norm_squared(),
    }
}
