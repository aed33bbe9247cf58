//! Continuous-time distributed solvers for extended monotropic optimization.
//!
//! The problem is
//!
//! ```text
//! minimize   Σ_i f_i(x_i)
//! subject to Σ_i W_i x_i = d_0,   x_i ∈ Ω_i
//! ```
//!
//! where each agent `i` privately holds its objective `f_i` (possibly
//! nonsmooth), its closed convex set `Ω_i`, its column block `W_i` and a
//! share `d_i` of the right-hand side. Agents exchange only their
//! multiplier estimates `λ_i` and auxiliary states `z_i` with neighbours in
//! a connected undirected communication graph.
//!
//! Two flows are provided:
//!
//! * [`Algorithm::Dpofa`]: an unconstrained auxiliary state `y` drives the
//!   estimate through its projection `x = P_Ω(y)`.
//! * [`Algorithm::Ddfa`]: `x` evolves inside `Ω` and its own time derivative
//!   is fed back into the multiplier dynamics.
//!
//! Both are simulated with fixed-step forward Euler ([`dynamics::integrate`])
//! and checked against the optimality conditions in [`diagnostics`].

pub mod builtin;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fixture;
pub mod network;
pub mod problem;
pub mod projection;
pub mod runner;
pub mod telemetry;

pub use diagnostics::{
    build_equilibrium, centralized_oracle, kkt_residual, lyapunov_ddfa, lyapunov_dpofa,
    Equilibrium, KktReport, OracleOptions, OracleSolution,
};
pub use dynamics::{
    ddfa_rhs, dpofa_rhs, integrate, integrate_observed, Algorithm, Flow, IntegrateOptions, Rhs,
    Sample, SolverState, StepView, StopRule, Trajectory,
};
pub use error::{EmoError, Result};
pub use network::CommGraph;
pub use problem::{
    split_supply, stack, validate, AgentProblem, ConvexSet, EmoProblem, FnObjective,
    ObjectiveOracle, QuadraticL1, StackedForm, ValidationReport,
};
pub use projection::{merit, project, ProjectionResult};
