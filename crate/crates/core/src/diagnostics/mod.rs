//! Optimality residuals, equilibrium construction, Lyapunov functions, and
//! the centralized reference oracle.

mod oracle;

use nalgebra::{DVector, SymmetricEigen};

pub use oracle::{centralized_oracle, OracleOptions, OracleSolution, ORACLE_VERSION};

use crate::dynamics::{Algorithm, SolverState};
use crate::error::{check_len, EmoError, Result};
use crate::network::CommGraph;
use crate::problem::{stack, EmoProblem, StackedForm};
use crate::projection::{merit_unchecked, project_vec};

/// Residuals of the optimality system: `x = P_Ω(x − g(x) + Wᵀλ̄)`,
/// `Wx = d₀`, and agreement of the agents' multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub feasibility: f64,
    pub consensus: f64,
    pub lambda_bar: DVector<f64>,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.consensus)
    }
}

/// `λ̄` is the mean of the agents' multiplier blocks.
pub fn kkt_residual(
    problem: &EmoProblem,
    graph: &CommGraph,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<KktReport> {
    let (n, m) = (problem.n(), problem.m());
    check_len("graph nodes", n, graph.n())?;
    check_len("stacked multipliers", n * m, lambda.len())?;
    let mut lambda_bar = DVector::zeros(m);
    for i in 0..n {
        lambda_bar += lambda.rows(i * m, m);
    }
    lambda_bar /= n as f64;
    let mut report = kkt_residual_centralized(problem, x, &lambda_bar)?;
    report.consensus = graph.apply_laplacian(m, lambda).amax();
    Ok(report)
}

/// KKT residuals for a single shared multiplier; consensus is zero.
pub fn kkt_residual_centralized(
    problem: &EmoProblem,
    x: &DVector<f64>,
    lambda_bar: &DVector<f64>,
) -> Result<KktReport> {
    check_len("decision vector", problem.total_dim(), x.len())?;
    check_len("multiplier", problem.m(), lambda_bar.len())?;
    let stacked = stack(problem);
    Ok(kkt_with(problem, &stacked, x, lambda_bar))
}

pub(crate) fn kkt_with(
    problem: &EmoProblem,
    stacked: &StackedForm,
    x: &DVector<f64>,
    lambda_bar: &DVector<f64>,
) -> KktReport {
    let g = problem.subgradient(x);
    let arg = x - g + stacked.w.tr_mul(lambda_bar);
    let stationarity = (project_vec(&stacked.omega, &arg) - x).amax();
    let feasibility = (&stacked.w * x - problem.d0()).amax();
    KktReport {
        stationarity,
        feasibility,
        consensus: 0.0,
        lambda_bar: lambda_bar.clone(),
    }
}

/// Equilibrium of the flows built from an optimal pair `(x*, λ̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x_star: DVector<f64>,
    /// `1_n ⊗ λ̄`.
    pub lambda_star: DVector<f64>,
    /// Minimum-norm solution of `L z = d − W̄x*`.
    pub z_star: DVector<f64>,
    /// `x* − g(x*) + W̄ᵀλ*`, only for DPOFA.
    pub y_star: Option<DVector<f64>>,
}

/// Largest tolerated `‖L z* − (d − W̄x*)‖∞`.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

pub fn build_equilibrium(
    problem: &EmoProblem,
    graph: &CommGraph,
    x_star: &DVector<f64>,
    lambda_bar: &DVector<f64>,
    algorithm: Algorithm,
) -> Result<Equilibrium> {
    let (n, m) = (problem.n(), problem.m());
    check_len("graph nodes", n, graph.n())?;
    check_len("decision vector", problem.total_dim(), x_star.len())?;
    check_len("multiplier", m, lambda_bar.len())?;
    let components = graph.components();
    if components != 1 {
        return Err(EmoError::Disconnected { components });
    }
    let stacked = stack(problem);
    let lambda_star = DVector::from_fn(n * m, |r, _| lambda_bar[r % m]);
    let rhs = problem.stacked_supply() - &stacked.wbar * x_star;

    let eig = SymmetricEigen::new(graph.laplacian());
    let cutoff = 1e-10 * eig.eigenvalues.amax().max(1.0);
    let mut z_star = DVector::zeros(n * m);
    for k in 0..m {
        let r_k = DVector::from_fn(n, |i, _| rhs[i * m + k]);
        for (j, &mu) in eig.eigenvalues.iter().enumerate() {
            if mu > cutoff {
                let v = eig.eigenvectors.column(j);
                let coef = v.dot(&r_k) / mu;
                for i in 0..n {
                    z_star[i * m + k] += coef * v[i];
                }
            }
        }
    }
    let residual = (graph.apply_laplacian(m, &z_star) - &rhs).amax();
    if !(residual <= EQUILIBRIUM_TOL) {
        return Err(EmoError::EquilibriumResidual { residual });
    }
    let y_star = match algorithm {
        Algorithm::Dpofa => Some(x_star - problem.subgradient(x_star) + stacked.wbar.tr_mul(&lambda_star)),
        Algorithm::Ddfa => None,
    };
    Ok(Equilibrium {
        x_star: x_star.clone(),
        lambda_star,
        z_star,
        y_star,
    })
}

/// Lyapunov function of either flow relative to a fixed equilibrium.
/// Holds the stacked operators so it can be evaluated every step.
#[derive(Debug, Clone)]
pub struct Lyapunov<'a> {
    problem: &'a EmoProblem,
    eq: &'a Equilibrium,
    algorithm: Algorithm,
    stacked: StackedForm,
    d: DVector<f64>,
    f_star: f64,
}

impl<'a> Lyapunov<'a> {
    pub fn new(problem: &'a EmoProblem, eq: &'a Equilibrium, algorithm: Algorithm) -> Result<Self> {
        let nm = problem.n() * problem.m();
        check_len("equilibrium x*", problem.total_dim(), eq.x_star.len())?;
        check_len("equilibrium λ*", nm, eq.lambda_star.len())?;
        check_len("equilibrium z*", nm, eq.z_star.len())?;
        if algorithm == Algorithm::Dpofa {
            let y = eq.y_star.as_ref().ok_or(EmoError::MissingAuxiliary)?;
            check_len("equilibrium y*", problem.total_dim(), y.len())?;
        }
        Ok(Self {
            problem,
            eq,
            algorithm,
            stacked: stack(problem),
            d: problem.stacked_supply(),
            f_star: problem.objective_value(&eq.x_star),
        })
    }

    pub fn at(&self, state: &SolverState) -> Result<f64> {
        self.value(&state.primal, &state.lambda, &state.z)
    }

    pub fn value(&self, primal: &DVector<f64>, lambda: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
        let nm = self.problem.n() * self.problem.m();
        check_len("primal state", self.stacked.total_dim, primal.len())?;
        check_len("lambda state", nm, lambda.len())?;
        check_len("z state", nm, z.len())?;
        let quad = 0.5 * ((lambda - &self.eq.lambda_star).norm_squared() + (z - &self.eq.z_star).norm_squared());
        match self.algorithm {
            Algorithm::Dpofa => {
                let y_star = self.eq.y_star.as_ref().ok_or(EmoError::MissingAuxiliary)?;
                Ok(merit_unchecked(&self.stacked.omega, primal, y_star) + quad)
            }
            Algorithm::Ddfa => {
                let distance = self.stacked.omega.distance(primal.as_slice());
                if !(distance <= crate::dynamics::DDFA_MEMBERSHIP_TOL) {
                    return Err(EmoError::NotInSet { distance });
                }
                let gap = self.problem.objective_value(primal) - self.f_star
                    + self.eq.lambda_star.dot(&(&self.d - &self.stacked.wbar * primal));
                Ok(gap + 0.5 * (primal - &self.eq.x_star).norm_squared() + quad)
            }
        }
    }
}

/// `½(‖y − P(y*)‖² − ‖y − P(y)‖²) + ½‖λ − λ*‖² + ½‖z − z*‖²`.
pub fn lyapunov_dpofa(problem: &EmoProblem, state: &SolverState, eq: &Equilibrium) -> Result<f64> {
    Lyapunov::new(problem, eq, Algorithm::Dpofa)?.at(state)
}

/// `f(x) − f(x*) + λ*ᵀ(d − W̄x) + ½‖x − x*‖² + ½‖λ − λ*‖² + ½‖z − z*‖²`,
/// defined for `x ∈ Ω`.
pub fn lyapunov_ddfa(problem: &EmoProblem, state: &SolverState, eq: &Equilibrium) -> Result<f64> {
    Lyapunov::new(problem, eq, Algorithm::Ddfa)?.at(state)
}
