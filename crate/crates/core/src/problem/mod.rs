//! Problem data: per-agent objectives, sets, constraint blocks and supply
//! shares, plus the stacked matrices the dynamics operate on.

mod objective;
mod set;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use objective::{probe_convexity, sign0, ConvexityProbe, FnObjective, ObjectiveOracle, QuadraticL1};
pub use set::ConvexSet;

use crate::error::{EmoError, Result};
use crate::network::CommGraph;

/// Tolerance on `Σ d_i = d_0` when a problem is assembled by hand.
const SUPPLY_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct AgentProblem {
    pub objective: Arc<dyn ObjectiveOracle>,
    pub set: ConvexSet,
    /// `m × q_i` block of the coupled constraint.
    pub w: DMatrix<f64>,
    /// Share `d_i` of the right-hand side.
    pub supply: DVector<f64>,
}

impl AgentProblem {
    pub fn new(
        objective: Arc<dyn ObjectiveOracle>,
        set: ConvexSet,
        w: DMatrix<f64>,
        supply: DVector<f64>,
    ) -> Self {
        Self {
            objective,
            set,
            w,
            supply,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    fn check(&self, index: usize, m: usize) -> Result<()> {
        let fail = |detail: String| Err(EmoError::AgentDimension { agent: index, detail });
        if self.w.nrows() != m {
            return fail(format!("constraint block has {} rows, expected m = {m}", self.w.nrows()));
        }
        if self.set.dim() != self.dim() {
            return fail(format!(
                "constraint block has {} columns but the set has dimension {}",
                self.dim(),
                self.set.dim()
            ));
        }
        if self.objective.dim() != self.dim() {
            return fail(format!(
                "constraint block has {} columns but the objective has dimension {}",
                self.dim(),
                self.objective.dim()
            ));
        }
        if self.supply.len() != m {
            return fail(format!("supply has length {}, expected m = {m}", self.supply.len()));
        }
        if self.dim() == 0 {
            return fail("agent has no decision variables".into());
        }
        self.set
            .check()
            .map_err(|e| EmoError::AgentDimension { agent: index, detail: e.to_string() })
    }
}

impl fmt::Debug for AgentProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentProblem")
            .field("objective", &self.objective)
            .field("set", &self.set)
            .field("w", &self.w)
            .field("supply", &self.supply)
            .finish()
    }
}

/// A validated problem. Immutable once built.
#[derive(Debug, Clone)]
pub struct EmoProblem {
    agents: Vec<AgentProblem>,
    m: usize,
    d0: DVector<f64>,
}

impl EmoProblem {
    /// Checks every agent against `m = d0.len()` and that the supplies add up
    /// to `d0`. Dimension errors name the offending agent.
    pub fn new(agents: Vec<AgentProblem>, d0: DVector<f64>) -> Result<Self> {
        if agents.is_empty() {
            return Err(EmoError::Precondition("problem has no agents".into()));
        }
        let m = d0.len();
        if m == 0 {
            return Err(EmoError::Precondition("coupled constraint has no rows".into()));
        }
        for (i, a) in agents.iter().enumerate() {
            a.check(i, m)?;
        }
        let total: DVector<f64> = agents
            .iter()
            .fold(DVector::zeros(m), |acc, a| acc + &a.supply);
        let deviation = (&total - &d0).amax();
        if !(deviation <= SUPPLY_TOL * d0.amax().max(1.0)) {
            return Err(EmoError::SupplySum { deviation });
        }
        Ok(Self { agents, m, d0 })
    }

    /// Builds agents from `(objective, set, w)` triples and splits `d0` with
    /// [`split_supply`].
    pub fn with_split_supply(
        parts: Vec<(Arc<dyn ObjectiveOracle>, ConvexSet, DMatrix<f64>)>,
        d0: DVector<f64>,
        weights: Option<&[f64]>,
    ) -> Result<Self> {
        let supplies = split_supply(&d0, parts.len(), weights)?;
        let agents = parts
            .into_iter()
            .zip(supplies)
            .map(|((obj, set, w), d)| AgentProblem::new(obj, set, w, d))
            .collect();
        Self::new(agents, d0)
    }

    pub fn agents(&self) -> &[AgentProblem] {
        &self.agents
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d0(&self) -> &DVector<f64> {
        &self.d0
    }

    pub fn total_dim(&self) -> usize {
        self.agents.iter().map(AgentProblem::dim).sum()
    }

    /// Start index of each agent's block in the stacked decision vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.agents
            .iter()
            .scan(0, |acc, a| {
                let start = *acc;
                *acc += a.dim();
                Some(start)
            })
            .collect()
    }

    pub fn is_smooth(&self) -> bool {
        self.agents.iter().all(|a| a.objective.is_smooth())
    }

    pub fn is_strictly_convex(&self) -> bool {
        self.agents.iter().all(|a| a.objective.is_strictly_convex())
    }

    /// `f(x) = Σ f_i(x_i)` on the stacked vector.
    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        let mut offset = 0;
        let mut total = 0.0;
        for a in &self.agents {
            let q = a.dim();
            total += a.objective.value(&x.as_slice()[offset..offset + q]);
            offset += q;
        }
        total
    }

    /// Stacked subgradient selection `g(x)`.
    pub fn subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        let mut offset = 0;
        for a in &self.agents {
            let q = a.dim();
            a.objective.subgradient(
                &x.as_slice()[offset..offset + q],
                &mut g.as_mut_slice()[offset..offset + q],
            );
            offset += q;
        }
        g
    }

    /// Stacked supplies `d = [d_1; …; d_n]`.
    pub fn stacked_supply(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n() * self.m);
        for (i, a) in self.agents.iter().enumerate() {
            d.rows_mut(i * self.m, self.m).copy_from(&a.supply);
        }
        d
    }

    /// SHA-256 over a canonical description of all problem data.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("m={};d0=[{}]\n", self.m, join_bits(self.d0.iter())));
        for (i, a) in self.agents.iter().enumerate() {
            h.update(format!(
                "agent{i}:q={};w=[{}];d=[{}];set={};f={}\n",
                a.dim(),
                join_bits(a.w.iter()),
                join_bits(a.supply.iter()),
                a.set.fingerprint(),
                a.objective.fingerprint()
            ));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn join_bits<'a>(it: impl Iterator<Item = &'a f64>) -> String {
    it.map(|v| set::bits(*v)).collect::<Vec<_>>().join(",")
}

/// Compact stacked representation shared by both flows.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedForm {
    /// `W = [W_1, …, W_n]`, `m × Σq_i`.
    pub w: DMatrix<f64>,
    /// `W̄ = diag(W_1, …, W_n)`, `nm × Σq_i`.
    pub wbar: DMatrix<f64>,
    /// `Ω = Π Ω_i`.
    pub omega: ConvexSet,
    pub total_dim: usize,
    pub offsets: Vec<usize>,
}

impl StackedForm {
    /// Recovers agent `i`'s block from the concatenated `W`.
    pub fn agent_block(&self, i: usize) -> DMatrix<f64> {
        let start = self.offsets[i];
        let end = self.offsets.get(i + 1).copied().unwrap_or(self.total_dim);
        self.w.columns(start, end - start).into_owned()
    }
}

pub fn stack(problem: &EmoProblem) -> StackedForm {
    let m = problem.m();
    let n = problem.n();
    let total_dim = problem.total_dim();
    let offsets = problem.offsets();
    let mut w = DMatrix::zeros(m, total_dim);
    let mut wbar = DMatrix::zeros(n * m, total_dim);
    for (i, a) in problem.agents().iter().enumerate() {
        let q = a.dim();
        w.view_mut((0, offsets[i]), (m, q)).copy_from(&a.w);
        wbar.view_mut((i * m, offsets[i]), (m, q)).copy_from(&a.w);
    }
    let omega = ConvexSet::Product {
        factors: problem.agents().iter().map(|a| a.set.clone()).collect(),
    };
    StackedForm {
        w,
        wbar,
        omega,
        total_dim,
        offsets,
    }
}

/// Splits `d0` into `n` shares. Weights default to uniform; the rounding
/// residual lands on the last agent so the shares add up to `d0`.
pub fn split_supply(d0: &DVector<f64>, n: usize, weights: Option<&[f64]>) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Err(EmoError::Precondition("cannot split supply over zero agents".into()));
    }
    let uniform;
    let weights = match weights {
        Some(w) => {
            crate::error::check_len("supply weights", n, w.len())?;
            let sum: f64 = w.iter().sum();
            if !((sum - 1.0).abs() <= 1e-12) || w.iter().any(|v| !v.is_finite()) {
                return Err(EmoError::SupplyWeights { sum });
            }
            w
        }
        None => {
            uniform = vec![1.0 / n as f64; n];
            &uniform[..]
        }
    };
    let mut shares: Vec<DVector<f64>> = weights[..n - 1].iter().map(|w| d0 * *w).collect();
    let assigned = shares.iter().fold(DVector::zeros(d0.len()), |acc, d| acc + d);
    shares.push(d0 - assigned);
    Ok(shares)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Hard failures block the solve entry points.
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub components: usize,
}

impl ValidationReport {
    pub fn status(&self, name: &str) -> Option<CheckStatus> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    /// Converts hard failures into errors.
    pub fn ensure_solvable(&self) -> Result<()> {
        for c in self.checks.iter().filter(|c| c.hard && c.status == CheckStatus::Fail) {
            return Err(match c.name {
                "connectivity" => EmoError::Disconnected {
                    components: self.components,
                },
                _ => EmoError::InvalidGraph(c.detail.clone()),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "skip",
            };
            writeln!(f, "{status:>4}  {:<20} {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub samples: usize,
    pub seed: u64,
    /// Sampling box is the set's bounding box clipped to `[-r, r]`.
    pub radius: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            radius: 10.0,
        }
    }
}

pub fn validate(problem: &EmoProblem, graph: &CommGraph) -> ValidationReport {
    validate_with(problem, graph, ProbeOptions::default())
}

/// Connectivity and sizes are checked exactly; convexity only by sampling.
/// Slater's condition is not checked here.
pub fn validate_with(problem: &EmoProblem, graph: &CommGraph, opts: ProbeOptions) -> ValidationReport {
    let mut checks = Vec::new();
    let size_ok = graph.n() == problem.n();
    checks.push(AssumptionCheck {
        name: "graph-size",
        status: if size_ok { CheckStatus::Pass } else { CheckStatus::Fail },
        hard: true,
        detail: format!("{} graph nodes, {} agents", graph.n(), problem.n()),
    });
    let components = graph.components();
    checks.push(AssumptionCheck {
        name: "connectivity",
        status: if components == 1 { CheckStatus::Pass } else { CheckStatus::Fail },
        hard: true,
        detail: format!("{components} connected component(s)"),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst_gap = f64::INFINITY;
    let mut worst_agent = 0;
    let mut mono_fail = Vec::new();
    for (i, a) in problem.agents().iter().enumerate() {
        let bounds: Vec<(f64, f64)> = a
            .set
            .bounding_box()
            .into_iter()
            .map(|(lo, hi)| (lo.max(-opts.radius), hi.min(opts.radius)))
            .collect();
        let probe = probe_convexity(a.objective.as_ref(), &bounds, opts.samples, &mut rng);
        if probe.worst_gap < worst_gap {
            worst_gap = probe.worst_gap;
            worst_agent = i;
        }
        if a.objective.is_strictly_convex() && probe.monotonicity_failures > 0 {
            mono_fail.push(i);
        }
    }
    checks.push(AssumptionCheck {
        name: "convexity",
        status: if worst_gap >= -1e-9 { CheckStatus::Pass } else { CheckStatus::Fail },
        hard: false,
        detail: format!("worst subgradient gap {worst_gap:.3e} (agent {worst_agent})"),
    });
    let strict_declared = problem.is_strictly_convex();
    checks.push(AssumptionCheck {
        name: "strict-monotonicity",
        status: if !mono_fail.is_empty() {
            CheckStatus::Fail
        } else if strict_declared {
            CheckStatus::Pass
        } else {
            CheckStatus::Skipped
        },
        hard: false,
        detail: if mono_fail.is_empty() {
            if strict_declared {
                "no violations sampled".into()
            } else {
                "not every objective is declared strictly convex".into()
            }
        } else {
            format!("violations at agents {mono_fail:?}")
        },
    });
    checks.push(AssumptionCheck {
        name: "slater",
        status: CheckStatus::Skipped,
        hard: false,
        detail: "not checked; the centralized oracle fails on infeasible data".into(),
    });
    ValidationReport { checks, components }
}
