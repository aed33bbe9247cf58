//! Built-in experiment instances.
//!
//! * `nonsmooth10`: ten scalar agents minimizing `Σ(x_i² + |x_i|)` with
//!   `|x_i| ≤ 1` and a two-row coupling, over a unit-weight ring.
//! * `netflow6x12`: single-commodity flow on a 6-node/12-arc digraph with
//!   quadratic arc costs and capacities `[0, 10]`; one agent per arc.
//! * `minnorm`: least-norm solution of a random underdetermined system.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EmoError, Result};
use crate::network::CommGraph;
use crate::problem::{ConvexSet, EmoProblem, ObjectiveOracle, QuadraticL1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Nonsmooth10,
    Netflow6x12,
    Minnorm,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Self::Nonsmooth10, Self::Netflow6x12, Self::Minnorm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nonsmooth10 => "nonsmooth10",
            Self::Netflow6x12 => "netflow6x12",
            Self::Minnorm => "minnorm",
        }
    }

    /// Horizon used when the run configuration gives none. The ring over
    /// twelve arc agents and the random least-norm instance mix slower than
    /// the ten-agent ring.
    pub fn default_t_end(self) -> f64 {
        match self {
            Self::Nonsmooth10 => 100.0,
            Self::Netflow6x12 | Self::Minnorm => 500.0,
        }
    }

    /// Problem and communication graph. `seed` only affects `minnorm`.
    pub fn load(self, seed: u64) -> (EmoProblem, CommGraph) {
        match self {
            Self::Nonsmooth10 => builtin_nonsmooth10(),
            Self::Netflow6x12 => builtin_netflow6x12(),
            Self::Minnorm => builtin_minnorm(seed),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = EmoError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                EmoError::Config(format!(
                    "unknown builtin {s:?} (expected one of nonsmooth10, netflow6x12, minnorm)"
                ))
            })
    }
}

/// Coupling matrix of `nonsmooth10`; column `i` is agent `i`'s block.
pub const NONSMOOTH10_A: [[f64; 10]; 2] = [
    [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
];

pub const NONSMOOTH10_D0: [f64; 2] = [3.0, 2.0];

pub fn builtin_nonsmooth10() -> (EmoProblem, CommGraph) {
    let parts = (0..10)
        .map(|i| {
            let objective: Arc<dyn ObjectiveOracle> = Arc::new(QuadraticL1::isotropic(1, 2.0, 1.0));
            let set = ConvexSet::Interval { lo: -1.0, hi: 1.0 };
            let w = DMatrix::from_column_slice(2, 1, &[NONSMOOTH10_A[0][i], NONSMOOTH10_A[1][i]]);
            (objective, set, w)
        })
        .collect();
    let problem = EmoProblem::with_split_supply(parts, DVector::from_row_slice(&NONSMOOTH10_D0), None)
        .expect("nonsmooth10 data is consistent");
    (problem, CommGraph::ring(10))
}

/// Directed network with node supplies, for multi-commodity flow instances.
///
/// Nodes are numbered from 0. Arc `k = (tail, head)` contributes `+1` at its
/// tail and `−1` at its head in the incidence matrix, so `A t = b` reads
/// "flow out minus flow in equals supply".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub arcs: Vec<(usize, usize)>,
    #[serde(default = "one")]
    pub commodities: usize,
    /// `b_i(s)` stored node-major at index `i * commodities + s`.
    pub supplies: Vec<f64>,
    /// Capacity interval applied to every arc and commodity.
    pub lower: f64,
    pub upper: f64,
}

fn one() -> usize {
    1
}

/// The 6-node/12-arc digraph used by `netflow6x12`.
///
/// Nodes 0, 4, 5 supply 6, 8.4, 7.2; nodes 1, 2, 3 demand 7.2, 4.8, 9.6.
/// Every supply node has an arc to every demand node, and the demand nodes
/// form the cycle 1 → 2 → 3 → 1.
pub fn default_netflow_spec() -> NetworkSpec {
    NetworkSpec {
        nodes: 6,
        arcs: vec![
            (0, 1),
            (0, 2),
            (0, 3),
            (4, 1),
            (4, 2),
            (4, 3),
            (5, 1),
            (5, 2),
            (5, 3),
            (1, 2),
            (2, 3),
            (3, 1),
        ],
        commodities: 1,
        supplies: vec![6.0, -7.2, -4.8, -9.6, 8.4, 7.2],
        lower: 0.0,
        upper: 10.0,
    }
}

/// Node-by-arc incidence matrix.
pub fn incidence_matrix(spec: &NetworkSpec) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(spec.nodes, spec.arcs.len());
    for (k, &(tail, head)) in spec.arcs.iter().enumerate() {
        a[(tail, k)] = 1.0;
        a[(head, k)] = -1.0;
    }
    a
}

/// One agent per arc with `f_k(x_k) = ‖x_k‖²`, `W_k = A_k ⊗ I_S`, `d₀ = b`.
pub fn builtin_netflow(spec: &NetworkSpec) -> Result<EmoProblem> {
    let s = spec.commodities;
    if s == 0 || spec.nodes == 0 || spec.arcs.is_empty() {
        return Err(EmoError::Config("network needs nodes, arcs and at least one commodity".into()));
    }
    for &(tail, head) in &spec.arcs {
        if tail >= spec.nodes || head >= spec.nodes || tail == head {
            return Err(EmoError::Config(format!(
                "arc ({tail},{head}) is not a proper arc between nodes 0..{}",
                spec.nodes
            )));
        }
    }
    if spec.supplies.len() != spec.nodes * s {
        return Err(EmoError::Config(format!(
            "expected {} supplies, got {}",
            spec.nodes * s,
            spec.supplies.len()
        )));
    }
    for c in 0..s {
        let total: f64 = (0..spec.nodes).map(|i| spec.supplies[i * s + c]).sum();
        if total.abs() > 1e-9 {
            return Err(EmoError::Config(format!(
                "supplies of commodity {c} add up to {total}, not zero; the flow problem is infeasible"
            )));
        }
    }
    let lower = vec![spec.lower; s];
    let upper = vec![spec.upper; s];
    let set = if s == 1 {
        ConvexSet::interval(spec.lower, spec.upper)?
    } else {
        ConvexSet::boxed(lower, upper)?
    };
    let incidence = incidence_matrix(spec);
    let eye = DMatrix::<f64>::identity(s, s);
    let parts = (0..spec.arcs.len())
        .map(|k| {
            let column = incidence.column(k).into_owned();
            let w = column.kronecker(&eye);
            let objective: Arc<dyn ObjectiveOracle> = Arc::new(QuadraticL1::squared_norm(s));
            (objective, set.clone(), w)
        })
        .collect();
    EmoProblem::with_split_supply(parts, DVector::from_column_slice(&spec.supplies), None)
}

/// `netflow6x12` with a unit-weight ring over the twelve arc agents.
pub fn builtin_netflow6x12() -> (EmoProblem, CommGraph) {
    let spec = default_netflow_spec();
    let problem = builtin_netflow(&spec).expect("default network is consistent");
    let graph = CommGraph::ring(spec.arcs.len());
    (problem, graph)
}

pub const MINNORM_ROWS: usize = 3;
pub const MINNORM_AGENTS: usize = 4;
pub const MINNORM_BLOCK: usize = 2;

/// Four agents with two unconstrained variables each, `f_i = ‖x_i‖²`, and a
/// seeded `3 × 8` coupling with entries and `d₀` uniform in `[-1, 1]`.
pub fn builtin_minnorm(seed: u64) -> (EmoProblem, CommGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(MINNORM_ROWS, MINNORM_AGENTS * MINNORM_BLOCK, |_, _| rng.random_range(-1.0..1.0));
    let d0 = DVector::from_fn(MINNORM_ROWS, |_, _| rng.random_range(-1.0..1.0));
    let parts = (0..MINNORM_AGENTS)
        .map(|i| {
            let objective: Arc<dyn ObjectiveOracle> = Arc::new(QuadraticL1::squared_norm(MINNORM_BLOCK));
            let block = w.columns(i * MINNORM_BLOCK, MINNORM_BLOCK).into_owned();
            (objective, ConvexSet::full(MINNORM_BLOCK), block)
        })
        .collect();
    let problem = EmoProblem::with_split_supply(parts, d0, None).expect("minnorm data is consistent");
    (problem, CommGraph::ring(MINNORM_AGENTS))
}

/// `Wᵀ(WWᵀ)⁻¹d₀`, or `None` when `W` does not have full row rank.
pub fn least_norm_solution(w: &DMatrix<f64>, d0: &DVector<f64>) -> Option<DVector<f64>> {
    let sv = w.singular_values();
    let largest = sv.max();
    if w.nrows() > w.ncols() || !(sv.min() > 1e-12 * largest) {
        return None;
    }
    let gram = w * w.transpose();
    let chol = gram.cholesky()?;
    Some(w.transpose() * chol.solve(d0))
}

/// Optimum `(x*, λ̄*)` of `nonsmooth10` in closed form. Agents 1 and 6 sit in both rows, agents 2, 3, 7, 8
/// only in the first, the rest only in the second.
pub fn nonsmooth10_closed_form() -> (DVector<f64>, DVector<f64>) {
    let (a, b, c) = (0.875, 0.3125, 0.0625);
    let x = DVector::from_row_slice(&[a, b, b, c, c, a, b, b, c, c]);
    let lambda = DVector::from_row_slice(&[2.0 * b + 1.0, 2.0 * c + 1.0]);
    (x, lambda)
}
