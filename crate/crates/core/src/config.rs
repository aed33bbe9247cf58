//! TOML experiment configuration.
//!
//! ```toml
//! [problem]
//! builtin = "nonsmooth10"          # or inline `agents`, or `netflow`
//!
//! [graph]
//! kind = "ring"                    # ring | path | complete | edges
//!
//! [run]
//! algorithm = "both"               # dpofa | ddfa | both
//! h = 0.01
//! t_end = 100.0
//! tol = 1e-6
//! ```
//!
//! Inline agents:
//!
//! ```toml
//! [problem]
//! name = "pair"
//! d0 = [1.0]
//!
//! [[problem.agents]]
//! w = [[1.0]]                       # m rows, q_i columns
//! set = { kind = "interval", lo = -1.0, hi = 1.0 }
//! objective = { kind = "quadratic", diag = [2.0], l1 = 0.5 }
//! ```

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::builtin::{builtin_netflow, Builtin, NetworkSpec};
use crate::dynamics::{Algorithm, IntegrateOptions, SolverState, StopRule};
use crate::error::{EmoError, Result};
use crate::network::CommGraph;
use crate::problem::{AgentProblem, ConvexSet, EmoProblem, ObjectiveOracle, QuadraticL1};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub graph: Option<GraphConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub init: InitConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub builtin: Option<String>,
    pub name: Option<String>,
    pub d0: Option<Vec<f64>>,
    /// Fractions of `d0` handed to each agent when supplies are not given.
    pub supply_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    pub netflow: Option<NetworkSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Row-major, `m` rows of `q_i` entries.
    pub w: Vec<Vec<f64>>,
    pub set: ConvexSet,
    pub objective: ObjectiveConfig,
    pub supply: Option<Vec<f64>>,
}

/// `½xᵀQx + cᵀx + l1‖x‖₁` with `Q` given in full (`q`) or as a diagonal.
/// Declared strictly convex unless `strictly_convex = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Quadratic {
        q: Option<Vec<Vec<f64>>>,
        diag: Option<Vec<f64>>,
        c: Option<Vec<f64>>,
        #[serde(default)]
        l1: f64,
        strictly_convex: Option<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Ring,
    Path,
    Complete,
    /// Undirected weighted edges `[i, j, weight]`, 0-based.
    Edges { edges: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    Dpofa,
    Ddfa,
    Both,
}

impl AlgorithmChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            Self::Dpofa => vec![Algorithm::Dpofa],
            Self::Ddfa => vec![Algorithm::Ddfa],
            Self::Both => vec![Algorithm::Dpofa, Algorithm::Ddfa],
        }
    }
}

impl std::str::FromStr for AlgorithmChoice {
    type Err = EmoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dpofa" => Ok(Self::Dpofa),
            "ddfa" => Ok(Self::Ddfa),
            "both" => Ok(Self::Both),
            _ => Err(EmoError::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Option<AlgorithmChoice>,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    pub dwell: Option<usize>,
    pub sample_stride: Option<usize>,
    pub seed: Option<u64>,
    pub chattering_guard: Option<bool>,
}

/// Initial state overrides. Missing parts start at zero (DDFA's primal
/// starts at `P_Ω(0)`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub primal: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

/// A configuration turned into objects the solver understands.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub builtin: Option<Builtin>,
    pub problem: EmoProblem,
    pub graph: CommGraph,
    pub algorithms: Vec<Algorithm>,
    pub options: IntegrateOptions,
    pub init: InitConfig,
}

impl Experiment {
    pub fn initial_state(&self, algorithm: Algorithm) -> Result<SolverState> {
        let mut state = SolverState::initial(&self.problem, algorithm);
        let fill = |target: &mut DVector<f64>, given: &Option<Vec<f64>>, what: &'static str| -> Result<()> {
            if let Some(v) = given {
                crate::error::check_len(what, target.len(), v.len())?;
                target.copy_from_slice(v);
            }
            Ok(())
        };
        fill(&mut state.primal, &self.init.primal, "init.primal")?;
        fill(&mut state.lambda, &self.init.lambda, "init.lambda")?;
        fill(&mut state.z, &self.init.z, "init.z")?;
        Ok(state)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| EmoError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmoError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn builtin(b: Builtin) -> Self {
        Self {
            problem: ProblemConfig {
                builtin: Some(b.name().to_string()),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<Experiment> {
        let run = &self.run;
        let p = &self.problem;
        let sources = [p.builtin.is_some(), !p.agents.is_empty(), p.netflow.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(EmoError::Config(
                "[problem] needs exactly one of `builtin`, `agents` or `netflow`".into(),
            ));
        }
        let (name, builtin, problem, default_graph) = if let Some(b) = &p.builtin {
            let b: Builtin = b.parse()?;
            let (problem, graph) = b.load(run.seed.unwrap_or(0));
            (b.name().to_string(), Some(b), problem, Some(graph))
        } else if let Some(spec) = &p.netflow {
            let problem = builtin_netflow(spec)?;
            (p.name.clone().unwrap_or_else(|| "netflow".into()), None, problem, None)
        } else {
            let problem = inline_problem(p)?;
            (p.name.clone().unwrap_or_else(|| "custom".into()), None, problem, None)
        };
        let n = problem.n();
        let graph = match (&self.graph, default_graph) {
            (Some(g), _) => build_graph(g, n)?,
            (None, Some(g)) => g,
            (None, None) => CommGraph::ring(n),
        };
        if graph.n() != n {
            return Err(EmoError::Config(format!("graph has {} nodes but the problem has {n} agents", graph.n())));
        }
        let defaults = IntegrateOptions::default();
        let stop = StopRule {
            tol: run.tol.unwrap_or(StopRule::default().tol),
            dwell: run.dwell.unwrap_or(StopRule::default().dwell),
        };
        let options = IntegrateOptions {
            h: run.h.unwrap_or(defaults.h),
            t_end: run.t_end.or(builtin.map(Builtin::default_t_end)).unwrap_or(defaults.t_end),
            stop: Some(stop),
            sample_stride: run.sample_stride.unwrap_or(defaults.sample_stride),
            chattering_guard: run.chattering_guard.unwrap_or(defaults.chattering_guard),
        };
        if !(options.h > 0.0 && options.h.is_finite()) {
            return Err(EmoError::Config(format!("run.h must be positive, got {}", options.h)));
        }
        if !(options.t_end >= 0.0 && options.t_end.is_finite()) {
            return Err(EmoError::Config(format!("run.t_end must be finite and >= 0, got {}", options.t_end)));
        }
        if !(stop.tol > 0.0) {
            return Err(EmoError::Config(format!("run.tol must be positive, got {}", stop.tol)));
        }
        if options.sample_stride == 0 {
            return Err(EmoError::Config("run.sample_stride must be at least 1".into()));
        }
        let algorithms = run.algorithm.unwrap_or(AlgorithmChoice::Both).algorithms();
        Ok(Experiment {
            name,
            builtin,
            problem,
            graph,
            algorithms,
            options,
            init: self.init.clone(),
        })
    }
}

fn build_graph(g: &GraphConfig, n: usize) -> Result<CommGraph> {
    Ok(match g {
        GraphConfig::Ring => CommGraph::ring(n),
        GraphConfig::Path => CommGraph::path(n),
        GraphConfig::Complete => CommGraph::complete(n),
        GraphConfig::Edges { edges } => CommGraph::from_edges(n, edges)?,
    })
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(EmoError::Config(format!("{what} has rows of different lengths")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn objective(cfg: &ObjectiveConfig, dim: usize, agent: usize) -> Result<QuadraticL1> {
    let ObjectiveConfig::Quadratic { q, diag, c, l1, strictly_convex } = cfg;
    let q = match (q, diag) {
        (Some(q), None) => matrix(q, "objective.q")?,
        (None, Some(d)) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        (None, None) => DMatrix::zeros(dim, dim),
        (Some(_), Some(_)) => {
            return Err(EmoError::Config(format!("agent {agent}: give either objective.q or objective.diag")))
        }
    };
    let c = c.as_ref().map_or_else(|| DVector::zeros(dim), |c| DVector::from_column_slice(c));
    if q.shape() != (dim, dim) || c.len() != dim {
        return Err(EmoError::AgentDimension {
            agent,
            detail: format!("objective must act on {dim} variables"),
        });
    }
    Ok(QuadraticL1::new(q, c, *l1)?.strictly_convex(strictly_convex.unwrap_or(true)))
}

fn inline_problem(p: &ProblemConfig) -> Result<EmoProblem> {
    let d0 = p
        .d0
        .as_ref()
        .map(|d| DVector::from_column_slice(d))
        .ok_or_else(|| EmoError::Config("inline problems need `d0`".into()))?;
    let given = p.agents.iter().filter(|a| a.supply.is_some()).count();
    if given != 0 && given != p.agents.len() {
        return Err(EmoError::Config("give `supply` for every agent or for none".into()));
    }
    if given != 0 && p.supply_weights.is_some() {
        return Err(EmoError::Config("`supply` and `supply_weights` are mutually exclusive".into()));
    }
    let mut parts = Vec::with_capacity(p.agents.len());
    for (i, a) in p.agents.iter().enumerate() {
        let w = matrix(&a.w, "w")?;
        let obj: Arc<dyn ObjectiveOracle> = Arc::new(objective(&a.objective, w.ncols(), i)?);
        a.set.check()?;
        parts.push((obj, a.set.clone(), w));
    }
    if given == 0 {
        return EmoProblem::with_split_supply(parts, d0, p.supply_weights.as_deref());
    }
    let agents = parts
        .into_iter()
        .zip(&p.agents)
        .map(|((obj, set, w), a)| {
            AgentProblem::new(obj, set, w, DVector::from_column_slice(a.supply.as_ref().unwrap()))
        })
        .collect();
    EmoProblem::new(agents, d0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INLINE: &str = r#"
[problem]
name = "pair"
d0 = [1.0]

[[problem.agents]]
w = [[1.0]]
set = { kind = "interval", lo = -1.0, hi = 1.0 }
objective = { kind = "quadratic", diag = [2.0], l1 = 0.5 }

[[problem.agents]]
w = [[1.0, 2.0]]
set = { kind = "box", lo = [0.0, 0.0], hi = [1.0, 1.0] }
objective = { kind = "quadratic", q = [[2.0, 0.0], [0.0, 4.0]], c = [0.1, 0.0] }

[graph]
kind = "path"

[run]
algorithm = "ddfa"
h = 0.005
"#;

    #[test]
    fn inline_config_resolves() {
        let e = ExperimentConfig::from_toml(INLINE).unwrap().resolve().unwrap();
        assert_eq!(e.name, "pair");
        assert_eq!(e.problem.n(), 2);
        assert_eq!(e.problem.total_dim(), 3);
        assert_eq!(e.algorithms, vec![Algorithm::Ddfa]);
        assert_eq!(e.options.h, 0.005);
        assert_eq!(e.graph.edges().len(), 1);
    }

    #[test]
    fn builtin_config_resolves() {
        let cfg = ExperimentConfig::builtin(Builtin::Nonsmooth10);
        let e = cfg.resolve().unwrap();
        assert_eq!(e.problem.n(), 10);
        assert_eq!(e.algorithms.len(), 2);
        assert_eq!(e.options.h, 1e-2);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("[problem]\nbuiltin = \"nope\"").unwrap().resolve().is_err());
        assert!(ExperimentConfig::from_toml("[problem]\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[problem]\n").unwrap().resolve().is_err());
        let text = INLINE.replace("h = 0.005", "h = -1.0");
        assert!(ExperimentConfig::from_toml(&text).unwrap().resolve().is_err());
        let text = INLINE.replace("kind = \"path\"", "kind = \"edges\"\nedges = [[0, 5, 1.0]]");
        assert!(ExperimentConfig::from_toml(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn init_overrides_are_checked() {
        let mut cfg = ExperimentConfig::builtin(Builtin::Nonsmooth10);
        cfg.init.lambda = Some(vec![1.0; 3]);
        let e = cfg.resolve().unwrap();
        assert!(e.initial_state(Algorithm::Dpofa).is_err());
    }
}
