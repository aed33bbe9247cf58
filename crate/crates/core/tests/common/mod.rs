#![allow(dead_code)]

use std::sync::Arc;

use emo_core::diagnostics::{build_equilibrium, centralized_oracle, Lyapunov, OracleOptions, OracleSolution};
use emo_core::dynamics::{integrate_observed, Algorithm, IntegrateOptions, SolverState, Trajectory};
use emo_core::problem::{AgentProblem, ConvexSet, EmoProblem, ObjectiveOracle, QuadraticL1};
use emo_core::CommGraph;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub problem: EmoProblem,
    pub graph: CommGraph,
    pub solution: OracleSolution,
    /// Draws rejected before this instance (optimum on an ℓ1 kink).
    pub rejected: usize,
}

/// Random connected graph: a random spanning tree plus extra edges, with
/// weights in [0.5, 1.5].
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> CommGraph {
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push((j, i, rng.random_range(0.5..1.5)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) && rng.random_bool(0.25) {
                edges.push((i, j, rng.random_range(0.5..1.5)));
            }
        }
    }
    CommGraph::from_edges(n, &edges).unwrap()
}

/// One draw: `n ≤ 6` agents, `q_i ≤ 3`, box sets, `½xᵀQx + cᵀx + l1‖x‖₁`
/// with `Q ≻ 0`, and `d₀ = W x₀` for `x₀` strictly inside the boxes.
fn draw(rng: &mut ChaCha8Rng) -> (EmoProblem, CommGraph, Vec<f64>) {
    let n = rng.random_range(2..=6);
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=3)).collect();
    let total: usize = dims.iter().sum();
    let m = rng.random_range(1..=3.min(total));
    let mut parts = Vec::new();
    let mut x0 = Vec::new();
    let mut l1s = Vec::new();
    for &q in &dims {
        let lo: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..-0.5)).collect();
        let hi: Vec<f64> = (0..q).map(|_| rng.random_range(0.5..2.0)).collect();
        for k in 0..q {
            x0.push(rng.random_range(0.5 * lo[k]..0.5 * hi[k]));
        }
        let b = DMatrix::from_fn(q, q, |_, _| rng.random_range(-0.8..0.8));
        let qm = b.transpose() * &b + DMatrix::identity(q, q) * rng.random_range(0.5..1.5);
        let c = DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
        let l1 = if rng.random_bool(0.5) { rng.random_range(0.05..0.5) } else { 0.0 };
        l1s.extend(std::iter::repeat_n(l1, q));
        let w = DMatrix::from_fn(m, q, |_, _| rng.random_range(-1.0..1.0));
        let objective: Arc<dyn ObjectiveOracle> = Arc::new(QuadraticL1::new(qm, c, l1).unwrap().strictly_convex(true));
        parts.push((objective, ConvexSet::boxed(lo, hi).unwrap(), w));
    }
    let w_full = DMatrix::from_fn(m, total, |r, c| {
        let mut off = 0;
        for (i, &q) in dims.iter().enumerate() {
            if c < off + q {
                return parts[i].2[(r, c - off)];
            }
            off += q;
        }
        unreachable!()
    });
    let d0 = w_full * DVector::from_vec(x0);
    let weights: Vec<f64> = {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|r| r / s).collect()
    };
    let problem = if rng.random_bool(0.5) {
        EmoProblem::with_split_supply(parts, d0, None).unwrap()
    } else {
        // Nonuniform supply split, built by hand so the weights need not sum
        // to 1 within 1e-12.
        let mut acc = DVector::zeros(m);
        let k = parts.len();
        let agents = parts
            .into_iter()
            .enumerate()
            .map(|(i, (obj, set, w))| {
                let d = if i + 1 == k { &d0 - &acc } else { &d0 * weights[i] };
                acc += &d;
                AgentProblem::new(obj, set, w, d)
            })
            .collect();
        EmoProblem::new(agents, d0).unwrap()
    };
    let graph = random_graph(rng, n);
    (problem, graph, l1s)
}

/// Seeded random instance whose optimum avoids the ℓ1 kinks, so that the
/// selection-based right-hand sides vanish exactly there.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejected = 0;
    loop {
        let (problem, graph, l1s) = draw(&mut rng);
        let solution = centralized_oracle(&problem, OracleOptions::default()).unwrap();
        let kink = solution
            .x_star
            .iter()
            .zip(&l1s)
            .any(|(x, &l1)| l1 > 0.0 && x.abs() < 1e-6);
        if !kink {
            return Instance {
                problem,
                graph,
                solution,
                rejected,
            };
        }
        rejected += 1;
    }
}

/// Per-run observations used by the invariant checks.
#[derive(Debug, Default, Clone)]
pub struct RunLog {
    pub times: Vec<f64>,
    pub primal_norm: Vec<f64>,
    pub lambda_norm: Vec<f64>,
    pub z_norm: Vec<f64>,
    /// Largest distance of the output `x` (DPOFA) or state `x` (DDFA) to Ω.
    pub max_set_distance: f64,
    pub max_z_mass_drift: f64,
    pub lyapunov: Vec<f64>,
    /// `crossed[k]`: some coordinate of `x` changed sign between steps
    /// `k − 1` and `k` (an ℓ1 kink was crossed or touched).
    pub crossed: Vec<bool>,
}

impl RunLog {
    /// `(violations, violations at sign-change steps, worst increase)`.
    pub fn lyapunov_violations(&self, slack: f64) -> (usize, usize, f64) {
        let mut count = 0;
        let mut at_crossing = 0;
        let mut worst = f64::NEG_INFINITY;
        for (k, w) in self.lyapunov.windows(2).enumerate() {
            let inc = w[1] - w[0];
            worst = worst.max(inc);
            if inc > slack {
                count += 1;
                if self.crossed[k + 1] {
                    at_crossing += 1;
                }
            }
        }
        (count, at_crossing, worst)
    }

    /// `(quantity, max over the run, value at t_end/10)` for `‖y‖`, `‖λ‖`,
    /// `‖z‖`; `t_end` is the time the run actually ended at.
    pub fn boundedness(&self) -> Vec<(&'static str, f64, f64)> {
        let t_end = *self.times.last().unwrap();
        let k = self
            .times
            .iter()
            .position(|&t| t >= t_end / 10.0 - 1e-12)
            .unwrap();
        [("y", &self.primal_norm), ("lambda", &self.lambda_norm), ("z", &self.z_norm)]
            .into_iter()
            .map(|(name, v)| (name, v.iter().cloned().fold(0.0, f64::max), v[k]))
            .collect()
    }
}

fn z_mass(z: &DVector<f64>, n: usize, m: usize) -> DVector<f64> {
    let mut s = DVector::zeros(m);
    for i in 0..n {
        s += z.rows(i * m, m);
    }
    s
}

/// Integrates and records norms, set membership, z-mass drift and,
/// when `lyapunov_at` is given, the Lyapunov value relative to
/// `(x*, λ̄)` at every step.
pub fn observed_run(
    problem: &EmoProblem,
    graph: &CommGraph,
    algorithm: Algorithm,
    opts: &IntegrateOptions,
    lyapunov_at: Option<(&DVector<f64>, &DVector<f64>)>,
) -> (Trajectory, RunLog) {
    let eq = lyapunov_at.map(|(x, l)| build_equilibrium(problem, graph, x, l, algorithm).unwrap());
    let lyap = eq.as_ref().map(|eq| Lyapunov::new(problem, eq, algorithm).unwrap());
    let omega = emo_core::stack(problem).omega;
    let (n, m) = (problem.n(), problem.m());
    let init = SolverState::initial(problem, algorithm);
    let z0 = z_mass(&init.z, n, m);
    let mut log = RunLog::default();
    let mut prev_x: Option<DVector<f64>> = None;
    let traj = integrate_observed(problem, graph, algorithm, init, opts, |view| {
        log.times.push(view.state.t);
        log.primal_norm.push(view.state.primal.norm());
        log.lambda_norm.push(view.state.lambda.norm());
        log.z_norm.push(view.state.z.norm());
        let d = omega.distance(view.eval.x.as_slice());
        log.max_set_distance = log.max_set_distance.max(d);
        let drift = (z_mass(&view.state.z, n, m) - &z0).norm();
        log.max_z_mass_drift = log.max_z_mass_drift.max(drift);
        log.crossed.push(prev_x.as_ref().is_some_and(|p| {
            p.iter().zip(view.eval.x.iter()).any(|(a, b)| a * b <= 0.0 && a != b)
        }));
        prev_x = Some(view.eval.x.clone());
        if let Some(l) = &lyap {
            log.lyapunov.push(l.at(view.state).unwrap());
        }
    })
    .unwrap();
    (traj, log)
}

/// Random set of any variant, products nested at most one level.
pub fn random_set(rng: &mut ChaCha8Rng, allow_product: bool) -> ConvexSet {
    let kind = rng.random_range(0..if allow_product { 5 } else { 4 });
    match kind {
        0 => ConvexSet::full(rng.random_range(1..=4)),
        1 => {
            let lo = rng.random_range(-5.0..5.0);
            ConvexSet::interval(lo, lo + rng.random_range(0.0..4.0)).unwrap()
        }
        2 => {
            let d = rng.random_range(1..=4);
            let lo: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let hi = lo.iter().map(|l| l + rng.random_range(0.0..4.0)).collect();
            ConvexSet::boxed(lo, hi).unwrap()
        }
        3 => {
            let d = rng.random_range(1..=4);
            let center = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            ConvexSet::ball(center, rng.random_range(0.0..3.0)).unwrap()
        }
        _ => {
            let k = rng.random_range(1..=3);
            ConvexSet::product((0..k).map(|_| random_set(rng, false)).collect()).unwrap()
        }
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-scale..scale))
}
