use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::set::bits;
use crate::error::{EmoError, Result};

/// Value and subgradient oracle for one agent's private objective.
///
/// `subgradient` returns a single selection `g(x) ∈ ∂f(x)`; the dynamics
/// integrate that selection of the differential inclusion.
pub trait ObjectiveOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64], out: &mut [f64]);
    /// True when `subgradient` is a genuine gradient, Lipschitz on the set.
    fn is_smooth(&self) -> bool;
    /// Declared by whoever builds the problem; never inferred.
    fn is_strictly_convex(&self) -> bool;
    /// Canonical description used for problem hashing.
    fn fingerprint(&self) -> String;
}

/// `f(x) = ½ xᵀQx + cᵀx + ρ‖x‖₁`.
///
/// At `x_j = 0` the ℓ1 part contributes the minimal-norm subgradient 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticL1 {
    q: DMatrix<f64>,
    c: DVector<f64>,
    l1: f64,
    strict: bool,
}

impl QuadraticL1 {
    /// `q` must be symmetric; `l1` nonnegative. Strict convexity is declared
    /// separately with [`QuadraticL1::strictly_convex`].
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, l1: f64) -> Result<Self> {
        if !q.is_square() || q.nrows() != c.len() {
            return Err(EmoError::Config(format!(
                "quadratic objective: Q is {}x{}, c has length {}",
                q.nrows(),
                q.ncols(),
                c.len()
            )));
        }
        if q != q.transpose() {
            return Err(EmoError::Config("quadratic objective: Q is not symmetric".into()));
        }
        if !(l1 >= 0.0 && l1.is_finite()) {
            return Err(EmoError::Config(format!(
                "quadratic objective: l1 weight must be >= 0, got {l1}"
            )));
        }
        Ok(Self {
            q,
            c,
            l1,
            strict: false,
        })
    }

    pub fn strictly_convex(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// `a/2·‖x‖² + ρ‖x‖₁` on ℝ^dim, declared strictly convex when `a > 0`.
    pub fn isotropic(dim: usize, a: f64, l1: f64) -> Self {
        Self {
            q: DMatrix::identity(dim, dim) * a,
            c: DVector::zeros(dim),
            l1,
            strict: a > 0.0,
        }
    }

    /// `‖x‖²`.
    pub fn squared_norm(dim: usize) -> Self {
        Self::isotropic(dim, 2.0, 0.0)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }
}

impl ObjectiveOracle for QuadraticL1 {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.c.len();
        let mut v = 0.0;
        for i in 0..n {
            let mut qx = 0.0;
            for j in 0..n {
                qx += self.q[(i, j)] * x[j];
            }
            v += 0.5 * x[i] * qx + self.c[i] * x[i] + self.l1 * x[i].abs();
        }
        v
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        let n = self.c.len();
        for i in 0..n {
            let mut g = self.c[i];
            for j in 0..n {
                g += self.q[(i, j)] * x[j];
            }
            out[i] = g + self.l1 * sign0(x[i]);
        }
    }

    fn is_smooth(&self) -> bool {
        self.l1 == 0.0
    }

    fn is_strictly_convex(&self) -> bool {
        self.strict
    }

    fn fingerprint(&self) -> String {
        format!(
            "quadl1(q=[{}],c=[{}],l1={},strict={})",
            self.q.iter().map(|v| bits(*v)).collect::<Vec<_>>().join(","),
            self.c.iter().map(|v| bits(*v)).collect::<Vec<_>>().join(","),
            bits(self.l1),
            self.strict
        )
    }
}

/// Sign with `sign0(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type SubgradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Objective built from closures.
#[derive(Clone)]
pub struct FnObjective {
    dim: usize,
    value: Arc<ValueFn>,
    subgradient: Arc<SubgradFn>,
    smooth: bool,
    strict: bool,
    label: String,
}

impl FnObjective {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        subgradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            subgradient: Arc::new(subgradient),
            smooth: false,
            strict: false,
            label: label.into(),
        }
    }

    pub fn smooth(mut self, smooth: bool) -> Self {
        self.smooth = smooth;
        self
    }

    pub fn strictly_convex(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("smooth", &self.smooth)
            .field("strict", &self.strict)
            .finish()
    }
}

impl ObjectiveOracle for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        (self.subgradient)(x, out)
    }

    fn is_smooth(&self) -> bool {
        self.smooth
    }

    fn is_strictly_convex(&self) -> bool {
        self.strict
    }

    fn fingerprint(&self) -> String {
        format!("fn({},{},{},{})", self.label, self.dim, self.smooth, self.strict)
    }
}

/// Outcome of sampling the subgradient inequality on random pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityProbe {
    /// Most negative `f(y) − f(x) − g(x)ᵀ(y − x)` seen.
    pub worst_gap: f64,
    /// Pairs with `(g(x) − g(y))ᵀ(x − y) <= 0`, `x ≠ y`.
    pub monotonicity_failures: usize,
    pub samples: usize,
}

/// Samples `samples` pairs uniformly in `bounds` and records the worst
/// violation of the subgradient inequality and of strict monotonicity.
pub fn probe_convexity<R: Rng + ?Sized>(
    objective: &dyn ObjectiveOracle,
    bounds: &[(f64, f64)],
    samples: usize,
    rng: &mut R,
) -> ConvexityProbe {
    let n = objective.dim();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut worst_gap = f64::INFINITY;
    let mut monotonicity_failures = 0;
    for _ in 0..samples {
        for j in 0..n {
            let (lo, hi) = bounds[j];
            x[j] = lo + (hi - lo) * rng.random::<f64>();
            y[j] = lo + (hi - lo) * rng.random::<f64>();
        }
        objective.subgradient(&x, &mut gx);
        objective.subgradient(&y, &mut gy);
        let lin: f64 = gx.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (b - a)).sum();
        let gap = objective.value(&y) - objective.value(&x) - lin;
        worst_gap = worst_gap.min(gap);
        let mono: f64 = (0..n).map(|j| (gx[j] - gy[j]) * (x[j] - y[j])).sum();
        if x != y && mono <= 0.0 {
            monotonicity_failures += 1;
        }
    }
    ConvexityProbe {
        worst_gap,
        monotonicity_failures,
        samples,
    }
}
