//! Weighted undirected communication graphs.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, EmoError, Result};

/// Symmetric adjacency with zero diagonal and nonnegative weights.
/// Stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    adjacency: DMatrix<f64>,
}

impl CommGraph {
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(EmoError::InvalidGraph(format!(
                "adjacency is {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        let n = adjacency.nrows();
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(EmoError::InvalidGraph(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(a.is_finite() && a >= 0.0) {
                    return Err(EmoError::InvalidGraph(format!(
                        "weight a[{i},{j}] = {a} is not a finite nonnegative number"
                    )));
                }
                if a != adjacency[(j, i)] {
                    return Err(EmoError::InvalidGraph(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Undirected weighted edge list over nodes `0..n`. Repeated edges are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(EmoError::InvalidGraph(format!(
                    "edge ({i},{j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(EmoError::InvalidGraph(format!("self-loop at node {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(EmoError::InvalidGraph(format!(
                    "edge ({i},{j}) has weight {w}; weights must be positive"
                )));
            }
            if a[(i, j)] != 0.0 {
                return Err(EmoError::InvalidGraph(format!("edge ({i},{j}) listed twice")));
            }
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        Ok(Self { adjacency: a })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: DMatrix::zeros(n, n),
        }
    }

    /// Unit-weight cycle `0 – 1 – … – (n−1) – 0`. Two nodes get a single
    /// edge.
    pub fn ring(n: usize) -> Self {
        let mut g = Self::path(n);
        if n >= 3 {
            g.adjacency[(0, n - 1)] = 1.0;
            g.adjacency[(n - 1, 0)] = 1.0;
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let mut a = DMatrix::zeros(n, n);
        for i in 1..n {
            a[(i - 1, i)] = 1.0;
            a[(i, i - 1)] = 1.0;
        }
        Self { adjacency: a }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            adjacency: DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }),
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.adjacency[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// `L_n = D − A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = -self.adjacency.clone();
        for i in 0..n {
            l[(i, i)] = self.adjacency.row(i).sum();
        }
        l
    }

    /// Number of connected components, by breadth-first search.
    pub fn components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for j in 0..n {
                    if !seen[j] && self.adjacency[(i, j)] > 0.0 {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.components() <= 1
    }

    /// `out_i = Σ_j a_ij (v_i − v_j)` for per-agent vectors of a common length.
    pub fn neighbor_diff(&self, values: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        check_len("neighbor values", self.n(), values.len())?;
        let m = values.first().map_or(0, DVector::len);
        for v in values {
            check_len("neighbor value length", m, v.len())?;
        }
        let mut stacked = DVector::zeros(self.n() * m);
        for (i, v) in values.iter().enumerate() {
            stacked.rows_mut(i * m, m).copy_from(v);
        }
        let out = self.apply_laplacian(m, &stacked);
        Ok((0..self.n())
            .map(|i| out.rows(i * m, m).into_owned())
            .collect())
    }

    /// `(L_n ⊗ I_m) v` on a stacked vector of `n` blocks of length `m`.
    pub fn apply_laplacian(&self, m: usize, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        debug_assert_eq!(v.len(), n * m);
        let mut out = DVector::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.adjacency[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for k in 0..m {
                    out[i * m + k] += a * (v[i * m + k] - v[j * m + k]);
                }
            }
        }
        out
    }
}

/// Free-function form of [`CommGraph::laplacian`].
pub fn laplacian(graph: &CommGraph) -> DMatrix<f64> {
    graph.laplacian()
}
