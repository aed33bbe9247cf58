use serde::{Deserialize, Serialize};

use crate::error::{EmoError, Result};

/// Closed convex set with a closed-form Euclidean projection.
///
/// Products project factorwise, so an agent's `Ω_i` and the stacked
/// `Ω = Π Ω_i` share one representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    FullSpace { dim: usize },
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Product { factors: Vec<ConvexSet> },
}

impl ConvexSet {
    pub fn full(dim: usize) -> Self {
        Self::FullSpace { dim }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let set = Self::Interval { lo, hi };
        set.check()?;
        Ok(set)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let set = Self::Box { lo, hi };
        set.check()?;
        Ok(set)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = Self::Ball { center, radius };
        set.check()?;
        Ok(set)
    }

    pub fn product(factors: Vec<ConvexSet>) -> Result<Self> {
        let set = Self::Product { factors };
        set.check()?;
        Ok(set)
    }

    /// Checks the variant invariants. Sets deserialized from config files go
    /// through here before use.
    pub fn check(&self) -> Result<()> {
        match self {
            Self::FullSpace { .. } => Ok(()),
            Self::Interval { lo, hi } => check_bounds(0, *lo, *hi),
            Self::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(EmoError::InvalidSet(format!(
                        "box bounds have lengths {} and {}",
                        lo.len(),
                        hi.len()
                    )));
                }
                lo.iter()
                    .zip(hi)
                    .enumerate()
                    .try_for_each(|(j, (&l, &h))| check_bounds(j, l, h))
            }
            Self::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(EmoError::InvalidSet(format!(
                        "ball radius must be positive and finite, got {radius}"
                    )));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(EmoError::InvalidSet("ball center is not finite".into()));
                }
                Ok(())
            }
            Self::Product { factors } => factors.iter().try_for_each(Self::check),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::FullSpace { dim } => *dim,
            Self::Interval { .. } => 1,
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } => center.len(),
            Self::Product { factors } => factors.iter().map(Self::dim).sum(),
        }
    }

    /// Per-coordinate bounds when the set is a (possibly unbounded) box.
    /// Balls have no such description and yield `None`.
    pub fn coordinate_bounds(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::FullSpace { dim } => Some(vec![(f64::NEG_INFINITY, f64::INFINITY); *dim]),
            Self::Interval { lo, hi } => Some(vec![(*lo, *hi)]),
            Self::Box { lo, hi } => Some(lo.iter().copied().zip(hi.iter().copied()).collect()),
            Self::Ball { .. } => None,
            Self::Product { factors } => {
                let mut out = Vec::with_capacity(self.dim());
                for f in factors {
                    out.extend(f.coordinate_bounds()?);
                }
                Some(out)
            }
        }
    }

    /// Axis-aligned box enclosing the set.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
            Self::Product { factors } => factors.iter().flat_map(Self::bounding_box).collect(),
            other => other
                .coordinate_bounds()
                .expect("non-ball variants are boxes"),
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut p = vec![0.0; x.len()];
        crate::projection::project_slice(self, x, &mut p);
        x.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.distance(x) <= tol
    }

    /// Short canonical description, stable across runs.
    pub fn fingerprint(&self) -> String {
        match self {
            Self::FullSpace { dim } => format!("full({dim})"),
            Self::Interval { lo, hi } => format!("interval({},{})", bits(*lo), bits(*hi)),
            Self::Box { lo, hi } => format!(
                "box([{}],[{}])",
                lo.iter().map(|v| bits(*v)).collect::<Vec<_>>().join(","),
                hi.iter().map(|v| bits(*v)).collect::<Vec<_>>().join(",")
            ),
            Self::Ball { center, radius } => format!(
                "ball([{}],{})",
                center.iter().map(|v| bits(*v)).collect::<Vec<_>>().join(","),
                bits(*radius)
            ),
            Self::Product { factors } => format!(
                "product({})",
                factors
                    .iter()
                    .map(Self::fingerprint)
                    .collect::<Vec<_>>()
                    .join(";")
            ),
        }
    }
}

fn check_bounds(j: usize, lo: f64, hi: f64) -> Result<()> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(EmoError::InvalidSet(format!(
            "bounds at coordinate {j} are not ordered: lo={lo}, hi={hi}"
        )));
    }
    if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
        return Err(EmoError::InvalidSet(format!(
            "bounds at coordinate {j} describe an empty set"
        )));
    }
    Ok(())
}

pub(crate) fn bits(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}
