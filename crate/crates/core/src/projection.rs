//! Euclidean projections onto [`ConvexSet`] variants and the projection
//! merit function `V(x) = ½(‖x − P(y)‖² − ‖x − P(x)‖²)`.

use nalgebra::DVector;

use crate::error::{check_len, Result};
use crate::problem::ConvexSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: DVector<f64>,
    pub distance_sq: f64,
}

pub fn project(set: &ConvexSet, u: &DVector<f64>) -> Result<ProjectionResult> {
    check_len("projection input", set.dim(), u.len())?;
    let mut point = DVector::zeros(u.len());
    project_slice(set, u.as_slice(), point.as_mut_slice());
    let distance_sq = (u - &point).norm_squared();
    Ok(ProjectionResult { point, distance_sq })
}

/// Projects `u` into `out`. Both slices must have length `set.dim()`.
pub(crate) fn project_slice(set: &ConvexSet, u: &[f64], out: &mut [f64]) {
    debug_assert_eq!(u.len(), set.dim());
    debug_assert_eq!(out.len(), set.dim());
    match set {
        ConvexSet::FullSpace { .. } => out.copy_from_slice(u),
        ConvexSet::Interval { lo, hi } => out[0] = u[0].clamp(*lo, *hi),
        ConvexSet::Box { lo, hi } => {
            for j in 0..u.len() {
                out[j] = u[j].clamp(lo[j], hi[j]);
            }
        }
        ConvexSet::Ball { center, radius } => {
            let dist = u
                .iter()
                .zip(center)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            if dist <= *radius {
                out.copy_from_slice(u);
            } else {
                let scale = radius / dist;
                for j in 0..u.len() {
                    out[j] = center[j] + scale * (u[j] - center[j]);
                }
            }
        }
        ConvexSet::Product { factors } => {
            let mut offset = 0;
            for f in factors {
                let d = f.dim();
                project_slice(f, &u[offset..offset + d], &mut out[offset..offset + d]);
                offset += d;
            }
        }
    }
}

pub(crate) fn project_vec(set: &ConvexSet, u: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    project_slice(set, u.as_slice(), out.as_mut_slice());
    out
}

/// Merit function of the projection; its gradient in `x` is
/// `P(x) − P(y_ref)` and it is bounded below by `½‖P(x) − P(y_ref)‖²`.
pub fn merit(set: &ConvexSet, x: &DVector<f64>, y_ref: &DVector<f64>) -> Result<f64> {
    check_len("merit point", set.dim(), x.len())?;
    check_len("merit reference", set.dim(), y_ref.len())?;
    Ok(merit_unchecked(set, x, y_ref))
}

pub(crate) fn merit_unchecked(set: &ConvexSet, x: &DVector<f64>, y_ref: &DVector<f64>) -> f64 {
    let px = project_vec(set, x);
    let py = project_vec(set, y_ref);
    0.5 * ((x - py).norm_squared() - (x - px).norm_squared())
}
