//! Nearest-point projection onto a manifold union.

use super::{ManifoldSpec, Vec3};

/// Default tolerance for declaring a cross-component distance tie.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Outcome of projecting an ambient point onto the union.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResult {
    /// A nearest point of the union (a deterministic representative when the
    /// projection is ambiguous).
    pub nearest: Vec3,
    /// Distance from the query to the union.
    pub distance: f64,
    /// True only when both the winning component's own projection is unique
    /// and no rival component comes within `tie_tol` of the same distance.
    pub unique: bool,
    /// The component owning the projection, or `None` when two components
    /// are tied within `tie_tol`.
    pub component_id: Option<usize>,
}

pub(super) fn nearest_point(spec: &ManifoldSpec, x: Vec3, tie_tol: f64) -> ProjectionResult {
    let mut best_idx = 0;
    let mut best = spec.components()[0].nearest(x);
    let mut runner_up = f64::INFINITY;
    for (idx, comp) in spec.components().iter().enumerate().skip(1) {
        let candidate = comp.nearest(x);
        if candidate.distance < best.distance {
            runner_up = best.distance;
            best = candidate;
            best_idx = idx;
        } else if candidate.distance < runner_up {
            runner_up = candidate.distance;
        }
    }
    let tied = runner_up - best.distance <= tie_tol;
    ProjectionResult {
        nearest: best.nearest,
        distance: best.distance,
        unique: best.unique && !tied,
        component_id: if tied { None } else { Some(best_idx) },
    }
}
