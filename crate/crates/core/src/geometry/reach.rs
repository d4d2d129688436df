//! Reach of a manifold union: analytic computation and point-cloud estimation.
//!
//! For a disjoint union of circles, spheres, and points the reach is
//!
//! ```text
//! reach = min( min_i osculating_reach(component_i),  min_{i<j} separation(i, j) / 2 )
//! ```
//!
//! Component reaches are closed-form. Pairwise separations are closed-form
//! where possible (sphere/sphere, anything/point) and otherwise found by a
//! dense parameter grid followed by local pattern-search refinement, which is
//! accurate to about 1e-10 on these smooth distance functions.

use super::{ComponentKind, GeometryError, ManifoldSpec, Vec3, TAU};
use serde::Serialize;

/// What limits the reach of the union.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachMechanism {
    /// The osculating radius of a single component is the binding term.
    ComponentCurvature,
    /// Half the minimal inter-component separation is the binding term.
    InterComponentSeparation,
}

/// Analytic reach of a union, with the quantities behind it.
#[derive(Clone, Debug, Serialize)]
pub struct ReachResult {
    pub reach: f64,
    /// Osculating reach of each component (infinite for points).
    pub per_component: Vec<f64>,
    /// Minimal pairwise separation; infinite for a single component.
    pub min_separation: f64,
    pub mechanism: ReachMechanism,
}

pub(super) fn analytic_reach(spec: &ManifoldSpec) -> ReachResult {
    let per_component: Vec<f64> = spec
        .components()
        .iter()
        .map(ComponentKind::osculating_reach)
        .collect();
    let curvature_term = per_component.iter().copied().fold(f64::INFINITY, f64::min);
    let mut min_separation = f64::INFINITY;
    for a in 0..spec.components().len() {
        for b in (a + 1)..spec.components().len() {
            let s = pair_separation(&spec.components()[a], &spec.components()[b]);
            min_separation = min_separation.min(s);
        }
    }
    let separation_term = 0.5 * min_separation;
    let (reach, mechanism) = if curvature_term <= separation_term {
        (curvature_term, ReachMechanism::ComponentCurvature)
    } else {
        (separation_term, ReachMechanism::InterComponentSeparation)
    };
    ReachResult {
        reach,
        per_component,
        min_separation,
        mechanism,
    }
}

/// Minimal distance between two disjoint components.
pub(super) fn pair_separation(a: &ComponentKind, b: &ComponentKind) -> f64 {
    use ComponentKind::*;
    match (a, b) {
        (Point { location }, other) | (other, Point { location }) => {
            other.nearest(*location).distance
        }
        (Sphere2 { center: c1, radius: r1 }, Sphere2 { center: c2, radius: r2 }) => {
            // Distances from points of sphere 1 to the center of sphere 2
            // sweep [|d - r1|, d + r1]; the distance to sphere 2's surface is
            // the distance from that interval to r2.
            let d = (c1 - c2).norm();
            let lo = (d - r1).abs();
            let hi = d + r1;
            if *r2 >= lo && *r2 <= hi {
                0.0
            } else {
                (lo - r2).abs().min((hi - r2).abs())
            }
        }
        (circle @ Circle { .. }, sphere @ Sphere2 { .. })
        | (sphere @ Sphere2 { .. }, circle @ Circle { .. }) => {
            let f = |params: &[f64]| sphere.nearest(circle.chart_to_ambient(&[params[0]])).distance;
            grid_then_refine(&f, &[4096])
        }
        (ca @ Circle { .. }, cb @ Circle { .. }) => {
            let f = |params: &[f64]| {
                (ca.chart_to_ambient(&[params[0]]) - cb.chart_to_ambient(&[params[1]])).norm()
            };
            grid_then_refine(&f, &[512, 512])
        }
    }
}

/// Minimizes `f` over the torus `[0, 2*pi)^m`: dense grid, then local
/// pattern-search refinement around the best cell.
fn grid_then_refine(f: &dyn Fn(&[f64]) -> f64, grid: &[usize]) -> f64 {
    let m = grid.len();
    let mut best_params = vec![0.0; m];
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; m];
    loop {
        let params: Vec<f64> = idx
            .iter()
            .zip(grid)
            .map(|(i, n)| TAU * (*i as f64) / (*n as f64))
            .collect();
        let v = f(&params);
        if v < best {
            best = v;
            best_params = params;
        }
        // Odometer increment over the grid.
        let mut carry = true;
        for k in 0..m {
            if carry {
                idx[k] += 1;
                if idx[k] == grid[k] {
                    idx[k] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    let steps: Vec<f64> = grid.iter().map(|n| TAU / (*n as f64)).collect();
    refine_minimum(f, best_params, steps)
}

/// Pattern search: move to the best of the 3^m stencil neighbors, halving the
/// steps whenever the center wins, until the steps are below 1e-11.
fn refine_minimum(f: &dyn Fn(&[f64]) -> f64, mut x: Vec<f64>, mut steps: Vec<f64>) -> f64 {
    let m = x.len();
    let mut fx = f(&x);
    while steps.iter().any(|s| *s > 1e-11) {
        let mut best_x = x.clone();
        let mut best_f = fx;
        let mut offset = vec![-1i32; m];
        loop {
            if offset.iter().any(|o| *o != 0) {
                let candidate: Vec<f64> = x
                    .iter()
                    .zip(&offset)
                    .zip(&steps)
                    .map(|((xi, o), s)| xi + (*o as f64) * s)
                    .collect();
                let v = f(&candidate);
                if v < best_f {
                    best_f = v;
                    best_x = candidate;
                }
            }
            let mut carry = true;
            for k in 0..m {
                if carry {
                    offset[k] += 1;
                    if offset[k] > 1 {
                        offset[k] = -1;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        if best_f + 1e-18 < fx {
            x = best_x;
            fx = best_f;
        } else {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    fx
}

/// Estimates the reach of the sampled manifold from a point cloud with known
/// tangent bases: the minimum over ordered pairs `(p, q)` of
/// `|q - p|^2 / (2 * dist(q - p, T_p))`, where `dist(., T_p)` is the norm of
/// the component normal to the tangent space at `p`. Pairs whose normal
/// component is below 1e-12 are skipped; if every pair is skipped the
/// estimate is infinite (a flat cloud).
pub fn estimate_reach(points: &[Vec3], tangent_bases: &[Vec<Vec3>]) -> Result<f64, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::NotEnoughPoints(points.len()));
    }
    if points.len() != tangent_bases.len() {
        return Err(GeometryError::TangentCountMismatch {
            points: points.len(),
            bases: tangent_bases.len(),
        });
    }
    // Flatten the bases into fixed-size rows so the O(n^2) scan below stays
    // free of per-pair indirection.
    let n = points.len();
    let mut basis = vec![[Vec3::zeros(); 2]; n];
    let mut basis_len = vec![0u8; n];
    for (index, b) in tangent_bases.iter().enumerate() {
        if b.len() > 2 {
            return Err(GeometryError::TangentBasisTooLarge {
                index,
                got: b.len(),
            });
        }
        for (k, t) in b.iter().enumerate() {
            basis[index][k] = *t;
        }
        basis_len[index] = b.len() as u8;
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        let p = points[i];
        let row = &basis[i];
        let rows = basis_len[i];
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = q - p;
            let dd = d.norm_squared();
            let mut tangential = 0.0;
            for t in row.iter().take(rows as usize) {
                let s = d.dot(t);
                tangential += s * s;
            }
            let normal_sq = dd - tangential;
            if normal_sq <= 1e-24 {
                continue;
            }
            let ratio = dd / (2.0 * normal_sq.sqrt());
            if ratio < best {
                best = ratio;
            }
        }
    }
    Ok(best)
}
