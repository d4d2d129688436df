//! Analytic manifolds embedded in R^3: finite unions of circles, round
//! 2-spheres, and isolated points.
//!
//! Every component carries an explicit chart, so positions, tangent bases,
//! nearest points, and the reach are all available in closed form (up to a
//! numerically refined minimization for inter-component separation). That
//! makes the module usable as ground truth when judging autoencoders.

mod pointset;
mod project;
mod reach;
mod sample;

pub use pointset::{PointSet, SamplePoint};
pub use project::{ProjectionResult, DEFAULT_TIE_TOL};
pub use reach::{estimate_reach, ReachMechanism, ReachResult};

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Ambient points and vectors live in R^3.
pub type Vec3 = Vector3<f64>;

const TAU: f64 = std::f64::consts::TAU;

/// Minimum allowed separation between distinct components.
const MIN_COMPONENT_SEPARATION: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("a manifold needs at least one component")]
    EmptyManifold,
    #[error("component {index}: {message}")]
    InvalidComponent { index: usize, message: String },
    #[error(
        "components {a} and {b} nearly intersect (separation {separation:.3e}); \
         components must be pairwise disjoint with positive separation"
    )]
    ComponentsTooClose { a: usize, b: usize, separation: f64 },
    #[error(
        "uniform sampling needs positive total measure, got {measure:.3e}; \
         a measure-zero manifold (e.g. isolated points) carries no uniform distribution"
    )]
    MeasureZeroSampling { measure: f64 },
    #[error(
        "component {index} has zero measure; per-component sampling needs positive \
         measure on every component"
    )]
    MeasureZeroComponent { index: usize },
    #[error("reach estimation needs at least two points, got {0}")]
    NotEnoughPoints(usize),
    #[error("got {points} points but {bases} tangent bases")]
    TangentCountMismatch { points: usize, bases: usize },
    #[error("tangent basis {index} has {got} vectors; at most 2 fit in ambient dimension 3")]
    TangentBasisTooLarge { index: usize, got: usize },
    #[error("sample {index} references component {component}, but the manifold has {count}")]
    ComponentIndexOutOfRange {
        index: usize,
        component: usize,
        count: usize,
    },
    #[error("sample {index} carries {got} chart parameters; component {component} expects {expected}")]
    ParamCountMismatch {
        index: usize,
        component: usize,
        got: usize,
        expected: usize,
    },
    #[error("csv line {line}: {message}")]
    InvalidCsv { line: usize, message: String },
}

/// One connected component of the manifold.
///
/// Charts:
/// * `Circle` — one parameter `theta in [0, 2*pi)`, position
///   `center + radius * (cos(theta) * u + sin(theta) * v)` where `(u, v)` is a
///   deterministic orthonormal frame of the circle plane.
/// * `Sphere2` — polar/azimuthal parameters `(theta in [0, pi], phi in [0, 2*pi))`,
///   position `center + radius * (sin(theta)cos(phi), sin(theta)sin(phi), cos(theta))`.
/// * `Point` — no parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentKind {
    Circle {
        center: Vec3,
        /// Unit normal of the circle plane (normalized at construction).
        normal: Vec3,
        radius: f64,
    },
    #[serde(alias = "sphere")]
    Sphere2 { center: Vec3, radius: f64 },
    Point { location: Vec3 },
}

/// Result of projecting an ambient point onto a single component.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ComponentProjection {
    pub nearest: Vec3,
    pub distance: f64,
    /// False when the nearest point is not unique within this component
    /// (circle axis, sphere center).
    pub unique: bool,
}

/// Deterministic orthonormal frame `(u, v)` spanning the plane orthogonal to
/// the unit vector `n`, with `v = n × u`. The seed axis is the standard basis
/// vector least aligned with `n` (lowest index on ties), so the frame is a
/// continuous, reproducible function of `n` away from axis switches.
pub(crate) fn orthonormal_frame(n: Vec3) -> (Vec3, Vec3) {
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let mut best = 0;
    let mut best_dot = f64::INFINITY;
    for (i, e) in axes.iter().enumerate() {
        let d = n.dot(e).abs();
        if d < best_dot {
            best_dot = d;
            best = i;
        }
    }
    let e = axes[best];
    let u = (e - n * n.dot(&e)).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Wraps an angle into `[0, 2*pi)`.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t == TAU {
        0.0
    } else {
        t
    }
}

/// Distance between two angles on the circle, in `[0, pi]`.
pub(crate) fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl ComponentKind {
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ComponentKind::Circle { .. } => 1,
            ComponentKind::Sphere2 { .. } => 2,
            ComponentKind::Point { .. } => 0,
        }
    }

    /// Riemannian volume: circumference, surface area, or zero.
    pub fn measure(&self) -> f64 {
        match self {
            ComponentKind::Circle { radius, .. } => TAU * radius,
            ComponentKind::Sphere2 { radius, .. } => 2.0 * TAU * radius * radius,
            ComponentKind::Point { .. } => 0.0,
        }
    }

    /// Reach of the component considered on its own: the osculating radius
    /// for circles and spheres, infinite for a point.
    pub fn osculating_reach(&self) -> f64 {
        match self {
            ComponentKind::Circle { radius, .. } => *radius,
            ComponentKind::Sphere2 { radius, .. } => *radius,
            ComponentKind::Point { .. } => f64::INFINITY,
        }
    }

    /// The in-plane frame of a circle component.
    pub(crate) fn circle_frame(&self) -> (Vec3, Vec3) {
        match self {
            ComponentKind::Circle { normal, .. } => orthonormal_frame(*normal),
            _ => unreachable!("circle_frame is only called on circles"),
        }
    }

    /// Maps chart parameters to the ambient position. `params.len()` must
    /// equal [`Self::intrinsic_dim`].
    pub fn chart_to_ambient(&self, params: &[f64]) -> Vec3 {
        assert_eq!(
            params.len(),
            self.intrinsic_dim(),
            "chart parameter count must match the intrinsic dimension"
        );
        match self {
            ComponentKind::Circle { center, radius, .. } => {
                let (u, v) = self.circle_frame();
                let theta = params[0];
                center + (u * theta.cos() + v * theta.sin()) * *radius
            }
            ComponentKind::Sphere2 { center, radius } => {
                let (theta, phi) = (params[0], params[1]);
                let dir = Vec3::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                );
                center + dir * *radius
            }
            ComponentKind::Point { location } => *location,
        }
    }

    /// Inverts the chart for a point on (or near) the component. The angles
    /// are recovered with `atan2`, which stays fully accurate near chart
    /// poles where `acos` would lose half the significant digits.
    ///
    /// Degenerate directions (circle axis, sphere center) fall back to
    /// parameter zero deterministically.
    pub fn ambient_to_chart(&self, x: Vec3) -> Vec<f64> {
        match self {
            ComponentKind::Circle { center, .. } => {
                let (u, v) = self.circle_frame();
                let w = x - center;
                let (cu, cv) = (w.dot(&u), w.dot(&v));
                if cu == 0.0 && cv == 0.0 {
                    return vec![0.0];
                }
                vec![wrap_angle(cv.atan2(cu))]
            }
            ComponentKind::Sphere2 { center, .. } => {
                let w = x - center;
                let planar = w.x.hypot(w.y);
                let theta = planar.atan2(w.z);
                let phi = if planar == 0.0 {
                    0.0
                } else {
                    wrap_angle(w.y.atan2(w.x))
                };
                vec![theta, phi]
            }
            ComponentKind::Point { .. } => Vec::new(),
        }
    }

    /// Orthonormal tangent basis at the chart point. Empty for points; at
    /// sphere poles (where the azimuthal coordinate degenerates) a
    /// deterministic orthonormal pair perpendicular to the radial direction
    /// is returned instead of the chart derivatives.
    pub fn tangent_basis(&self, params: &[f64]) -> Vec<Vec3> {
        assert_eq!(
            params.len(),
            self.intrinsic_dim(),
            "chart parameter count must match the intrinsic dimension"
        );
        match self {
            ComponentKind::Circle { .. } => {
                let (u, v) = self.circle_frame();
                let theta = params[0];
                vec![u * (-theta.sin()) + v * theta.cos()]
            }
            ComponentKind::Sphere2 { .. } => {
                let (theta, phi) = (params[0], params[1]);
                if theta.sin().abs() < 1e-9 {
                    let radial = Vec3::new(0.0, 0.0, theta.cos().signum());
                    let (u, v) = orthonormal_frame(radial);
                    return vec![u, v];
                }
                let t_theta = Vec3::new(
                    theta.cos() * phi.cos(),
                    theta.cos() * phi.sin(),
                    -theta.sin(),
                );
                let t_phi = Vec3::new(-phi.sin(), phi.cos(), 0.0);
                vec![t_theta, t_phi]
            }
            ComponentKind::Point { .. } => Vec::new(),
        }
    }

    /// Nearest point on this component, with a uniqueness flag.
    pub(crate) fn nearest(&self, x: Vec3) -> ComponentProjection {
        match self {
            ComponentKind::Circle {
                center,
                normal,
                radius,
            } => {
                let w = x - center;
                let in_plane = w - normal * w.dot(normal);
                let planar_norm = in_plane.norm();
                if planar_norm < 1e-12 {
                    // On the axis: every circle point is equidistant.
                    let (u, _) = self.circle_frame();
                    let nearest = center + u * *radius;
                    ComponentProjection {
                        nearest,
                        distance: (x - nearest).norm(),
                        unique: false,
                    }
                } else {
                    let nearest = center + in_plane * (*radius / planar_norm);
                    ComponentProjection {
                        nearest,
                        distance: (x - nearest).norm(),
                        unique: true,
                    }
                }
            }
            ComponentKind::Sphere2 { center, radius } => {
                let w = x - center;
                let dist_center = w.norm();
                if dist_center < 1e-12 {
                    let nearest = center + Vec3::z() * *radius;
                    ComponentProjection {
                        nearest,
                        distance: *radius,
                        unique: false,
                    }
                } else {
                    let nearest = center + w * (*radius / dist_center);
                    ComponentProjection {
                        nearest,
                        distance: (dist_center - radius).abs(),
                        unique: true,
                    }
                }
            }
            ComponentKind::Point { location } => ComponentProjection {
                nearest: *location,
                distance: (x - location).norm(),
                unique: true,
            },
        }
    }

    fn validated(self, index: usize) -> Result<Self, GeometryError> {
        let err = |message: String| GeometryError::InvalidComponent { index, message };
        let finite3 = |v: &Vec3| v.iter().all(|c| c.is_finite());
        match self {
            ComponentKind::Circle {
                center,
                normal,
                radius,
            } => {
                if !finite3(&center) || !finite3(&normal) || !radius.is_finite() {
                    return Err(err("circle parameters must be finite".into()));
                }
                if radius <= 0.0 {
                    return Err(err(format!("circle radius must be positive, got {radius}")));
                }
                let n = normal.norm();
                if n < 1e-12 {
                    return Err(err("circle normal must be a nonzero vector".into()));
                }
                Ok(ComponentKind::Circle {
                    center,
                    normal: normal / n,
                    radius,
                })
            }
            ComponentKind::Sphere2 { center, radius } => {
                if !finite3(&center) || !radius.is_finite() {
                    return Err(err("sphere parameters must be finite".into()));
                }
                if radius <= 0.0 {
                    return Err(err(format!("sphere radius must be positive, got {radius}")));
                }
                Ok(ComponentKind::Sphere2 { center, radius })
            }
            ComponentKind::Point { location } => {
                if !finite3(&location) {
                    return Err(err("point location must be finite".into()));
                }
                Ok(ComponentKind::Point { location })
            }
        }
    }
}

/// A finite disjoint union of analytic components embedded in R^3.
///
/// Construction validates every component (finite parameters, positive radii,
/// nonzero normals — normals are normalized in place) and checks numerically,
/// on a dense parameter grid with local refinement, that distinct components
/// keep strictly positive pairwise distance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldSpec {
    components: Vec<ComponentKind>,
}

impl ManifoldSpec {
    pub fn new(components: Vec<ComponentKind>) -> Result<Self, GeometryError> {
        if components.is_empty() {
            return Err(GeometryError::EmptyManifold);
        }
        let components: Vec<ComponentKind> = components
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.validated(i))
            .collect::<Result<_, _>>()?;
        for a in 0..components.len() {
            for b in (a + 1)..components.len() {
                let separation = reach::pair_separation(&components[a], &components[b]);
                if separation <= MIN_COMPONENT_SEPARATION {
                    return Err(GeometryError::ComponentsTooClose { a, b, separation });
                }
            }
        }
        Ok(ManifoldSpec { components })
    }

    pub fn components(&self) -> &[ComponentKind] {
        &self.components
    }

    pub fn ambient_dim(&self) -> usize {
        3
    }

    pub fn max_component_dim(&self) -> usize {
        self.components
            .iter()
            .map(ComponentKind::intrinsic_dim)
            .max()
            .unwrap_or(0)
    }

    /// Total Riemannian measure (sum of component measures).
    pub fn total_measure(&self) -> f64 {
        self.components.iter().map(ComponentKind::measure).sum()
    }

    /// Nearest-point projection onto the union.
    ///
    /// `unique` is false when the winning component itself has an ambiguous
    /// nearest point, or when another component comes within `tie_tol` of the
    /// minimal distance; in the latter case `component_id` is `None`.
    pub fn nearest_point(&self, x: Vec3, tie_tol: f64) -> ProjectionResult {
        project::nearest_point(self, x, tie_tol)
    }

    /// Analytic reach of the union. Infallible: every supported component
    /// kind has a closed-form osculating reach, and pairwise separations are
    /// computed by grid search with local refinement.
    pub fn analytic_reach(&self) -> ReachResult {
        reach::analytic_reach(self)
    }

    /// Draws `n` points uniformly with respect to the measure on the union
    /// (components weighted by length/area). Fails when the total measure is
    /// zero and `n > 0`.
    pub fn sample_uniform(&self, n: usize, seed: u64) -> Result<PointSet, GeometryError> {
        sample::sample_uniform(self, n, seed)
    }

    /// Draws `n_per_component` points uniformly on each component. Fails if
    /// any component has zero measure.
    pub fn sample_per_component(
        &self,
        n_per_component: usize,
        seed: u64,
    ) -> Result<PointSet, GeometryError> {
        sample::sample_per_component(self, n_per_component, seed)
    }

    /// Exact orthonormal tangent bases at each sample's chart point.
    pub fn tangent_bases(&self, points: &PointSet) -> Result<Vec<Vec<Vec3>>, GeometryError> {
        points
            .points
            .iter()
            .enumerate()
            .map(|(index, p)| {
                let component = self.components.get(p.component_id).ok_or(
                    GeometryError::ComponentIndexOutOfRange {
                        index,
                        component: p.component_id,
                        count: self.components.len(),
                    },
                )?;
                if p.params.len() != component.intrinsic_dim() {
                    return Err(GeometryError::ParamCountMismatch {
                        index,
                        component: p.component_id,
                        got: p.params.len(),
                        expected: component.intrinsic_dim(),
                    });
                }
                Ok(component.tangent_basis(&p.params))
            })
            .collect()
    }
}

impl<'de> Deserialize<'de> for ManifoldSpec {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            components: Vec<ComponentKind>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ManifoldSpec::new(raw.components).map_err(serde::de::Error::custom)
    }
}

/// The two linked unit circles of the experiment in section 3: one in the
/// `z = 0` plane centered at the origin, one in the `y = 0` plane centered at
/// `(1, 0, 0)`. Each passes through the other's center; their separation is
/// exactly 1, so the union has reach 1/2.
pub fn linked_unit_circles() -> ManifoldSpec {
    ManifoldSpec::new(vec![
        ComponentKind::Circle {
            center: Vec3::zeros(),
            normal: Vec3::z(),
            radius: 1.0,
        },
        ComponentKind::Circle {
            center: Vec3::x(),
            normal: Vec3::y(),
            radius: 1.0,
        },
    ])
    .expect("the linked unit circles are a valid manifold")
}
