//! The oracle autoencoder: a constructive encoder/decoder pair that
//! reconstructs a manifold union exactly (up to float round-off) outside an
//! explicit closed "bad set" of arbitrarily small measure.
//!
//! Construction, per component:
//!
//! * pick a cut locus — an angle on a circle, a point on a sphere — placed at
//!   the midpoint of the largest gap of the protected set `S`, so the closed
//!   bad neighborhood of the cut never touches `S`;
//! * remove a closed neighborhood of the cut whose measure stays below a
//!   per-component budget `delta / (2 * n_components)` (also capped at half
//!   the component measure), so the total bad-set measure is below `delta`;
//! * chart the remainder injectively into a dedicated target region of R^k —
//!   unit intervals `[2i, 2i+1]` when `k = 1`, unit disks centered `(3i, 0)`
//!   (or unit-length segments for circles) when `k = 2` — and blend the bad
//!   neighborhood linearly so the encoder stays continuous on all of R^3's
//!   tube around the manifold.
//!
//! The decoder inverts each chart exactly on its target, interpolates across
//! gaps (`k = 1`) or clamps to the nearest target (`k = 2`), which makes the
//! round trip the identity outside the bad set while both maps stay
//! continuous on their domains.

use crate::geometry::{
    ComponentKind, GeometryError, ManifoldSpec, Vec3, DEFAULT_TIE_TOL,
};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Points within this ambient distance count as lying on the manifold.
pub const ON_MANIFOLD_TOL: f64 = 1e-9;

/// Slop added to the reach when testing tube membership, so points exactly on
/// the tube boundary encode cleanly.
const TUBE_EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error(
        "protected point {index} is off the manifold \
         (distance {distance:.3e} exceeds {tol:.0e})"
    )]
    ProtectedPointOffManifold {
        index: usize,
        distance: f64,
        tol: f64,
    },
    #[error("component {component}: the protected set leaves no room for a cut of positive width")]
    NoRoomForCut { component: usize },
    #[error(
        "outside encoder domain: distance {distance:.6e} to the manifold exceeds \
         the reach {reach:.6e}"
    )]
    OutsideTube { distance: f64, reach: f64 },
    #[error(
        "outside encoder domain: the nearest-point projection (distance {distance:.6e}) \
         is not unique"
    )]
    AmbiguousProjection { distance: f64 },
    #[error(
        "point is off the manifold (distance {distance:.3e}); bad-set membership \
         is defined only on the manifold"
    )]
    NotOnManifold { distance: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Where a component's chart is cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CutLocus {
    /// Cut angle on the circle chart.
    CircleAngle { angle: f64 },
    /// Unit direction from the sphere center to the cut point.
    SphereDirection { direction: Vec3 },
    /// Point components need no cut.
    None,
}

/// The latent region a component is encoded into.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
enum Target {
    /// `[start, start + length]` on the latent line (`k = 1`).
    Interval { start: f64, length: f64 },
    /// Horizontal segment centered at `center` (`k = 2`, circle components).
    Segment { center: [f64; 2], half_length: f64 },
    /// Disk of radius `radius` centered at `center` (`k = 2`, spheres).
    Disk { center: [f64; 2], radius: f64 },
    /// A single latent point (point components).
    Point { at: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ComponentCodec {
    cut: CutLocus,
    /// Half-width of the bad neighborhood around the cut, in chart angle
    /// units (radians of arc for circles, geodesic polar angle for spheres).
    /// Zero for point components.
    half_width: f64,
    target: Target,
}

/// Verification summary produced by [`OracleAutoencoder::verify`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_samples: usize,
    pub latent_dim: usize,
    pub delta: f64,
    /// Exact measure of the bad set, from the stored widths.
    pub bad_set_measure: f64,
    /// Empirical bad-set measure: hit fraction times total measure.
    pub mu_hat: f64,
    pub bad_set_hits: usize,
    pub max_error_off_bad_set: f64,
    /// Max round-trip error seen on the bad set (dense grid plus any sampled
    /// hits); this is where the reconstruction is allowed to be bad.
    pub max_error_on_bad_set: f64,
    pub max_error_overall: f64,
    /// Protected points that landed in the bad set (must be zero).
    pub protected_hits: usize,
    pub reach: f64,
}

/// The constructive autoencoder. `encode` maps the closed reach-tube around
/// the manifold into R^k (`k = max(1, max component dimension)`); `decode` is
/// total on R^k and inverts `encode` exactly on the manifold minus the bad
/// set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleAutoencoder {
    spec: ManifoldSpec,
    latent_dim: usize,
    delta: f64,
    reach: f64,
    protected: Vec<Vec3>,
    codecs: Vec<ComponentCodec>,
}

/// Midpoint of the largest circular gap between sorted angles, with the gap
/// half-width. For an empty set the cut defaults to `pi` with infinite
/// clearance.
fn largest_gap_cut(angles: &mut Vec<f64>) -> (f64, f64) {
    if angles.is_empty() {
        return (PI, f64::INFINITY);
    }
    angles.sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
    let n = angles.len();
    let mut best_gap = -1.0;
    let mut best_mid = PI;
    for i in 0..n {
        let a = angles[i];
        let b = if i + 1 == n {
            angles[0] + TAU
        } else {
            angles[i + 1]
        };
        let gap = b - a;
        if gap > best_gap {
            best_gap = gap;
            best_mid = crate::geometry::wrap_angle(a + 0.5 * gap);
        }
    }
    (best_mid, 0.5 * best_gap)
}

/// Direction on the unit sphere maximizing the minimal geodesic angle to the
/// given directions, found on a Fibonacci grid. Empty input yields +z with
/// infinite clearance.
fn farthest_direction(dirs: &[Vec3]) -> (Vec3, f64) {
    if dirs.is_empty() {
        return (Vec3::z(), f64::INFINITY);
    }
    let n = 4096;
    let golden = PI * (3.0 - 5.0f64.sqrt());
    let mut best = (Vec3::z(), -1.0);
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        let cand = Vec3::new(r * phi.cos(), r * phi.sin(), z);
        let clearance = dirs
            .iter()
            .map(|d| geodesic_angle(cand, *d))
            .fold(f64::INFINITY, f64::min);
        if clearance > best.1 {
            best = (cand, clearance);
        }
    }
    best
}

/// Angle between unit vectors, computed with `atan2` for full precision near
/// 0 and pi.
fn geodesic_angle(a: Vec3, b: Vec3) -> f64 {
    a.cross(&b).norm().atan2(a.dot(&b))
}

impl OracleAutoencoder {
    /// Builds the oracle for `spec` with measure budget `delta` and a finite
    /// protected set that the bad set must avoid.
    pub fn build(
        spec: &ManifoldSpec,
        delta: f64,
        protected: &[Vec3],
    ) -> Result<Self, OracleError> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(OracleError::InvalidDelta(delta));
        }
        let n_components = spec.components().len();
        // Chart coordinates of each protected point, grouped by component.
        let mut protected_params: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_components];
        for (index, s) in protected.iter().enumerate() {
            let proj = spec.nearest_point(*s, DEFAULT_TIE_TOL);
            if proj.distance > ON_MANIFOLD_TOL {
                return Err(OracleError::ProtectedPointOffManifold {
                    index,
                    distance: proj.distance,
                    tol: ON_MANIFOLD_TOL,
                });
            }
            let comp = proj
                .component_id
                .expect("on-manifold points project to a unique component (components are separated)");
            protected_params[comp].push(spec.components()[comp].ambient_to_chart(proj.nearest));
        }
        let latent_dim = spec.max_component_dim().max(1);
        let budget = delta / (2.0 * n_components as f64);
        let mut codecs = Vec::with_capacity(n_components);
        for (i, comp) in spec.components().iter().enumerate() {
            let codec = match comp {
                ComponentKind::Circle { radius, .. } => {
                    let mut angles: Vec<f64> =
                        protected_params[i].iter().map(|p| p[0]).collect();
                    let (cut_angle, clearance) = largest_gap_cut(&mut angles);
                    // Arc measure of the bad set is 2 * half_width * radius.
                    let from_budget = budget / (2.0 * radius);
                    let half_width = from_budget.min(0.5 * clearance).min(0.5 * PI);
                    if !(half_width > 0.0) {
                        return Err(OracleError::NoRoomForCut { component: i });
                    }
                    ComponentCodec {
                        cut: CutLocus::CircleAngle { angle: cut_angle },
                        half_width,
                        target: Self::slot_target(latent_dim, i, 1),
                    }
                }
                ComponentKind::Sphere2 { center, radius } => {
                    let dirs: Vec<Vec3> = protected_params[i]
                        .iter()
                        .map(|p| (comp.chart_to_ambient(p) - center) / *radius)
                        .collect();
                    let (direction, clearance) = farthest_direction(&dirs);
                    // Cap area of the bad set is 2*pi*r^2*(1 - cos w).
                    let cos_from_budget = 1.0 - budget / (TAU * radius * radius);
                    let from_budget = cos_from_budget.clamp(-1.0, 1.0).acos();
                    let half_width = from_budget.min(0.5 * clearance).min(0.5 * PI);
                    if !(half_width > 0.0) {
                        return Err(OracleError::NoRoomForCut { component: i });
                    }
                    ComponentCodec {
                        cut: CutLocus::SphereDirection { direction },
                        half_width,
                        target: Self::slot_target(latent_dim, i, 2),
                    }
                }
                ComponentKind::Point { .. } => ComponentCodec {
                    cut: CutLocus::None,
                    half_width: 0.0,
                    target: Self::slot_target(latent_dim, i, 0),
                },
            };
            codecs.push(codec);
        }
        let oracle = OracleAutoencoder {
            spec: spec.clone(),
            latent_dim,
            delta,
            reach: spec.analytic_reach().reach,
            protected: protected.to_vec(),
            codecs,
        };
        debug_assert!(oracle.bad_set_measure() < delta);
        Ok(oracle)
    }

    fn slot_target(latent_dim: usize, index: usize, component_dim: usize) -> Target {
        let i = index as f64;
        if latent_dim == 1 {
            match component_dim {
                0 => Target::Point { at: vec![2.0 * i + 0.5] },
                _ => Target::Interval {
                    start: 2.0 * i,
                    length: 1.0,
                },
            }
        } else {
            let center = [3.0 * i, 0.0];
            match component_dim {
                0 => Target::Point {
                    at: vec![center[0], center[1]],
                },
                1 => Target::Segment {
                    center,
                    half_length: 0.5,
                },
                _ => Target::Disk { center, radius: 1.0 },
            }
        }
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// Exact measure of the bad set, from the stored cut widths. Strictly
    /// below `delta` by construction.
    pub fn bad_set_measure(&self) -> f64 {
        self.spec
            .components()
            .iter()
            .zip(&self.codecs)
            .map(|(comp, codec)| match comp {
                ComponentKind::Circle { radius, .. } => 2.0 * codec.half_width * radius,
                ComponentKind::Sphere2 { radius, .. } => {
                    TAU * radius * radius * (1.0 - codec.half_width.cos())
                }
                ComponentKind::Point { .. } => 0.0,
            })
            .sum()
    }

    /// Encodes a point of the closed reach-tube around the manifold.
    pub fn encode(&self, x: Vec3) -> Result<Vec<f64>, OracleError> {
        let proj = self.spec.nearest_point(x, DEFAULT_TIE_TOL);
        if proj.distance > self.reach + TUBE_EDGE_TOL {
            return Err(OracleError::OutsideTube {
                distance: proj.distance,
                reach: self.reach,
            });
        }
        let Some(component) = proj.component_id else {
            return Err(OracleError::AmbiguousProjection {
                distance: proj.distance,
            });
        };
        if !proj.unique {
            return Err(OracleError::AmbiguousProjection {
                distance: proj.distance,
            });
        }
        let chart = self.spec.components()[component].ambient_to_chart(proj.nearest);
        Ok(self.encode_chart(component, &chart))
    }

    /// Relative position in `[0, 1]` along a cut circle: the good arc maps
    /// proportionally, the bad arc blends linearly so that the cut itself
    /// lands at 1/2 and the map is continuous at the bad-arc edges.
    fn circle_unit_coord(codec: &ComponentCodec, theta: f64) -> f64 {
        let CutLocus::CircleAngle { angle } = codec.cut else {
            unreachable!("circle codecs carry circle cuts");
        };
        let w = codec.half_width;
        let psi = crate::geometry::wrap_angle(theta - angle);
        if psi >= w && psi <= TAU - w {
            psi / TAU
        } else {
            let signed = if psi <= PI { psi } else { psi - TAU };
            0.5 + (w / TAU - 0.5) * (signed / w)
        }
    }

    fn encode_chart(&self, component: usize, chart: &[f64]) -> Vec<f64> {
        let comp = &self.spec.components()[component];
        let codec = &self.codecs[component];
        match comp {
            ComponentKind::Circle { .. } => {
                let u = Self::circle_unit_coord(codec, chart[0]);
                match &codec.target {
                    Target::Interval { start, length } => vec![start + u * length],
                    Target::Segment {
                        center,
                        half_length,
                    } => vec![center[0] + (u - 0.5) * 2.0 * half_length, center[1]],
                    _ => unreachable!("circle components use interval or segment targets"),
                }
            }
            ComponentKind::Sphere2 { center, radius } => {
                let (Target::Disk { center: tc, radius: tr }, CutLocus::SphereDirection { direction }) =
                    (&codec.target, &codec.cut)
                else {
                    unreachable!("sphere components use disk targets and sphere cuts");
                };
                let v = (comp.chart_to_ambient(chart) - center) / *radius;
                let anchor = -direction; // antipode of the cut
                let gamma = geodesic_angle(v, anchor);
                let w = codec.half_width;
                // Radial profile: proportional on the good cap, linearly
                // blended to zero across the bad cap so the cut maps to the
                // disk center (making the encoder continuous at the cut).
                let rho = if gamma <= PI - w {
                    gamma / PI
                } else {
                    ((PI - w) / PI) * ((PI - gamma) / w)
                };
                let planar = v - anchor * v.dot(&anchor);
                let e = if planar.norm() < 1e-15 {
                    crate::geometry::orthonormal_frame(anchor).0
                } else {
                    planar.normalize()
                };
                let (f1, f2) = crate::geometry::orthonormal_frame(anchor);
                vec![
                    tc[0] + tr * rho * e.dot(&f1),
                    tc[1] + tr * rho * e.dot(&f2),
                ]
            }
            ComponentKind::Point { .. } => match &codec.target {
                Target::Point { at } => at.clone(),
                _ => unreachable!("point components use point targets"),
            },
        }
    }

    /// Decodes any latent point. Total on R^k: inside a target the chart is
    /// inverted exactly; between interval targets (`k = 1`) the decoder
    /// interpolates linearly in ambient space; elsewhere it clamps to the
    /// nearest target.
    pub fn decode(&self, u: &[f64]) -> Vec3 {
        assert_eq!(
            u.len(),
            self.latent_dim,
            "latent point has dimension {}, expected {}",
            u.len(),
            self.latent_dim
        );
        if self.latent_dim == 1 {
            self.decode_line(u[0])
        } else {
            self.decode_plane(Vector2::new(u[0], u[1]))
        }
    }

    /// Image of the 1-d target coordinate `t` under the local chart inverse.
    fn decode_local_1d(&self, component: usize, t: f64) -> Vec3 {
        let comp = &self.spec.components()[component];
        let codec = &self.codecs[component];
        match (&codec.target, &codec.cut) {
            (Target::Interval { start, length }, CutLocus::CircleAngle { angle }) => {
                let u_rel = ((t - start) / length).clamp(0.0, 1.0);
                comp.chart_to_ambient(&[angle + u_rel * TAU])
            }
            (Target::Point { .. }, _) => comp.chart_to_ambient(&[]),
            _ => unreachable!("1-d decoding applies to interval and point targets"),
        }
    }

    fn decode_line(&self, u: f64) -> Vec3 {
        // Slots are laid out in component order with disjoint spans.
        let span = |codec: &ComponentCodec| -> (f64, f64) {
            match &codec.target {
                Target::Interval { start, length } => (*start, start + length),
                Target::Point { at } => (at[0], at[0]),
                _ => unreachable!("k = 1 uses interval and point targets"),
            }
        };
        let first = span(&self.codecs[0]);
        if u <= first.0 {
            return self.decode_local_1d(0, first.0);
        }
        for i in 0..self.codecs.len() {
            let (start, end) = span(&self.codecs[i]);
            if u <= end {
                if u >= start {
                    return self.decode_local_1d(i, u);
                }
                // In the gap between slot i-1 and slot i: interpolate the
                // endpoint images in ambient space.
                let (_, prev_end) = span(&self.codecs[i - 1]);
                let left = self.decode_local_1d(i - 1, prev_end);
                let right = self.decode_local_1d(i, start);
                let t = (u - prev_end) / (start - prev_end);
                return left + (right - left) * t;
            }
        }
        let last = self.codecs.len() - 1;
        let (_, end) = span(&self.codecs[last]);
        self.decode_local_1d(last, end)
    }

    fn decode_plane(&self, u: Vector2<f64>) -> Vec3 {
        // Nearest target wins (lowest index on ties), then the latent point
        // is clamped onto that target and the local chart is inverted.
        let mut best = (0usize, f64::INFINITY);
        for (i, codec) in self.codecs.iter().enumerate() {
            let d = match &codec.target {
                Target::Disk { center, radius } => {
                    ((u - Vector2::new(center[0], center[1])).norm() - radius).max(0.0)
                }
                Target::Segment {
                    center,
                    half_length,
                } => {
                    let dx = ((u.x - center[0]).abs() - half_length).max(0.0);
                    let dy = u.y - center[1];
                    dx.hypot(dy)
                }
                Target::Point { at } => (u - Vector2::new(at[0], at[1])).norm(),
                Target::Interval { .. } => unreachable!("k = 2 never uses interval targets"),
            };
            if d < best.1 {
                best = (i, d);
            }
        }
        let component = best.0;
        let comp = &self.spec.components()[component];
        let codec = &self.codecs[component];
        match (&codec.target, &codec.cut) {
            (Target::Disk { center, radius }, CutLocus::SphereDirection { direction }) => {
                let (sphere_center, sphere_radius) = match comp {
                    ComponentKind::Sphere2 { center, radius } => (*center, *radius),
                    _ => unreachable!("disk targets belong to spheres"),
                };
                let d = u - Vector2::new(center[0], center[1]);
                let rho = (d.norm() / radius).min(1.0);
                let gamma = rho * PI;
                let anchor = -direction;
                let (f1, f2) = crate::geometry::orthonormal_frame(anchor);
                let e = if d.norm() < 1e-15 {
                    f1
                } else {
                    let dn = d / d.norm();
                    f1 * dn.x + f2 * dn.y
                };
                let v = anchor * gamma.cos() + e * gamma.sin();
                sphere_center + v * sphere_radius
            }
            (
                Target::Segment {
                    center,
                    half_length,
                },
                CutLocus::CircleAngle { angle },
            ) => {
                let x = u.x.clamp(center[0] - half_length, center[0] + half_length);
                let u_rel = (x - (center[0] - half_length)) / (2.0 * half_length);
                comp.chart_to_ambient(&[angle + u_rel * TAU])
            }
            (Target::Point { .. }, _) => comp.chart_to_ambient(&[]),
            _ => unreachable!("k = 2 uses disk, segment, and point targets"),
        }
    }

    /// Whether an on-manifold point lies in the closed bad set.
    pub fn bad_set_contains(&self, x: Vec3) -> Result<bool, OracleError> {
        // Membership only needs the owning component, so resolve exact ties
        // deterministically (lowest index) rather than erroring.
        let mut best = (0usize, f64::INFINITY, Vec3::zeros());
        for (i, comp) in self.spec.components().iter().enumerate() {
            let p = comp.nearest(x);
            if p.distance < best.1 {
                best = (i, p.distance, p.nearest);
            }
        }
        let (component, distance, nearest) = best;
        if distance > ON_MANIFOLD_TOL {
            return Err(OracleError::NotOnManifold { distance });
        }
        let comp = &self.spec.components()[component];
        let codec = &self.codecs[component];
        Ok(match (&codec.cut, comp) {
            (CutLocus::CircleAngle { angle }, ComponentKind::Circle { .. }) => {
                let theta = comp.ambient_to_chart(nearest)[0];
                crate::geometry::circular_distance(theta, *angle) <= codec.half_width
            }
            (CutLocus::SphereDirection { direction }, ComponentKind::Sphere2 { center, radius }) => {
                let v = (nearest - center) / *radius;
                geodesic_angle(v, *direction) <= codec.half_width
            }
            (CutLocus::None, ComponentKind::Point { .. }) => false,
            _ => unreachable!("codec kind always matches component kind"),
        })
    }

    /// Samples the manifold, measures round-trip errors on and off the bad
    /// set, and sweeps a dense grid of the bad set itself (where the error is
    /// allowed to spike).
    pub fn verify(&self, n_samples: usize, seed: u64) -> Result<OracleReport, OracleError> {
        let samples = self.spec.sample_uniform(n_samples, seed)?;
        let mut bad_set_hits = 0usize;
        let mut max_off = 0.0f64;
        let mut max_on = 0.0f64;
        for p in &samples.points {
            let u = self.encode(p.position)?;
            let err = (self.decode(&u) - p.position).norm();
            if self.bad_set_contains(p.position)? {
                bad_set_hits += 1;
                max_on = max_on.max(err);
            } else {
                max_off = max_off.max(err);
            }
        }
        for (comp, codec) in self.spec.components().iter().zip(&self.codecs) {
            max_on = max_on.max(self.bad_set_grid_max_error(comp, codec));
        }
        let mut protected_hits = 0usize;
        for s in &self.protected {
            if self.bad_set_contains(*s)? {
                protected_hits += 1;
            }
        }
        let mu_hat = if n_samples == 0 {
            0.0
        } else {
            (bad_set_hits as f64 / n_samples as f64) * self.spec.total_measure()
        };
        Ok(OracleReport {
            n_samples,
            latent_dim: self.latent_dim,
            delta: self.delta,
            bad_set_measure: self.bad_set_measure(),
            mu_hat,
            bad_set_hits,
            max_error_off_bad_set: max_off,
            max_error_on_bad_set: max_on,
            max_error_overall: max_off.max(max_on),
            protected_hits,
            reach: self.reach,
        })
    }

    /// Max round-trip error over a dense grid of one component's bad set.
    fn bad_set_grid_max_error(&self, comp: &ComponentKind, codec: &ComponentCodec) -> f64 {
        let mut worst = 0.0f64;
        let mut probe = |x: Vec3| {
            let u = self
                .encode(x)
                .expect("bad-set grid points lie on the manifold");
            worst = worst.max((self.decode(&u) - x).norm());
        };
        match (&codec.cut, comp) {
            (CutLocus::CircleAngle { angle }, ComponentKind::Circle { .. }) => {
                let steps = 2000;
                for t in 0..=steps {
                    let s = -codec.half_width
                        + (2.0 * codec.half_width) * (t as f64 / steps as f64);
                    probe(comp.chart_to_ambient(&[angle + s]));
                }
            }
            (CutLocus::SphereDirection { direction }, ComponentKind::Sphere2 { center, radius }) => {
                let (f1, f2) = crate::geometry::orthonormal_frame(*direction);
                for rad in 0..=63 {
                    let gamma = codec.half_width * (rad as f64 / 63.0);
                    for az in 0..128 {
                        let phi = TAU * (az as f64 / 128.0);
                        let v = *direction * gamma.cos()
                            + (f1 * phi.cos() + f2 * phi.sin()) * gamma.sin();
                        probe(center + v * *radius);
                    }
                }
            }
            (CutLocus::None, ComponentKind::Point { .. }) => {}
            _ => unreachable!("codec kind always matches component kind"),
        }
        worst
    }

    /// Serializes to JSON with lossless float formatting.
    pub fn to_json(&self) -> String {
        crate::jsonfmt::to_json_string(self).expect("oracle serialization cannot fail")
    }

    /// Reloads an oracle. The embedded manifold is revalidated on load.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linked_unit_circles;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_circle_spec() -> ManifoldSpec {
        ManifoldSpec::new(vec![ComponentKind::Circle {
            center: Vec3::zeros(),
            normal: Vec3::z(),
            radius: 1.0,
        }])
        .unwrap()
    }

    fn unit_sphere_spec() -> ManifoldSpec {
        ManifoldSpec::new(vec![ComponentKind::Sphere2 {
            center: Vec3::zeros(),
            radius: 1.0,
        }])
        .unwrap()
    }

    #[test]
    fn rejects_bad_delta() {
        let spec = unit_circle_spec();
        for delta in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                OracleAutoencoder::build(&spec, delta, &[]),
                Err(OracleError::InvalidDelta(_))
            ));
        }
    }

    #[test]
    fn rejects_off_manifold_protected_points() {
        let spec = unit_circle_spec();
        let err = OracleAutoencoder::build(&spec, 0.1, &[Vec3::new(0.0, 0.0, 0.5)]).unwrap_err();
        assert!(matches!(
            err,
            OracleError::ProtectedPointOffManifold { index: 0, .. }
        ));
    }

    #[test]
    fn protected_point_moves_the_cut_to_the_antipode() {
        // On the linked circles with S = {(1,0,0)} (which lies on circle A),
        // the largest gap is the whole circle minus that point, so the cut
        // sits at the antipodal angle pi.
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        match &oracle.codecs[0].cut {
            CutLocus::CircleAngle { angle } => assert_relative_eq!(*angle, PI, epsilon = 1e-12),
            other => panic!("unexpected cut {other:?}"),
        }
        // The protected point encodes to the midpoint of its unit interval.
        let u = oracle.encode(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(u.len(), 1);
        assert_relative_eq!(u[0], 0.5, epsilon = 1e-12);
        assert!(!oracle.bad_set_contains(Vec3::new(1.0, 0.0, 0.0)).unwrap());
    }

    #[test]
    fn encode_works_on_the_closed_tube_boundary() {
        // reach(unit circle) = 1, and (2,0,0) sits exactly at distance 1.
        let oracle = OracleAutoencoder::build(&unit_circle_spec(), 0.1, &[]).unwrap();
        let u = oracle.encode(Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(u[0], 0.5, epsilon = 1e-12);
        // Decoding sends the tube point to its projection (1,0,0).
        let x = oracle.decode(&u);
        assert!((x - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn encode_rejects_points_outside_the_tube() {
        let oracle = OracleAutoencoder::build(&unit_circle_spec(), 0.1, &[]).unwrap();
        let err = oracle.encode(Vec3::new(2.1, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, OracleError::OutsideTube { .. }));
        assert!(err.to_string().contains("outside encoder domain"));
    }

    #[test]
    fn encode_rejects_ambiguous_projections() {
        // The circle center is at distance exactly reach but projects to the
        // whole circle.
        let oracle = OracleAutoencoder::build(&unit_circle_spec(), 0.1, &[]).unwrap();
        let err = oracle.encode(Vec3::zeros()).unwrap_err();
        assert!(matches!(err, OracleError::AmbiguousProjection { .. }));
        assert!(err.to_string().contains("outside encoder domain"));

        // Midpoint between the linked circles: distance 1/2 to both.
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[]).unwrap();
        let err = oracle.encode(Vec3::new(1.0, 0.0, 0.5)).unwrap_err();
        assert!(matches!(err, OracleError::AmbiguousProjection { .. }));
    }

    #[test]
    fn round_trip_is_exact_off_the_bad_set_on_circles() {
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[]).unwrap();
        let samples = spec.sample_uniform(5000, 17).unwrap();
        for p in &samples.points {
            if oracle.bad_set_contains(p.position).unwrap() {
                continue;
            }
            let u = oracle.encode(p.position).unwrap();
            let err = (oracle.decode(&u) - p.position).norm();
            assert!(err <= 1e-9, "error {err} at {:?}", p.position);
        }
    }

    #[test]
    fn round_trip_is_exact_off_the_bad_set_on_a_sphere() {
        let spec = unit_sphere_spec();
        let oracle = OracleAutoencoder::build(&spec, 0.2, &[]).unwrap();
        assert_eq!(oracle.latent_dim(), 2);
        let samples = spec.sample_uniform(5000, 23).unwrap();
        for p in &samples.points {
            if oracle.bad_set_contains(p.position).unwrap() {
                continue;
            }
            let u = oracle.encode(p.position).unwrap();
            let err = (oracle.decode(&u) - p.position).norm();
            assert!(err <= 1e-9, "error {err} at {:?}", p.position);
        }
    }

    #[test]
    fn tube_points_decode_to_their_projections() {
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = spec.sample_uniform(500, 31).unwrap();
        for p in &samples.points {
            if oracle.bad_set_contains(p.position).unwrap() {
                continue;
            }
            // Push off the manifold by less than the reach along a random
            // direction orthogonal to the tangent.
            let comp = &spec.components()[p.component_id];
            let tangent = comp.tangent_basis(&p.params)[0];
            let raw = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let normal_dir = (raw - tangent * raw.dot(&tangent)).normalize();
            let x = p.position + normal_dir * 0.3;
            let proj = spec.nearest_point(x, DEFAULT_TIE_TOL);
            if !proj.unique || (proj.nearest - p.position).norm() > 1e-9 {
                continue; // pushed into another component's basin or along curvature
            }
            let u = oracle.encode(x).unwrap();
            let err = (oracle.decode(&u) - p.position).norm();
            assert!(err <= 1e-9, "tube error {err}");
        }
    }

    #[test]
    fn cut_points_reconstruct_to_the_antipode() {
        // F is continuous, so the cut must collide with the far end of the
        // chart: the round-trip error at the cut is the full diameter 2r.
        let oracle = OracleAutoencoder::build(&unit_circle_spec(), 0.1, &[]).unwrap();
        let cut_angle = match &oracle.codecs[0].cut {
            CutLocus::CircleAngle { angle } => *angle,
            other => panic!("unexpected cut {other:?}"),
        };
        let cut_point = oracle.spec.components()[0].chart_to_ambient(&[cut_angle]);
        assert!(oracle.bad_set_contains(cut_point).unwrap());
        let u = oracle.encode(cut_point).unwrap();
        let err = (oracle.decode(&u) - cut_point).norm();
        assert_relative_eq!(err, 2.0, epsilon = 1e-9);

        let sphere = OracleAutoencoder::build(&unit_sphere_spec(), 0.2, &[]).unwrap();
        let dir = match &sphere.codecs[0].cut {
            CutLocus::SphereDirection { direction } => *direction,
            other => panic!("unexpected cut {other:?}"),
        };
        let cut_point = dir; // unit sphere at the origin
        let u = sphere.encode(cut_point).unwrap();
        let err = (sphere.decode(&u) - cut_point).norm();
        assert_relative_eq!(err, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn encoder_is_continuous_across_the_bad_arc() {
        let oracle = OracleAutoencoder::build(&unit_circle_spec(), 0.01, &[]).unwrap();
        let (cut_angle, w) = match &oracle.codecs[0] {
            ComponentCodec {
                cut: CutLocus::CircleAngle { angle },
                half_width,
                ..
            } => (*angle, *half_width),
            other => panic!("unexpected codec {other:?}"),
        };
        let comp = &oracle.spec.components()[0];
        // March across the bad-arc edge and the cut; consecutive latent
        // values must move by O(step).
        let mut prev: Option<f64> = None;
        for k in -400..=400 {
            let theta = cut_angle + 2.0 * w * (k as f64 / 400.0);
            let u = oracle.encode(comp.chart_to_ambient(&[theta])).unwrap()[0];
            if let Some(p) = prev {
                assert!(
                    (u - p).abs() < 0.02,
                    "latent jump {} near theta {theta}",
                    (u - p).abs()
                );
            }
            prev = Some(u);
        }
    }

    #[test]
    fn decoder_is_continuous_across_gaps_and_beyond_the_ends() {
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[]).unwrap();
        // Slot 0 is [0,1], slot 1 is [2,3]; walk the whole latent line.
        let mut prev: Option<Vec3> = None;
        let mut u = -0.5;
        while u <= 3.5 {
            let x = oracle.decode(&[u]);
            if let Some(p) = prev {
                assert!(
                    (x - p).norm() < 0.05,
                    "ambient jump {} at u {u}",
                    (x - p).norm()
                );
            }
            prev = Some(x);
            u += 1e-3;
        }
        // Beyond the ends the decoder is constant at the endpoint images.
        assert_eq!(oracle.decode(&[-0.5]), oracle.decode(&[-5.0]));
        assert_eq!(oracle.decode(&[3.5]), oracle.decode(&[30.0]));
    }

    #[test]
    fn mixed_union_with_point_component_round_trips() {
        let spec = ManifoldSpec::new(vec![
            ComponentKind::Circle {
                center: Vec3::zeros(),
                normal: Vec3::z(),
                radius: 1.0,
            },
            ComponentKind::Point {
                location: Vec3::new(0.0, 0.0, 4.0),
            },
        ])
        .unwrap();
        let oracle = OracleAutoencoder::build(&spec, 0.1, &[]).unwrap();
        assert_eq!(oracle.latent_dim(), 1);
        let loc = Vec3::new(0.0, 0.0, 4.0);
        let u = oracle.encode(loc).unwrap();
        assert_eq!(u, vec![2.5]);
        assert_eq!(oracle.decode(&u), loc);
        assert!(!oracle.bad_set_contains(loc).unwrap());
        // The point component's bad set is empty, so its measure comes only
        // from the circle.
        assert!(oracle.bad_set_measure() <= 0.1 / 4.0 + 1e-15);
    }

    #[test]
    fn sphere_and_circle_union_uses_the_plane() {
        let spec = ManifoldSpec::new(vec![
            ComponentKind::Sphere2 {
                center: Vec3::zeros(),
                radius: 1.0,
            },
            ComponentKind::Circle {
                center: Vec3::new(5.0, 0.0, 0.0),
                normal: Vec3::z(),
                radius: 1.0,
            },
        ])
        .unwrap();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[]).unwrap();
        assert_eq!(oracle.latent_dim(), 2);
        let samples = spec.sample_uniform(3000, 41).unwrap();
        for p in &samples.points {
            if oracle.bad_set_contains(p.position).unwrap() {
                continue;
            }
            let u = oracle.encode(p.position).unwrap();
            assert_eq!(u.len(), 2);
            let err = (oracle.decode(&u) - p.position).norm();
            assert!(err <= 1e-9, "error {err} on component {}", p.component_id);
        }
        // Latent images live in disjoint regions: disk around (0,0),
        // segment around (3,0).
        let on_sphere = oracle.encode(Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!(on_sphere[0].hypot(on_sphere[1]) <= 1.0 + 1e-12);
        let on_circle = oracle.encode(Vec3::new(5.0, 1.0, 0.0)).unwrap();
        assert!((on_circle[0] - 3.0).abs() <= 0.5 + 1e-12);
        assert_relative_eq!(on_circle[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn huge_delta_is_capped_below_the_component_measure() {
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 1e6, &[]).unwrap();
        for codec in &oracle.codecs {
            assert!(codec.half_width <= 0.5 * PI + 1e-15);
        }
        let measure = oracle.bad_set_measure();
        assert!(measure < spec.total_measure());
        assert!(measure < 1e6);
        // Still a working oracle off the (now large) bad set.
        let report = oracle.verify(2000, 5).unwrap();
        assert!(report.max_error_off_bad_set <= 1e-9);
    }

    #[test]
    fn bad_set_measure_stays_under_delta() {
        let spec = linked_unit_circles();
        for delta in [1e-6, 1e-3, 0.05, 1.0, 100.0] {
            let oracle = OracleAutoencoder::build(&spec, delta, &[]).unwrap();
            let m = oracle.bad_set_measure();
            assert!(m < delta, "measure {m} >= delta {delta}");
            assert!(m > 0.0);
        }
    }

    #[test]
    fn protected_points_never_fall_in_the_bad_set() {
        let spec = linked_unit_circles();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let s: Vec<Vec3> = (0..10)
                .map(|_| {
                    let pts = spec.sample_uniform(1, rng.random::<u64>()).unwrap();
                    pts.points[0].position
                })
                .collect();
            let oracle = OracleAutoencoder::build(&spec, 0.05, &s).unwrap();
            for (i, p) in s.iter().enumerate() {
                assert!(
                    !oracle.bad_set_contains(*p).unwrap(),
                    "protected point {i} fell in the bad set"
                );
                // And the round trip is exact there.
                let u = oracle.encode(*p).unwrap();
                assert!((oracle.decode(&u) - p).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn verify_reports_clean_pac_behavior() {
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        let report = oracle.verify(20000, 7).unwrap();
        assert_eq!(report.n_samples, 20000);
        assert!(report.max_error_off_bad_set <= 1e-9);
        assert!(report.bad_set_measure < 0.05);
        assert!(report.mu_hat < 0.05, "empirical measure {}", report.mu_hat);
        assert_eq!(report.protected_hits, 0);
        // The bad-set sweep must surface the cut spike (error about 2r).
        assert!(report.max_error_on_bad_set > 1.9);
        assert!(report.max_error_overall >= report.max_error_on_bad_set);
        assert_relative_eq!(report.reach, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn bad_set_queries_require_on_manifold_points() {
        let oracle = OracleAutoencoder::build(&unit_circle_spec(), 0.1, &[]).unwrap();
        let err = oracle.bad_set_contains(Vec3::new(1.1, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, OracleError::NotOnManifold { .. }));
    }

    #[test]
    fn json_round_trip_is_byte_stable_and_behavior_preserving() {
        let spec = linked_unit_circles();
        let oracle = OracleAutoencoder::build(&spec, 0.05, &[Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        let json = oracle.to_json();
        let reloaded = OracleAutoencoder::from_json(&json).unwrap();
        assert_eq!(oracle, reloaded);
        assert_eq!(json, reloaded.to_json());
        let samples = spec.sample_uniform(200, 2).unwrap();
        for p in &samples.points {
            let a = oracle.encode(p.position).unwrap();
            let b = reloaded.encode(p.position).unwrap();
            assert_eq!(a, b);
            assert_eq!(oracle.decode(&a), reloaded.decode(&b));
        }
    }

    #[test]
    fn sphere_cut_avoids_protected_points() {
        let spec = unit_sphere_spec();
        let protected: Vec<Vec3> = vec![
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let oracle = OracleAutoencoder::build(&spec, 0.5, &protected).unwrap();
        for p in &protected {
            assert!(!oracle.bad_set_contains(*p).unwrap());
            let u = oracle.encode(*p).unwrap();
            assert!((oracle.decode(&u) - p).norm() <= 1e-9);
        }
    }
}
