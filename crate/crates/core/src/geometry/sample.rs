//! Uniform sampling from manifold unions.
//!
//! All randomness flows through a `ChaCha8Rng` seeded explicitly, so any
//! (spec, n, seed) triple reproduces the same point set bit for bit.

use super::{ComponentKind, GeometryError, ManifoldSpec, PointSet, SamplePoint, TAU};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn draw_on_component(comp: &ComponentKind, component_id: usize, rng: &mut ChaCha8Rng) -> SamplePoint {
    let params = match comp {
        ComponentKind::Circle { .. } => vec![rng.random::<f64>() * TAU],
        ComponentKind::Sphere2 { .. } => {
            // Uniform on the sphere: cos(theta) uniform in [-1, 1], phi
            // uniform in [0, 2*pi).
            let z = 1.0 - 2.0 * rng.random::<f64>();
            let phi = rng.random::<f64>() * TAU;
            vec![z.clamp(-1.0, 1.0).acos(), phi]
        }
        ComponentKind::Point { .. } => Vec::new(),
    };
    SamplePoint {
        component_id,
        position: comp.chart_to_ambient(&params),
        params,
    }
}

pub(super) fn sample_uniform(
    spec: &ManifoldSpec,
    n: usize,
    seed: u64,
) -> Result<PointSet, GeometryError> {
    if n == 0 {
        return Ok(PointSet::default());
    }
    let total = spec.total_measure();
    if total <= 0.0 {
        return Err(GeometryError::MeasureZeroSampling { measure: total });
    }
    let mut cumulative = Vec::with_capacity(spec.components().len());
    let mut acc = 0.0;
    for c in spec.components() {
        acc += c.measure();
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let ticket = rng.random::<f64>() * total;
        let idx = cumulative
            .iter()
            .position(|&edge| ticket < edge)
            .unwrap_or(spec.components().len() - 1);
        points.push(draw_on_component(&spec.components()[idx], idx, &mut rng));
    }
    Ok(PointSet::new(points))
}

pub(super) fn sample_per_component(
    spec: &ManifoldSpec,
    n_per_component: usize,
    seed: u64,
) -> Result<PointSet, GeometryError> {
    if n_per_component == 0 {
        return Ok(PointSet::default());
    }
    if let Some(index) = spec.components().iter().position(|c| c.measure() <= 0.0) {
        return Err(GeometryError::MeasureZeroComponent { index });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_per_component * spec.components().len());
    for (idx, comp) in spec.components().iter().enumerate() {
        for _ in 0..n_per_component {
            points.push(draw_on_component(comp, idx, &mut rng));
        }
    }
    Ok(PointSet::new(points))
}

#[cfg(test)]
mod tests {
    use super::super::{linked_unit_circles, ComponentKind, ManifoldSpec, Vec3};
    use super::*;
    use std::f64::consts::PI;

    /// 99.9% critical value of the chi-squared distribution with 19 degrees
    /// of freedom, for 20-bin uniformity tests.
    const CHI2_999_19DF: f64 = 43.82019596451753;

    fn chi_squared_20_bins(values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> f64 {
        let mut counts = [0usize; 20];
        let mut n = 0usize;
        for v in values {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0 - 1e-15);
            counts[(t * 20.0) as usize] += 1;
            n += 1;
        }
        let expected = n as f64 / 20.0;
        counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = linked_unit_circles();
        let a = spec.sample_uniform(200, 42).unwrap();
        let b = spec.sample_uniform(200, 42).unwrap();
        assert_eq!(a, b);
        let c = spec.sample_uniform(200, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn samples_lie_on_their_components() {
        let spec = ManifoldSpec::new(vec![
            ComponentKind::Circle {
                center: Vec3::new(0.0, 0.0, 2.0),
                normal: Vec3::new(1.0, 1.0, 0.0).normalize(),
                radius: 0.75,
            },
            ComponentKind::Sphere2 {
                center: Vec3::new(10.0, 0.0, 0.0),
                radius: 1.5,
            },
        ])
        .unwrap();
        let pts = spec.sample_uniform(2000, 9).unwrap();
        for p in &pts.points {
            let comp = &spec.components()[p.component_id];
            // Chart parameters must reproduce the stored position exactly.
            let rebuilt = comp.chart_to_ambient(&p.params);
            assert!((rebuilt - p.position).norm() < 1e-15);
            assert!(comp.nearest(p.position).distance < 1e-12);
        }
    }

    #[test]
    fn uniform_sampling_weights_components_by_measure() {
        // Circle of radius 2 has twice the measure of radius 1: expect a
        // 2:1 split. With n = 30000, p = 2/3: sigma = sqrt(n*p*(1-p)) ~ 81.6,
        // so a 5-sigma band is +/- 409 around 20000.
        let spec = ManifoldSpec::new(vec![
            ComponentKind::Circle {
                center: Vec3::zeros(),
                normal: Vec3::z(),
                radius: 2.0,
            },
            ComponentKind::Circle {
                center: Vec3::new(0.0, 0.0, 5.0),
                normal: Vec3::z(),
                radius: 1.0,
            },
        ])
        .unwrap();
        let pts = spec.sample_uniform(30000, 1234).unwrap();
        let big = pts.points.iter().filter(|p| p.component_id == 0).count();
        assert!(
            (19591..=20409).contains(&big),
            "component split {big}/30000 is outside the 5-sigma band"
        );
    }

    #[test]
    fn point_components_carry_no_mass() {
        let spec = ManifoldSpec::new(vec![
            ComponentKind::Circle {
                center: Vec3::zeros(),
                normal: Vec3::z(),
                radius: 1.0,
            },
            ComponentKind::Point {
                location: Vec3::new(0.0, 0.0, 9.0),
            },
        ])
        .unwrap();
        let pts = spec.sample_uniform(5000, 7).unwrap();
        assert!(pts.points.iter().all(|p| p.component_id == 0));
    }

    #[test]
    fn circle_angles_pass_chi_squared_uniformity() {
        let spec = ManifoldSpec::new(vec![ComponentKind::Circle {
            center: Vec3::zeros(),
            normal: Vec3::z(),
            radius: 1.0,
        }])
        .unwrap();
        let pts = spec.sample_uniform(100_000, 8).unwrap();
        let stat = chi_squared_20_bins(pts.points.iter().map(|p| p.params[0]), 0.0, TAU);
        assert!(
            stat < CHI2_999_19DF,
            "chi-squared statistic {stat} exceeds the 99.9% critical value"
        );
    }

    #[test]
    fn sphere_sampling_is_area_uniform() {
        let spec = ManifoldSpec::new(vec![ComponentKind::Sphere2 {
            center: Vec3::zeros(),
            radius: 1.0,
        }])
        .unwrap();
        let pts = spec.sample_uniform(100_000, 21).unwrap();
        // Area-uniformity on the sphere means cos(theta) = z is uniform on
        // [-1, 1] and phi is uniform on [0, 2*pi).
        let z_stat = chi_squared_20_bins(pts.points.iter().map(|p| p.position.z), -1.0, 1.0);
        assert!(z_stat < CHI2_999_19DF, "z statistic {z_stat}");
        let phi_stat = chi_squared_20_bins(pts.points.iter().map(|p| p.params[1]), 0.0, TAU);
        assert!(phi_stat < CHI2_999_19DF, "phi statistic {phi_stat}");
        for p in &pts.points {
            assert!((0.0..=PI).contains(&p.params[0]));
        }
    }

    #[test]
    fn per_component_sampling_gives_exact_counts() {
        let spec = linked_unit_circles();
        let pts = spec.sample_per_component(500, 3).unwrap();
        assert_eq!(pts.len(), 1000);
        assert_eq!(
            pts.points.iter().filter(|p| p.component_id == 0).count(),
            500
        );
        assert_eq!(
            pts.points.iter().filter(|p| p.component_id == 1).count(),
            500
        );
        // First block is component 0, second block component 1.
        assert!(pts.points[..500].iter().all(|p| p.component_id == 0));
    }

    #[test]
    fn measure_zero_manifold_cannot_be_sampled() {
        let spec = ManifoldSpec::new(vec![ComponentKind::Point {
            location: Vec3::zeros(),
        }])
        .unwrap();
        let err = spec.sample_uniform(10, 0).unwrap_err();
        assert!(matches!(err, GeometryError::MeasureZeroSampling { .. }));
        assert!(err.to_string().contains("positive total measure"));
        // Zero requested points is fine even on a measure-zero manifold.
        assert!(spec.sample_uniform(0, 0).unwrap().is_empty());

        let mixed = ManifoldSpec::new(vec![
            ComponentKind::Circle {
                center: Vec3::zeros(),
                normal: Vec3::z(),
                radius: 1.0,
            },
            ComponentKind::Point {
                location: Vec3::new(0.0, 0.0, 9.0),
            },
        ])
        .unwrap();
        assert!(matches!(
            mixed.sample_per_component(5, 0),
            Err(GeometryError::MeasureZeroComponent { index: 1 })
        ));
    }
}
