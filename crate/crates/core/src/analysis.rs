//! Reconstruction-error analytics: per-point errors, sup-error estimation
//! over the manifold (grid plus chart refinement), empirical bad-set
//! measure, and verdicts against the reach lower bound for continuous
//! autoencoders.

use crate::geometry::{ComponentKind, ManifoldSpec, PointSet, Vec3};
use crate::neural::Mlp;
use crate::oracle::OracleAutoencoder;
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("the error vector is empty")]
    EmptyErrors,
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("total measure must be finite and nonnegative, got {0}")]
    InvalidMeasure(f64),
    #[error("invalid analysis options: {0}")]
    InvalidOptions(String),
}

/// Anything that maps ambient points through a latent bottleneck and back.
///
/// The trait is infallible so analytics can treat oracle and trained models
/// uniformly; implementations panic when called outside their documented
/// domain (the oracle's closed tube around the manifold, or a latent point
/// of the wrong dimension). Every caller in this crate evaluates on the
/// manifold itself, where both models are total.
pub trait Autoencoder {
    fn latent_dim(&self) -> usize;

    /// The encoder F.
    fn embed(&self, x: &Vec3) -> Vec<f64>;

    /// The decoder G.
    fn reconstruct_latent(&self, z: &[f64]) -> Vec3;

    /// The roundtrip G(F(x)).
    fn reconstruct(&self, x: &Vec3) -> Vec3 {
        self.reconstruct_latent(&self.embed(x))
    }
}

impl Autoencoder for OracleAutoencoder {
    fn latent_dim(&self) -> usize {
        self.latent_dim()
    }

    fn embed(&self, x: &Vec3) -> Vec<f64> {
        self.encode(*x)
            .expect("point lies inside the oracle's tube domain")
    }

    fn reconstruct_latent(&self, z: &[f64]) -> Vec3 {
        self.decode(z)
    }
}

/// A trained encoder/decoder pair viewed as an autoencoder on R^3.
#[derive(Clone, Debug)]
pub struct MlpAutoencoder {
    encoder: Mlp,
    decoder: Mlp,
}

impl MlpAutoencoder {
    /// Pairs an encoder with a decoder, checking that the encoder reads
    /// ambient R^3, the decoder writes ambient R^3, and the bottleneck
    /// widths agree.
    pub fn new(encoder: Mlp, decoder: Mlp) -> Result<Self, AnalysisError> {
        if encoder.input_dim() != 3 {
            return Err(AnalysisError::DimensionMismatch(format!(
                "encoder input dimension {} does not match the ambient dimension 3",
                encoder.input_dim()
            )));
        }
        if decoder.output_dim() != 3 {
            return Err(AnalysisError::DimensionMismatch(format!(
                "decoder output dimension {} does not match the ambient dimension 3",
                decoder.output_dim()
            )));
        }
        if encoder.output_dim() != decoder.input_dim() {
            return Err(AnalysisError::DimensionMismatch(format!(
                "encoder bottleneck {} does not feed decoder input {}",
                encoder.output_dim(),
                decoder.input_dim()
            )));
        }
        Ok(MlpAutoencoder { encoder, decoder })
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn into_parts(self) -> (Mlp, Mlp) {
        (self.encoder, self.decoder)
    }
}

impl Autoencoder for MlpAutoencoder {
    fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    fn embed(&self, x: &Vec3) -> Vec<f64> {
        self.encoder
            .forward_one(&[x.x, x.y, x.z])
            .expect("the encoder input dimension was validated at construction")
    }

    fn reconstruct_latent(&self, z: &[f64]) -> Vec3 {
        let out = self
            .decoder
            .forward_one(z)
            .expect("latent point matches the decoder input dimension");
        Vec3::new(out[0], out[1], out[2])
    }
}

/// Per-point reconstruction errors `||G(F(x)) - x||`, order preserved.
pub fn reconstruction_errors<A: Autoencoder + ?Sized>(model: &A, points: &PointSet) -> Vec<f64> {
    points
        .positions()
        .map(|x| (model.reconstruct(&x) - x).norm())
        .collect()
}

/// One maximizing ternary-search pass over `[lo, hi]`: shrink the bracket by
/// a third per iteration, returning the best value seen (including the
/// endpoints and midpoint, so boundary maxima are never lost).
fn ternary_max(mut lo: f64, mut hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut best = f(lo).max(f(hi)).max(f(0.5 * (lo + hi)));
    for _ in 0..iters {
        let third = (hi - lo) / 3.0;
        let m1 = lo + third;
        let m2 = hi - third;
        let f1 = f(m1);
        let f2 = f(m2);
        best = best.max(f1).max(f2);
        if f1 < f2 {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best
}

/// Estimates `sup_K ||G(F(x)) - x||` by a uniform chart grid per component
/// followed by ternary refinement around the best grid cell. The result is
/// a max over point evaluations, hence a certified lower bound on the true
/// sup, and it never decreases when the grid is refined to a superset.
///
/// # Panics
///
/// Panics if `grid_per_component < 2`.
pub fn sup_error<A: Autoencoder + ?Sized>(
    model: &A,
    spec: &ManifoldSpec,
    grid_per_component: usize,
    refine_iters: usize,
) -> f64 {
    assert!(
        grid_per_component >= 2,
        "sup_error needs at least 2 grid points per component, got {grid_per_component}"
    );
    let mut sup = 0.0f64;
    for comp in spec.components() {
        let comp_sup = match comp {
            ComponentKind::Point { location } => (model.reconstruct(location) - location).norm(),
            ComponentKind::Circle { .. } => {
                let eval = |theta: f64| {
                    let x = comp.chart_to_ambient(&[theta]);
                    (model.reconstruct(&x) - x).norm()
                };
                let n = grid_per_component;
                let step = TAU / n as f64;
                let mut best = (eval(0.0), 0.0);
                for j in 1..n {
                    let theta = step * j as f64;
                    let v = eval(theta);
                    if v > best.0 {
                        best = (v, theta);
                    }
                }
                // The chart is periodic, so the bracket may extend past the
                // seam without clamping.
                best.0
                    .max(ternary_max(best.1 - step, best.1 + step, refine_iters, eval))
            }
            ComponentKind::Sphere2 { .. } => {
                let eval = |theta: f64, phi: f64| {
                    let x = comp.chart_to_ambient(&[theta, phi]);
                    (model.reconstruct(&x) - x).norm()
                };
                let side = ((grid_per_component as f64).sqrt().floor() as usize).max(2);
                let d_theta = PI / side as f64;
                let d_phi = TAU / side as f64;
                let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
                for i in 0..side {
                    // Offset rows off the poles, where the azimuth degenerates.
                    let theta = d_theta * (i as f64 + 0.5);
                    for j in 0..side {
                        let phi = d_phi * j as f64;
                        let v = eval(theta, phi);
                        if v > best.0 {
                            best = (v, theta, phi);
                        }
                    }
                }
                // Alternating per-coordinate ternary refinement. Spherical
                // coordinates cover the sphere for arguments outside their
                // principal ranges too, so the brackets need no clamping.
                let (mut t_lo, mut t_hi) = (best.1 - d_theta, best.1 + d_theta);
                let (mut p_lo, mut p_hi) = (best.2 - d_phi, best.2 + d_phi);
                let mut peak = best.0;
                for _ in 0..refine_iters {
                    let p_mid = 0.5 * (p_lo + p_hi);
                    peak = peak.max(ternary_max(t_lo, t_hi, 1, |t| eval(t, p_mid)));
                    let third = (t_hi - t_lo) / 3.0;
                    let (m1, m2) = (t_lo + third, t_hi - third);
                    if eval(m1, p_mid) < eval(m2, p_mid) {
                        t_lo = m1;
                    } else {
                        t_hi = m2;
                    }
                    let t_mid = 0.5 * (t_lo + t_hi);
                    peak = peak.max(ternary_max(p_lo, p_hi, 1, |p| eval(t_mid, p)));
                    let third = (p_hi - p_lo) / 3.0;
                    let (m1, m2) = (p_lo + third, p_hi - third);
                    if eval(t_mid, m1) < eval(t_mid, m2) {
                        p_lo = m1;
                    } else {
                        p_hi = m2;
                    }
                }
                peak
            }
        };
        sup = sup.max(comp_sup);
    }
    sup
}

/// Empirical bad-set measure: the fraction of `errors` at or above
/// `epsilon`, scaled by the total intrinsic measure of the manifold the
/// samples were drawn from (uniformly by measure).
pub fn bad_set_measure(
    errors: &[f64],
    epsilon: f64,
    total_measure: f64,
) -> Result<f64, AnalysisError> {
    if errors.is_empty() {
        return Err(AnalysisError::EmptyErrors);
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(AnalysisError::InvalidEpsilon(epsilon));
    }
    if !total_measure.is_finite() || total_measure < 0.0 {
        return Err(AnalysisError::InvalidMeasure(total_measure));
    }
    let bad = errors.iter().filter(|&&e| e >= epsilon).count();
    Ok(bad as f64 / errors.len() as f64 * total_measure)
}

/// Outcome of checking the reach lower bound `sup ||G(F(x)) - x|| >= r_K`
/// against a measured sup-error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub sup_error_estimate: f64,
    pub reach: f64,
    pub slack: f64,
    pub threshold: f64,
    pub bound_satisfied: bool,
}

/// Checks `sup_estimate >= reach * (1 - slack)`. A violation flags an
/// insufficient search grid, never a counterexample: the bound is
/// unconditional for continuous autoencoders. An infinite reach (a single
/// point component) carries no topological obstruction, so the verdict is
/// vacuously satisfied there.
///
/// # Panics
///
/// Panics if `slack` is outside `[0, 1)`.
pub fn reach_bound_report(sup_estimate: f64, reach: f64, slack: f64) -> BoundVerdict {
    assert!(
        (0.0..1.0).contains(&slack),
        "slack must lie in [0, 1), got {slack}"
    );
    let threshold = reach * (1.0 - slack);
    BoundVerdict {
        sup_error_estimate: sup_estimate,
        reach,
        slack,
        threshold,
        bound_satisfied: !reach.is_finite() || sup_estimate >= threshold,
    }
}

/// Knobs for [`analyze`]. The defaults match the reference experiment: a
/// 4096-point chart grid per component with 32 refinement iterations, 20
/// logarithmically spaced epsilons from 1e-6 to 2, and slack 0.1 (trained
/// networks put the error spike in a narrow, unknown location; for the
/// oracle a slack of 0.01 is appropriate since the spike provably sits in
/// the bad set).
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub grid_per_component: usize,
    pub refine_iters: usize,
    pub epsilon_grid: Vec<f64>,
    pub slack: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            grid_per_component: 4096,
            refine_iters: 32,
            epsilon_grid: default_epsilon_grid(),
            slack: 0.1,
        }
    }
}

/// 20 logarithmically spaced epsilons from 1e-6 to 2 inclusive.
pub fn default_epsilon_grid() -> Vec<f64> {
    let (lo, hi, n) = (1e-6f64, 2.0f64, 20);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut grid: Vec<f64> = (0..n).map(|i| lo * ratio.powi(i)).collect();
    grid[n as usize - 1] = hi;
    grid
}

/// The full analysis record. `per_point_errors` is kept for CSV export and
/// skipped in the JSON serialization, which carries exactly the summary
/// keys.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    #[serde(skip)]
    pub per_point_errors: Vec<f64>,
    pub sup_error_estimate: f64,
    pub reach: f64,
    pub bound_satisfied: bool,
    pub epsilon_grid: Vec<f64>,
    #[serde(rename = "mu_hat")]
    pub bad_set_measure_at_epsilon: Vec<f64>,
    #[serde(rename = "n_samples")]
    pub sample_count: usize,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        crate::jsonfmt::to_json_string(self).expect("report serialization cannot fail")
    }
}

/// Runs the whole pipeline: per-point errors on `points`, a sup-error
/// estimate over `spec` (taking the max with the per-point errors, so the
/// report never understates what the samples already witnessed), the
/// empirical bad-set measure along the epsilon grid (sorted ascending), and
/// the reach-bound verdict.
pub fn analyze<A: Autoencoder + ?Sized>(
    model: &A,
    spec: &ManifoldSpec,
    points: &PointSet,
    options: &AnalysisOptions,
) -> Result<AnalysisReport, AnalysisError> {
    if options.grid_per_component < 2 {
        return Err(AnalysisError::InvalidOptions(format!(
            "grid_per_component must be at least 2, got {}",
            options.grid_per_component
        )));
    }
    if !(0.0..1.0).contains(&options.slack) {
        return Err(AnalysisError::InvalidOptions(format!(
            "slack must lie in [0, 1), got {}",
            options.slack
        )));
    }
    if options.epsilon_grid.is_empty() {
        return Err(AnalysisError::InvalidOptions(
            "epsilon_grid must not be empty".into(),
        ));
    }
    if let Some(&eps) = options
        .epsilon_grid
        .iter()
        .find(|e| !e.is_finite() || **e <= 0.0)
    {
        return Err(AnalysisError::InvalidEpsilon(eps));
    }
    if points.is_empty() {
        return Err(AnalysisError::EmptyErrors);
    }

    let per_point_errors = reconstruction_errors(model, points);
    let witnessed = per_point_errors.iter().fold(0.0f64, |a, &b| a.max(b));
    let sup = sup_error(model, spec, options.grid_per_component, options.refine_iters)
        .max(witnessed);

    let mut epsilon_grid = options.epsilon_grid.clone();
    epsilon_grid.sort_by(|a, b| a.partial_cmp(b).expect("epsilons are finite"));
    let total_measure = spec.total_measure();
    let bad_set_measure_at_epsilon = epsilon_grid
        .iter()
        .map(|&eps| bad_set_measure(&per_point_errors, eps, total_measure))
        .collect::<Result<Vec<f64>, AnalysisError>>()?;

    let reach = spec.analytic_reach().reach;
    let verdict = reach_bound_report(sup, reach, options.slack);
    Ok(AnalysisReport {
        per_point_errors,
        sup_error_estimate: sup,
        reach,
        bound_satisfied: verdict.bound_satisfied,
        epsilon_grid,
        bad_set_measure_at_epsilon,
        sample_count: points.len(),
    })
}
