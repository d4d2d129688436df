//! A laboratory for autoencoders on embedded manifolds.
//!
//! The crate has four pillars:
//!
//! * [`geometry`] — analytic unions of circles, 2-spheres, and points in R^3,
//!   with uniform sampling, nearest-point projection, and reach computation
//!   (both analytic and estimated from point clouds).
//! * [`oracle`] — a constructive autoencoder that achieves an arbitrarily
//!   small reconstruction error outside an explicit closed "bad set" of
//!   arbitrarily small measure, with exact bookkeeping of both.
//! * [`neural`] — a small, fully self-contained dense MLP stack (forward,
//!   backward, Adam, minibatch training, finite-difference gradient checks).
//! * [`analysis`] — reconstruction-error reports: per-point errors, sup-error
//!   estimation over the manifold, empirical bad-set measure, and verdicts
//!   against the reach lower bound for continuous autoencoders.

pub mod analysis;
pub mod geometry;
pub mod jsonfmt;
pub mod neural;
pub mod oracle;

pub use analysis::{
    analyze, bad_set_measure, reach_bound_report, reconstruction_errors, sup_error,
    AnalysisError, AnalysisOptions, AnalysisReport, Autoencoder, BoundVerdict, MlpAutoencoder,
};
pub use geometry::{
    estimate_reach, linked_unit_circles, ComponentKind, GeometryError, ManifoldSpec, PointSet,
    ProjectionResult, ReachMechanism, ReachResult, SamplePoint, Vec3, DEFAULT_TIE_TOL,
};
pub use neural::{
    adam_step, grad_check, loss_and_grads, train, Activation, AdamState, Gradients, Mlp,
    NeuralError, TrainConfig, TrainOutput,
};
pub use oracle::{OracleAutoencoder, OracleError, OracleReport};
