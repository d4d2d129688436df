//! Shared fixtures for the criterion benchmarks: the interlaced-circles
//! manifold, a matching oracle, and the reference network pair, so every
//! bench measures the same workloads the experiments run.

use manifold_ae::neural::standard_activations;
use manifold_ae::{linked_unit_circles, ManifoldSpec, Mlp, OracleAutoencoder, PointSet};

pub fn spec() -> ManifoldSpec {
    linked_unit_circles()
}

pub fn points(n_per_component: usize, seed: u64) -> PointSet {
    spec()
        .sample_per_component(n_per_component, seed)
        .expect("circles have positive measure")
}

pub fn oracle() -> OracleAutoencoder {
    OracleAutoencoder::build(&spec(), 0.05, &[]).expect("the preset spec builds")
}

pub fn reference_pair(seed: u64) -> (Mlp, Mlp) {
    let enc = Mlp::new(&[3, 128, 128, 128, 1], &standard_activations(4), seed)
        .expect("valid widths");
    let dec = Mlp::new(&[1, 128, 128, 128, 3], &standard_activations(4), seed + 1)
        .expect("valid widths");
    (enc, dec)
}
