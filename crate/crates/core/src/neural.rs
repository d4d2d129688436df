//! A small, fully self-contained dense MLP stack: initialization, forward,
//! backprop, Adam, minibatch training, and finite-difference gradient checks.
//!
//! Everything is `f64`, single-threaded, and seeded, so a (data, config,
//! seed) triple reproduces training bit for bit.

use crate::geometry::PointSet;
use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("widths must list an input and an output layer, all positive: {0:?}")]
    InvalidWidths(Vec<usize>),
    #[error("{layers} weight layers need {layers} activations, got {got}")]
    ActivationCountMismatch { layers: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training data is empty")]
    EmptyDataset,
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("gradient checking needs at least one probe")]
    NoProbes,
    #[error("bad checkpoint: {0}")]
    InvalidCheckpoint(String),
}

/// Elementwise activation of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative at `z`; the ReLU kink at zero takes the subgradient 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// The conventional activation stack for an `n_layers`-deep block: ReLU on
/// every layer except a linear final one.
pub fn standard_activations(n_layers: usize) -> Vec<Activation> {
    (0..n_layers)
        .map(|l| {
            if l + 1 == n_layers {
                Activation::Linear
            } else {
                Activation::Relu
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    /// `out x in`, row-major.
    weight: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

/// A dense multilayer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    layers: Vec<CheckpointLayer>,
}

impl Mlp {
    /// Initializes a network with the given layer widths (input first) and
    /// one activation per weight layer. ReLU layers get He-normal weights
    /// (`N(0, 2 / fan_in)`), linear layers Glorot-uniform weights
    /// (`U(+-sqrt(6 / (fan_in + fan_out)))`); biases start at zero.
    pub fn new(widths: &[usize], activations: &[Activation], seed: u64) -> Result<Self, NeuralError> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(NeuralError::InvalidWidths(widths.to_vec()));
        }
        if activations.len() != widths.len() - 1 {
            return Err(NeuralError::ActivationCountMismatch {
                layers: widths.len() - 1,
                got: activations.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(activations.len());
        for (l, &activation) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let weight = match activation {
                Activation::Relu => {
                    let std = (2.0 / fan_in as f64).sqrt();
                    Array2::from_shape_fn((fan_out, fan_in), |_| {
                        rng.sample::<f64, _>(StandardNormal) * std
                    })
                }
                Activation::Linear => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-limit, limit)
                        .expect("finite uniform bounds");
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.sample(dist))
                }
            };
            layers.push(Layer {
                weight,
                bias: Array1::zeros(fan_out),
                activation,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.nrows()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Layer widths, input first.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.layers.len() + 1);
        w.push(self.input_dim());
        w.extend(self.layers.iter().map(|l| l.weight.nrows()));
        w
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Runs the network on a batch (rows are samples).
    pub fn forward(&self, input: &Array2<f64>) -> Result<Array2<f64>, NeuralError> {
        if input.ncols() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch(format!(
                "input has {} columns, the network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut a = input.to_owned();
        for layer in &self.layers {
            let z = a.dot(&layer.weight.t()) + &layer.bias;
            a = z.mapv(|v| layer.activation.apply(v));
        }
        Ok(a)
    }

    /// Runs the network on a single sample.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .expect("shape matches the data length");
        Ok(self.forward(&input)?.row(0).to_vec())
    }

    /// Forward pass keeping pre-activations and activations for backprop.
    fn forward_cached(&self, input: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let z = activations.last().unwrap().dot(&layer.weight.t()) + &layer.bias;
            activations.push(z.mapv(|v| layer.activation.apply(v)));
            zs.push(z);
        }
        (zs, activations)
    }

    /// Concatenates two networks into one (encoder then decoder).
    fn stacked(encoder: &Mlp, decoder: &Mlp) -> Mlp {
        let mut layers = encoder.layers.clone();
        layers.extend(decoder.layers.iter().cloned());
        Mlp { layers }
    }

    /// Splits the network back into a prefix of `n` layers and the rest.
    fn split_at(mut self, n: usize) -> (Mlp, Mlp) {
        let tail = self.layers.split_off(n);
        (Mlp { layers: self.layers }, Mlp { layers: tail })
    }

    /// Serializes weights, biases, widths, and activations as JSON with
    /// lossless float formatting (row-major weight matrices).
    pub fn to_json(&self) -> String {
        let checkpoint = Checkpoint {
            widths: self.widths(),
            activations: self.activations(),
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        };
        crate::jsonfmt::to_json_string(&checkpoint).expect("checkpoint serialization cannot fail")
    }

    /// Restores a network from [`Self::to_json`] output, validating shapes
    /// and finiteness.
    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let checkpoint: Checkpoint =
            serde_json::from_str(text).map_err(|e| NeuralError::InvalidCheckpoint(e.to_string()))?;
        let widths = &checkpoint.widths;
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(NeuralError::InvalidCheckpoint(format!(
                "bad widths {widths:?}"
            )));
        }
        let n_layers = widths.len() - 1;
        if checkpoint.activations.len() != n_layers || checkpoint.layers.len() != n_layers {
            return Err(NeuralError::InvalidCheckpoint(format!(
                "{} widths imply {n_layers} layers, got {} activations and {} layer blocks",
                widths.len(),
                checkpoint.activations.len(),
                checkpoint.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (l, block) in checkpoint.layers.into_iter().enumerate() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            if block.weight.len() != fan_out
                || block.weight.iter().any(|row| row.len() != fan_in)
                || block.bias.len() != fan_out
            {
                return Err(NeuralError::InvalidCheckpoint(format!(
                    "layer {l} does not match widths {fan_in} -> {fan_out}"
                )));
            }
            let flat: Vec<f64> = block.weight.into_iter().flatten().collect();
            if flat.iter().chain(block.bias.iter()).any(|v| !v.is_finite()) {
                return Err(NeuralError::InvalidCheckpoint(format!(
                    "layer {l} contains non-finite parameters"
                )));
            }
            layers.push(Layer {
                weight: Array2::from_shape_vec((fan_out, fan_in), flat)
                    .expect("dimensions were just validated"),
                bias: Array1::from_vec(block.bias),
                activation: checkpoint.activations[l],
            });
        }
        Ok(Mlp { layers })
    }
}

/// Per-layer gradients, shaped like the network's parameters.
#[derive(Clone, Debug)]
pub struct Gradients {
    d_weights: Vec<Array2<f64>>,
    d_biases: Vec<Array1<f64>>,
}

/// Mean-squared-error loss (mean over every entry of the batch) and its
/// gradients with respect to all parameters.
pub fn loss_and_grads(
    mlp: &Mlp,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
) -> Result<(f64, Gradients), NeuralError> {
    if inputs.nrows() == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    if inputs.ncols() != mlp.input_dim() {
        return Err(NeuralError::DimensionMismatch(format!(
            "input has {} columns, the network expects {}",
            inputs.ncols(),
            mlp.input_dim()
        )));
    }
    if targets.nrows() != inputs.nrows() || targets.ncols() != mlp.output_dim() {
        return Err(NeuralError::DimensionMismatch(format!(
            "targets are {}x{}, expected {}x{}",
            targets.nrows(),
            targets.ncols(),
            inputs.nrows(),
            mlp.output_dim()
        )));
    }
    let (zs, activations) = mlp.forward_cached(inputs);
    let diff = activations.last().unwrap() - targets;
    let entries = (inputs.nrows() * mlp.output_dim()) as f64;
    let loss = diff.mapv(|d| d * d).sum() / entries;

    let mut d_weights = Vec::with_capacity(mlp.layers.len());
    let mut d_biases = Vec::with_capacity(mlp.layers.len());
    // dL/d(output activations).
    let mut upstream = diff * (2.0 / entries);
    for (l, layer) in mlp.layers.iter().enumerate().rev() {
        let dz = upstream * &zs[l].mapv(|z| layer.activation.derivative(z));
        d_weights.push(dz.t().dot(&activations[l]));
        d_biases.push(dz.sum_axis(Axis(0)));
        upstream = dz.dot(&layer.weight);
    }
    d_weights.reverse();
    d_biases.reverse();
    Ok((
        loss,
        Gradients {
            d_weights,
            d_biases,
        },
    ))
}

/// First and second moment estimates for Adam, shaped like the network.
#[derive(Clone, Debug)]
pub struct AdamState {
    m_weights: Vec<Array2<f64>>,
    v_weights: Vec<Array2<f64>>,
    m_biases: Vec<Array1<f64>>,
    v_biases: Vec<Array1<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        AdamState {
            m_weights: mlp.layers.iter().map(|l| Array2::zeros(l.weight.dim())).collect(),
            v_weights: mlp.layers.iter().map(|l| Array2::zeros(l.weight.dim())).collect(),
            m_biases: mlp.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            v_biases: mlp.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update in place: bias-corrected first/second moments, epsilon
/// outside the square root.
pub fn adam_step(
    mlp: &mut Mlp,
    state: &mut AdamState,
    grads: &Gradients,
    cfg: &TrainConfig,
) -> Result<(), NeuralError> {
    if grads.d_weights.len() != mlp.layers.len() || state.m_weights.len() != mlp.layers.len() {
        return Err(NeuralError::DimensionMismatch(
            "gradients or optimizer state do not match the network depth".into(),
        ));
    }
    cfg.validate_optimizer()?;
    state.t += 1;
    let m_corr = 1.0 - cfg.beta1.powi(state.t as i32);
    let v_corr = 1.0 - cfg.beta2.powi(state.t as i32);
    for (l, layer) in mlp.layers.iter_mut().enumerate() {
        if grads.d_weights[l].dim() != layer.weight.dim()
            || grads.d_biases[l].len() != layer.bias.len()
        {
            return Err(NeuralError::DimensionMismatch(format!(
                "gradient shapes for layer {l} do not match the parameters"
            )));
        }
        Zip::from(&mut layer.weight)
            .and(&mut state.m_weights[l])
            .and(&mut state.v_weights[l])
            .and(&grads.d_weights[l])
            .for_each(|w, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= cfg.learning_rate * (*m / m_corr) / ((*v / v_corr).sqrt() + cfg.epsilon);
            });
        Zip::from(&mut layer.bias)
            .and(&mut state.m_biases[l])
            .and(&mut state.v_biases[l])
            .and(&grads.d_biases[l])
            .for_each(|w, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= cfg.learning_rate * (*m / m_corr) / ((*v / v_corr).sqrt() + cfg.epsilon);
            });
    }
    Ok(())
}

/// Training hyperparameters. The defaults mirror the reference experiment:
/// Adam(1e-3, 0.9, 0.999, 1e-8), minibatches of 20, 2000 epochs, shuffling
/// each epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_size: 20,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate_optimizer(&self) -> Result<(), NeuralError> {
        let bad = |msg: String| Err(NeuralError::InvalidHyperparameter(msg));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Result of [`train`]: the tuned networks and the per-epoch training loss
/// (sample-weighted mean of the minibatch losses, as observed during the
/// epoch).
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub loss_history: Vec<f64>,
}

/// Trains `decoder(encoder(x)) ~ x` on the point positions with minibatch
/// Adam. The two networks are stacked and optimized jointly; gradients flow
/// through the bottleneck. Batches are drawn in a seeded shuffled order each
/// epoch, and a short final batch is used as-is.
pub fn train(
    encoder: Mlp,
    decoder: Mlp,
    data: &PointSet,
    cfg: &TrainConfig,
) -> Result<TrainOutput, NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    if encoder.input_dim() != 3 || decoder.output_dim() != 3 {
        return Err(NeuralError::DimensionMismatch(format!(
            "autoencoders map R^3 to R^3; got encoder input {} and decoder output {}",
            encoder.input_dim(),
            decoder.output_dim()
        )));
    }
    if encoder.output_dim() != decoder.input_dim() {
        return Err(NeuralError::DimensionMismatch(format!(
            "encoder output {} does not feed decoder input {}",
            encoder.output_dim(),
            decoder.input_dim()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(NeuralError::InvalidBatchSize);
    }
    cfg.validate_optimizer()?;

    let n = data.len();
    let mut x = Array2::zeros((n, 3));
    for (i, p) in data.positions().enumerate() {
        x[(i, 0)] = p.x;
        x[(i, 1)] = p.y;
        x[(i, 2)] = p.z;
    }
    let encoder_depth = encoder.n_layers();
    let mut net = Mlp::stacked(&encoder, &decoder);
    let mut state = AdamState::new(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = x.select(Axis(0), chunk);
            let (loss, grads) = loss_and_grads(&net, &batch, &batch)?;
            adam_step(&mut net, &mut state, &grads, cfg)?;
            weighted_loss += loss * chunk.len() as f64;
        }
        loss_history.push(weighted_loss / n as f64);
    }
    let (encoder, decoder) = net.split_at(encoder_depth);
    Ok(TrainOutput {
        encoder,
        decoder,
        loss_history,
    })
}

fn mse_loss(mlp: &Mlp, inputs: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let out = mlp.forward(inputs).expect("probe shapes are consistent");
    let diff = out - targets;
    diff.mapv(|d| d * d).sum() / diff.len() as f64
}

/// Compares analytic gradients against central finite differences on a
/// random batch, probing `n_probes` randomly chosen parameters. Returns the
/// maximum relative deviation `|num - ana| / max(|num| + |ana|, 1e-8)`.
///
/// Probe batches are redrawn (up to a cap) until every ReLU pre-activation
/// clears the kink by a margin much larger than `h`, so the finite
/// difference never straddles the non-differentiable point.
pub fn grad_check(mlp: &Mlp, n_probes: usize, h: f64, seed: u64) -> Result<f64, NeuralError> {
    if n_probes == 0 {
        return Err(NeuralError::NoProbes);
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(NeuralError::InvalidStep(h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 4;
    let margin = (50.0 * h).max(1e-3);
    let has_relu = mlp.layers.iter().any(|l| l.activation == Activation::Relu);
    let mut inputs;
    let mut targets;
    let mut attempts = 0;
    loop {
        inputs = Array2::from_shape_fn((rows, mlp.input_dim()), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        targets = Array2::from_shape_fn((rows, mlp.output_dim()), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        attempts += 1;
        if !has_relu || attempts > 200 {
            break;
        }
        let (zs, _) = mlp.forward_cached(&inputs);
        let clear = mlp
            .layers
            .iter()
            .zip(&zs)
            .filter(|(l, _)| l.activation == Activation::Relu)
            .all(|(_, z)| z.iter().all(|v| v.abs() > margin));
        if clear {
            break;
        }
    }

    let (_, grads) = loss_and_grads(mlp, &inputs, &targets)?;
    let mut probe_net = mlp.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let l = rng.random_range(0..probe_net.layers.len());
        let n_weights = probe_net.layers[l].weight.len();
        let n_params = n_weights + probe_net.layers[l].bias.len();
        let flat = rng.random_range(0..n_params);
        let analytic;
        let numeric;
        if flat < n_weights {
            let cols = probe_net.layers[l].weight.ncols();
            let idx = (flat / cols, flat % cols);
            analytic = grads.d_weights[l][idx];
            let original = probe_net.layers[l].weight[idx];
            probe_net.layers[l].weight[idx] = original + h;
            let up = mse_loss(&probe_net, &inputs, &targets);
            probe_net.layers[l].weight[idx] = original - h;
            let down = mse_loss(&probe_net, &inputs, &targets);
            probe_net.layers[l].weight[idx] = original;
            numeric = (up - down) / (2.0 * h);
        } else {
            let idx = flat - n_weights;
            analytic = grads.d_biases[l][idx];
            let original = probe_net.layers[l].bias[idx];
            probe_net.layers[l].bias[idx] = original + h;
            let up = mse_loss(&probe_net, &inputs, &targets);
            probe_net.layers[l].bias[idx] = original - h;
            let down = mse_loss(&probe_net, &inputs, &targets);
            probe_net.layers[l].bias[idx] = original;
            numeric = (up - down) / (2.0 * h);
        }
        let deviation = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
        worst = worst.max(deviation);
    }
    Ok(worst)
}
