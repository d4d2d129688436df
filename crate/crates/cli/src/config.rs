//! Experiment configuration: a JSON document with every field optional, so
//! the empty document `{}` is the reference interlaced-circles experiment.
//! Unknown and duplicate keys are rejected, parse errors carry the JSON
//! path, and semantic validation names the offending field.
//!
//! Seed conventions, used by every command: `sampling.seed` drives the point
//! sampler, `training.seed` drives the minibatch shuffle, and the encoder
//! and decoder are initialized from `training.seed + 1` and
//! `training.seed + 2`. The global `--seed` flag overrides both base seeds
//! at once.

use manifold_ae::geometry::Vec3;
use manifold_ae::neural::standard_activations;
use manifold_ae::{linked_unit_circles, Activation, ManifoldSpec, Mlp, TrainConfig};
use serde::Deserialize;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: `{path}`: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_manifold")]
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub architecture: ArchitectureSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub sweep: SweepSection,
    /// Output directory; the `--out` flag takes precedence, and `out`
    /// is the fallback when neither is given.
    #[serde(default)]
    pub out: Option<String>,
}

fn default_manifold() -> ManifoldSpec {
    linked_unit_circles()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(default = "default_n_per_component")]
    pub n_per_component: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_per_component() -> usize {
    500
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            n_per_component: default_n_per_component(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    #[serde(default = "default_encoder_widths")]
    pub encoder: Vec<usize>,
    #[serde(default = "default_decoder_widths")]
    pub decoder: Vec<usize>,
    /// Per-layer activations; defaults to ReLU with a linear final layer.
    #[serde(default)]
    pub encoder_activations: Option<Vec<Activation>>,
    #[serde(default)]
    pub decoder_activations: Option<Vec<Activation>>,
}

fn default_encoder_widths() -> Vec<usize> {
    vec![3, 128, 128, 128, 1]
}

fn default_decoder_widths() -> Vec<usize> {
    vec![1, 128, 128, 128, 3]
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        ArchitectureSection {
            encoder: default_encoder_widths(),
            decoder: default_decoder_widths(),
            encoder_activations: None,
            decoder_activations: None,
        }
    }
}

impl ArchitectureSection {
    pub fn bottleneck(&self) -> usize {
        *self.encoder.last().expect("validated: widths are nonempty")
    }

    /// Initializes the pair from `training.seed + 1` / `training.seed + 2`.
    pub fn build_networks(&self, training_seed: u64) -> Result<(Mlp, Mlp), ConfigError> {
        let enc_act = self
            .encoder_activations
            .clone()
            .unwrap_or_else(|| standard_activations(self.encoder.len() - 1));
        let dec_act = self
            .decoder_activations
            .clone()
            .unwrap_or_else(|| standard_activations(self.decoder.len() - 1));
        let encoder = Mlp::new(&self.encoder, &enc_act, training_seed.wrapping_add(1))
            .map_err(|e| invalid("architecture.encoder", e.to_string()))?;
        let decoder = Mlp::new(&self.decoder, &dec_act, training_seed.wrapping_add(2))
            .map_err(|e| invalid("architecture.decoder", e.to_string()))?;
        Ok((encoder, decoder))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_epochs() -> usize {
    2000
}

fn default_batch_size() -> usize {
    20
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_adam_epsilon() -> f64 {
    1e-8
}

fn default_shuffle() -> bool {
    true
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_adam_epsilon(),
            seed: 0,
            shuffle: default_shuffle(),
        }
    }
}

impl TrainingSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Protected ambient points the bad set must avoid (must lie on the
    /// manifold).
    #[serde(default)]
    pub protected: Vec<[f64; 3]>,
}

fn default_delta() -> f64 {
    0.05
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            delta: default_delta(),
            protected: Vec::new(),
        }
    }
}

impl OracleSection {
    pub fn protected_points(&self) -> Vec<Vec3> {
        self.protected
            .iter()
            .map(|p| Vec3::new(p[0], p[1], p[2]))
            .collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Defaults to 20 logarithmically spaced values from 1e-6 to 2.
    #[serde(default)]
    pub epsilon_grid: Option<Vec<f64>>,
    #[serde(default = "default_sup_grid")]
    pub sup_grid: usize,
    #[serde(default = "default_refine_iters")]
    pub refine_iters: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Model checkpoint for `analyze`; relative paths resolve against the
    /// output directory. Defaults to `model.json` there.
    #[serde(default)]
    pub model: Option<String>,
}

fn default_sup_grid() -> usize {
    4096
}

fn default_refine_iters() -> usize {
    32
}

fn default_slack() -> f64 {
    0.1
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            epsilon_grid: None,
            sup_grid: default_sup_grid(),
            refine_iters: default_refine_iters(),
            slack: default_slack(),
            model: None,
        }
    }
}

impl AnalysisSection {
    pub fn to_options(&self) -> manifold_ae::AnalysisOptions {
        manifold_ae::AnalysisOptions {
            grid_per_component: self.sup_grid,
            refine_iters: self.refine_iters,
            epsilon_grid: self
                .epsilon_grid
                .clone()
                .unwrap_or_else(manifold_ae::analysis::default_epsilon_grid),
            slack: self.slack,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Defaults to seeds 0 through 4.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

impl SweepSection {
    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..5).collect())
    }
}

impl ExperimentConfig {
    /// Overrides the sampling and training base seeds together (the `--seed`
    /// flag and the per-member seeds of a sweep).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.sampling.seed = seed;
        cfg.training.seed = seed;
        cfg
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let arch = &self.architecture;
        for (path, widths) in [
            ("architecture.encoder", &arch.encoder),
            ("architecture.decoder", &arch.decoder),
        ] {
            if widths.len() < 2 {
                return Err(invalid(path, "needs an input and an output width"));
            }
            if widths.iter().any(|&w| w == 0) {
                return Err(invalid(path, format!("widths must be positive, got {widths:?}")));
            }
        }
        if arch.encoder[0] != 3 {
            return Err(invalid(
                "architecture.encoder",
                format!("must start at the ambient dimension 3, got {}", arch.encoder[0]),
            ));
        }
        if *arch.decoder.last().unwrap() != 3 {
            return Err(invalid(
                "architecture.decoder",
                format!(
                    "must end at the ambient dimension 3, got {}",
                    arch.decoder.last().unwrap()
                ),
            ));
        }
        if arch.encoder.last() != arch.decoder.first() {
            return Err(invalid(
                "architecture.encoder",
                format!(
                    "bottleneck width {} does not match `architecture.decoder` input width {}",
                    arch.encoder.last().unwrap(),
                    arch.decoder.first().unwrap()
                ),
            ));
        }
        for (path, acts, widths) in [
            ("architecture.encoder_activations", &arch.encoder_activations, &arch.encoder),
            ("architecture.decoder_activations", &arch.decoder_activations, &arch.decoder),
        ] {
            if let Some(acts) = acts {
                if acts.len() != widths.len() - 1 {
                    return Err(invalid(
                        path,
                        format!("{} layers need {} activations, got {}", widths.len() - 1, widths.len() - 1, acts.len()),
                    ));
                }
            }
        }

        if self.sampling.n_per_component == 0 {
            return Err(invalid("sampling.n_per_component", "must be positive"));
        }

        let t = &self.training;
        if t.epochs == 0 {
            return Err(invalid("training.epochs", "must be positive"));
        }
        if t.batch_size == 0 {
            return Err(invalid("training.batch_size", "must be positive"));
        }
        if !t.learning_rate.is_finite() || t.learning_rate <= 0.0 {
            return Err(invalid(
                "training.learning_rate",
                format!("must be positive, got {}", t.learning_rate),
            ));
        }
        for (path, beta) in [("training.beta1", t.beta1), ("training.beta2", t.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(invalid(path, format!("must lie in [0, 1), got {beta}")));
            }
        }
        if !t.epsilon.is_finite() || t.epsilon <= 0.0 {
            return Err(invalid(
                "training.epsilon",
                format!("must be positive, got {}", t.epsilon),
            ));
        }

        if !self.oracle.delta.is_finite() || self.oracle.delta <= 0.0 {
            return Err(invalid(
                "oracle.delta",
                format!("must be positive, got {}", self.oracle.delta),
            ));
        }
        if let Some(bad) = self
            .oracle
            .protected
            .iter()
            .find(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(invalid("oracle.protected", format!("coordinates must be finite, got {bad:?}")));
        }

        let a = &self.analysis;
        if a.sup_grid < 2 {
            return Err(invalid("analysis.sup_grid", "must be at least 2"));
        }
        if !(0.0..1.0).contains(&a.slack) {
            return Err(invalid(
                "analysis.slack",
                format!("must lie in [0, 1), got {}", a.slack),
            ));
        }
        if let Some(grid) = &a.epsilon_grid {
            if grid.is_empty() {
                return Err(invalid("analysis.epsilon_grid", "must not be empty"));
            }
            if let Some(&eps) = grid.iter().find(|e| !e.is_finite() || **e <= 0.0) {
                return Err(invalid(
                    "analysis.epsilon_grid",
                    format!("entries must be positive and finite, got {eps}"),
                ));
            }
        }

        if let Some(seeds) = &self.sweep.seeds {
            if seeds.is_empty() {
                return Err(invalid("sweep.seeds", "must not be empty"));
            }
        }

        if self.out.as_ref().is_some_and(String::is_empty) {
            return Err(invalid("out", "must not be empty"));
        }
        Ok(())
    }
}

/// Reads and validates a config file; `None` means the empty document (all
/// defaults: the interlaced-circles experiment). Returns the config together
/// with the raw text, which is what the artifact envelope hashes.
pub fn load(path: Option<&Path>) -> Result<(ExperimentConfig, String), ConfigError> {
    let raw = match path {
        Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => "{}".to_string(),
    };
    let mut de = serde_json::Deserializer::from_str(&raw);
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    de.end().map_err(|e| ConfigError::Parse {
        path: ".".to_string(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok((config, raw))
}
