//! The six `manifold-ae` subcommands.
//!
//! Every command follows the same discipline: load and validate the JSON
//! config (defaults reproduce the reference interlaced-circles experiment),
//! apply `--seed` if given, run deterministically, and drop artifacts into
//! `--out`, finishing with a `summary.json` envelope.
//!
//! Exit codes: `0` success, `1` usage/config/IO error (surfaced as `Err`
//! from [`run`] and printed by `main`), `2` the run completed but the
//! numbers refused — training did not converge, an oracle invariant failed,
//! or the reach-bound verdict came back unsatisfied.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use manifold_ae::jsonfmt::to_json_string;
use manifold_ae::oracle::ON_MANIFOLD_TOL;
use manifold_ae::{
    analyze, train, AnalysisReport, Autoencoder, MlpAutoencoder, OracleAutoencoder, PointSet, Vec3,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts;
use crate::config::{self, ExperimentConfig};
use crate::plot;

/// A training run converges when its final mean loss drops below this.
pub const CONVERGENCE_LOSS_THRESHOLD: f64 = 0.05;

/// Default seed for `reproduce-circles`, pinned to a run that reproduces the
/// reference experiment cleanly (low error, fully separated bottleneck
/// intervals). Override with `--seed` to explore other draws.
pub const DEFAULT_REPRODUCE_SEED: u64 = 1;

/// Reconstruction errors below this count as "well reconstructed" in
/// summary metrics (`frac_under_0_1`).
const GOOD_ERROR_THRESHOLD: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(
    name = "manifold-ae",
    version,
    about = "Autoencoders on analytic manifolds in R^3: sample, train, construct oracles, analyze"
)]
pub struct Cli {
    /// Path to a JSON experiment config. Every field is optional; the empty
    /// config reproduces the reference interlaced-circles experiment.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides both the sampling seed and the training seed.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Directory receiving all artifacts (created if missing). Falls back to
    /// the config's `out` field, then to `out/`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample points uniformly by measure from the configured manifold.
    Sample,
    /// Train the MLP autoencoder on fresh samples, then analyze it.
    Train,
    /// Build the constructive oracle autoencoder and verify its guarantees.
    Oracle,
    /// Analyze a saved model checkpoint against the configured manifold.
    Analyze,
    /// Re-run the reference interlaced-circles experiment end to end.
    ReproduceCircles,
    /// Train across a list of seeds and aggregate the outcomes.
    Sweep,
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Sample => cmd_sample(&cli),
        Command::Train => cmd_train(&cli),
        Command::Oracle => cmd_oracle(&cli),
        Command::Analyze => cmd_analyze(&cli),
        Command::ReproduceCircles => cmd_reproduce(&cli),
        Command::Sweep => cmd_sweep(&cli),
    }
}

struct Prepared {
    config: ExperimentConfig,
    config_sha256: String,
    out: PathBuf,
    started: Instant,
}

/// `--out` flag, else the config's `out` field, else `out/`.
fn resolve_out(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn prepare(cli: &Cli) -> Result<Prepared> {
    let (mut config, raw) = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let out = resolve_out(cli, &config);
    fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    Ok(Prepared {
        config,
        config_sha256: artifacts::config_sha256(&raw),
        out,
        started: Instant::now(),
    })
}

fn csv_header(csv: &str) -> String {
    csv.lines().next().unwrap_or_default().to_string()
}

fn exit_code(ok: bool) -> u8 {
    if ok {
        0
    } else {
        2
    }
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

fn cmd_sample(cli: &Cli) -> Result<u8> {
    let p = prepare(cli)?;
    let spec = &p.config.manifold;
    let points =
        spec.sample_per_component(p.config.sampling.n_per_component, p.config.sampling.seed)?;
    let points_csv = points.to_csv();
    artifacts::write_file(&p.out, "points.csv", &points_csv)?;

    let results = json!({
        "sampling_seed": p.config.sampling.seed,
        "n_points": points.points.len(),
        "n_components": spec.components().len(),
        "total_measure": spec.total_measure(),
        "reach": serde_json::to_value(spec.analytic_reach())?,
    });
    let schemas = [("points.csv", csv_header(&points_csv))];
    let summary = artifacts::summary_json(
        "sample",
        &p.config_sha256,
        p.started.elapsed().as_secs_f64(),
        &schemas,
        results,
    )?;
    artifacts::write_file(&p.out, "summary.json", &summary)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// train / reproduce-circles / sweep members (shared pipeline)
// ---------------------------------------------------------------------------

/// Headline numbers of one training run, shared between `summary.json`
/// results and `sweep.json` entries.
#[derive(Clone, Serialize)]
struct RunMetrics {
    first_loss: f64,
    final_loss: f64,
    converged: bool,
    mean_error: f64,
    max_error: f64,
    frac_under_0_1: f64,
    overlap_fraction: Option<f64>,
}

struct TrainedRun {
    points: PointSet,
    latents: Vec<Vec<f64>>,
    decoded: Vec<Vec3>,
    errors: Vec<f64>,
    loss_history: Vec<f64>,
    model: MlpAutoencoder,
    report: AnalysisReport,
    metrics: RunMetrics,
    results: Value,
}

/// Samples, trains, reconstructs, and analyzes one experiment. Used verbatim
/// by `train`, `reproduce-circles`, and each `sweep` member, so their
/// artifacts are directly comparable.
fn run_training(config: &ExperimentConfig) -> Result<TrainedRun> {
    let spec = &config.manifold;
    let points =
        spec.sample_per_component(config.sampling.n_per_component, config.sampling.seed)?;
    let (encoder, decoder) = config.architecture.build_networks(config.training.seed)?;
    let trained = train(encoder, decoder, &points, &config.training.to_train_config())?;

    let first_loss = *trained
        .loss_history
        .first()
        .expect("config validation requires epochs >= 1");
    let final_loss = *trained
        .loss_history
        .last()
        .expect("config validation requires epochs >= 1");
    let converged = final_loss <= CONVERGENCE_LOSS_THRESHOLD;

    let model = MlpAutoencoder::new(trained.encoder, trained.decoder)?;
    let latents: Vec<Vec<f64>> = points.positions().map(|x| model.embed(&x)).collect();
    let decoded: Vec<Vec3> = latents.iter().map(|z| model.reconstruct_latent(z)).collect();
    let errors: Vec<f64> = decoded
        .iter()
        .zip(points.positions())
        .map(|(d, x)| (d - x).norm())
        .collect();

    let report = analyze(&model, spec, &points, &config.analysis.to_options())?;

    let n = errors.len() as f64;
    let metrics = RunMetrics {
        first_loss,
        final_loss,
        converged,
        mean_error: errors.iter().sum::<f64>() / n,
        max_error: errors.iter().fold(0.0, |a, &b| a.max(b)),
        frac_under_0_1: errors.iter().filter(|e| **e < GOOD_ERROR_THRESHOLD).count() as f64 / n,
        overlap_fraction: overlap_fraction(&points, &latents),
    };
    let results = train_results(config, &points, &latents, &metrics, &report)?;

    Ok(TrainedRun {
        points,
        latents,
        decoded,
        errors,
        loss_history: trained.loss_history,
        model,
        report,
        metrics,
        results,
    })
}

/// Fraction of all points whose 1-d bottleneck value lands inside the
/// intersection of the two per-component bottleneck intervals. `0.0` means
/// the components are perfectly separated in latent space; `None` when the
/// metric does not apply (latent dim != 1 or not exactly two components).
fn overlap_fraction(points: &PointSet, latents: &[Vec<f64>]) -> Option<f64> {
    if latents.is_empty() || latents[0].len() != 1 {
        return None;
    }
    let mut ranges: std::collections::BTreeMap<usize, (f64, f64)> = std::collections::BTreeMap::new();
    for (sp, z) in points.points.iter().zip(latents) {
        let entry = ranges
            .entry(sp.component_id)
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        entry.0 = entry.0.min(z[0]);
        entry.1 = entry.1.max(z[0]);
    }
    if ranges.len() != 2 {
        return None;
    }
    let spans: Vec<(f64, f64)> = ranges.values().copied().collect();
    let lo = spans[0].0.max(spans[1].0);
    let hi = spans[0].1.min(spans[1].1);
    if hi < lo {
        return Some(0.0);
    }
    let inside = latents.iter().filter(|z| z[0] >= lo && z[0] <= hi).count();
    Some(inside as f64 / latents.len() as f64)
}

/// Per-component bottleneck bounding boxes: outer index is the component id
/// in ascending order, inner index the latent dimension, leaves `[min, max]`.
fn bottleneck_ranges(points: &PointSet, latents: &[Vec<f64>]) -> Vec<Vec<[f64; 2]>> {
    let mut map: std::collections::BTreeMap<usize, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    for (sp, z) in points.points.iter().zip(latents) {
        let dims = map
            .entry(sp.component_id)
            .or_insert_with(|| vec![(f64::INFINITY, f64::NEG_INFINITY); z.len()]);
        for (d, v) in dims.iter_mut().zip(z) {
            d.0 = d.0.min(*v);
            d.1 = d.1.max(*v);
        }
    }
    map.into_values()
        .map(|dims| dims.into_iter().map(|(lo, hi)| [lo, hi]).collect())
        .collect()
}

fn train_results(
    config: &ExperimentConfig,
    points: &PointSet,
    latents: &[Vec<f64>],
    metrics: &RunMetrics,
    report: &AnalysisReport,
) -> Result<Value> {
    let mut value = serde_json::to_value(metrics)?;
    let map = value.as_object_mut().expect("metrics serialize to an object");
    map.insert("sampling_seed".into(), json!(config.sampling.seed));
    map.insert("training_seed".into(), json!(config.training.seed));
    map.insert("n_points".into(), json!(points.points.len()));
    map.insert("epochs".into(), json!(config.training.epochs));
    map.insert("batch_size".into(), json!(config.training.batch_size));
    map.insert(
        "bottleneck_ranges".into(),
        serde_json::to_value(bottleneck_ranges(points, latents))?,
    );
    map.insert("analysis".into(), serde_json::to_value(report)?);
    Ok(value)
}

/// Writes the full artifact set of one training run into `dir`.
fn write_train_artifacts(
    dir: &Path,
    command: &str,
    config_sha256: &str,
    started: Instant,
    run: &TrainedRun,
) -> Result<()> {
    let original = run.points.to_csv();
    let decoded = artifacts::decoded_csv(&run.points, &run.decoded, &run.errors);
    let bottleneck = artifacts::bottleneck_csv(&run.points, &run.latents);
    let loss = artifacts::loss_csv(&run.loss_history);
    let latent_dim = run.latents.first().map_or(1, Vec::len);

    artifacts::write_file(dir, "original.csv", &original)?;
    artifacts::write_file(dir, "decoded.csv", &decoded)?;
    artifacts::write_file(dir, "bottleneck.csv", &bottleneck)?;
    artifacts::write_file(dir, "loss.csv", &loss)?;
    artifacts::write_file(
        dir,
        "model.json",
        &artifacts::model_json(run.model.encoder(), run.model.decoder())?,
    )?;
    artifacts::write_file(dir, "analysis.json", &(run.report.to_json() + "\n"))?;
    artifacts::write_file(dir, "decoded.svg", &plot::decoded_svg(&run.points, &run.decoded))?;
    artifacts::write_file(
        dir,
        "bottleneck.svg",
        &plot::bottleneck_svg(&run.points, &run.latents),
    )?;

    let schemas = [
        ("original.csv", csv_header(&original)),
        ("decoded.csv", artifacts::DECODED_CSV_HEADER.to_string()),
        ("bottleneck.csv", artifacts::bottleneck_csv_header(latent_dim)),
        ("loss.csv", artifacts::LOSS_CSV_HEADER.to_string()),
    ];
    let summary = artifacts::summary_json(
        command,
        config_sha256,
        started.elapsed().as_secs_f64(),
        &schemas,
        run.results.clone(),
    )?;
    artifacts::write_file(dir, "summary.json", &summary)?;
    Ok(())
}

fn cmd_train(cli: &Cli) -> Result<u8> {
    let p = prepare(cli)?;
    let run = run_training(&p.config)?;
    write_train_artifacts(&p.out, "train", &p.config_sha256, p.started, &run)?;
    Ok(exit_code(run.metrics.converged))
}

fn cmd_reproduce(cli: &Cli) -> Result<u8> {
    if cli.config.is_some() {
        bail!(
            "reproduce-circles always runs the fixed reference experiment and \
             does not accept --config; use `train` for custom configs"
        );
    }
    let (config, raw) = config::load(None)?;
    let seed = cli.seed.unwrap_or(DEFAULT_REPRODUCE_SEED);
    let config = config.with_seed(seed);
    let out = resolve_out(cli, &config);
    fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let started = Instant::now();
    let run = run_training(&config)?;
    write_train_artifacts(
        &out,
        "reproduce-circles",
        &artifacts::config_sha256(&raw),
        started,
        &run,
    )?;
    Ok(exit_code(run.metrics.converged))
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn cmd_oracle(cli: &Cli) -> Result<u8> {
    let p = prepare(cli)?;
    let spec = &p.config.manifold;
    let protected = p.config.oracle.protected_points();
    let oracle = OracleAutoencoder::build(spec, p.config.oracle.delta, &protected)?;

    let n_samples = p.config.sampling.n_per_component * spec.components().len();
    let report = oracle.verify(n_samples, p.config.sampling.seed)?;
    let points = spec.sample_uniform(n_samples, p.config.sampling.seed)?;
    let analysis = analyze(&oracle, spec, &points, &p.config.analysis.to_options())?;

    // The invariants the construction promises: exact reconstruction off the
    // bad set, bad-set measure under the budget (both exactly and as
    // estimated from samples), protected points never sacrificed, and a sup
    // error consistent with the reach no-go for continuous autoencoders.
    let invariants_ok = report.max_error_off_bad_set <= ON_MANIFOLD_TOL
        && report.bad_set_measure < oracle.delta()
        && report.mu_hat < oracle.delta()
        && report.protected_hits == 0
        && analysis.bound_satisfied;

    artifacts::write_file(&p.out, "oracle.json", &(oracle.to_json() + "\n"))?;
    artifacts::write_file(&p.out, "analysis.json", &(analysis.to_json() + "\n"))?;
    let errors = artifacts::errors_csv(&points, &analysis.per_point_errors);
    artifacts::write_file(&p.out, "errors.csv", &errors)?;

    let results = json!({
        "delta": oracle.delta(),
        "latent_dim": oracle.latent_dim(),
        "n_samples": report.n_samples,
        "n_protected": protected.len(),
        "bad_set_measure": report.bad_set_measure,
        "mu_hat": report.mu_hat,
        "badset_hits_protected": report.protected_hits,
        "max_off_badset_error": report.max_error_off_bad_set,
        "max_error_on_bad_set": report.max_error_on_bad_set,
        "max_error_overall": report.max_error_overall,
        "reach": report.reach,
        "invariants_ok": invariants_ok,
        "analysis": serde_json::to_value(&analysis)?,
    });
    let schemas = [("errors.csv", artifacts::ERRORS_CSV_HEADER.to_string())];
    let summary = artifacts::summary_json(
        "oracle",
        &p.config_sha256,
        p.started.elapsed().as_secs_f64(),
        &schemas,
        results,
    )?;
    artifacts::write_file(&p.out, "summary.json", &summary)?;
    Ok(exit_code(invariants_ok))
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn resolve_model_path(p: &Prepared) -> PathBuf {
    match &p.config.analysis.model {
        Some(path) => {
            let pb = PathBuf::from(path);
            if pb.is_absolute() {
                pb
            } else {
                p.out.join(pb)
            }
        }
        None => p.out.join("model.json"),
    }
}

fn cmd_analyze(cli: &Cli) -> Result<u8> {
    let p = prepare(cli)?;
    let model_path = resolve_model_path(&p);
    let text = fs::read_to_string(&model_path).with_context(|| {
        format!(
            "cannot read model checkpoint {} (run `train` first or point analysis.model at one)",
            model_path.display()
        )
    })?;
    let (encoder, decoder) = artifacts::parse_model_json(&text)?;
    let model = MlpAutoencoder::new(encoder, decoder)?;

    let spec = &p.config.manifold;
    let points =
        spec.sample_per_component(p.config.sampling.n_per_component, p.config.sampling.seed)?;
    let report = analyze(&model, spec, &points, &p.config.analysis.to_options())?;

    artifacts::write_file(&p.out, "analysis.json", &(report.to_json() + "\n"))?;
    let errors = artifacts::errors_csv(&points, &report.per_point_errors);
    artifacts::write_file(&p.out, "errors.csv", &errors)?;

    // Record the checkpoint as configured (relative paths resolve against the
    // output directory), not the resolved filesystem path: artifacts must not
    // depend on where `--out` points.
    let model_ref = match &p.config.analysis.model {
        Some(path) => path.clone(),
        None => "model.json".to_string(),
    };
    let n = report.per_point_errors.len() as f64;
    let results = json!({
        "model_path": model_ref,
        "sup_error_estimate": report.sup_error_estimate,
        "reach": report.reach,
        "slack": p.config.analysis.slack,
        "bound_satisfied": report.bound_satisfied,
        "n_samples": report.sample_count,
        "mean_error": report.per_point_errors.iter().sum::<f64>() / n,
        "max_error": report.per_point_errors.iter().fold(0.0, |a: f64, &b| a.max(b)),
    });
    let schemas = [("errors.csv", artifacts::ERRORS_CSV_HEADER.to_string())];
    let summary = artifacts::summary_json(
        "analyze",
        &p.config_sha256,
        p.started.elapsed().as_secs_f64(),
        &schemas,
        results,
    )?;
    artifacts::write_file(&p.out, "summary.json", &summary)?;
    Ok(exit_code(report.bound_satisfied))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn sweep_entry(seed: u64, run: &TrainedRun) -> Result<Value> {
    let mut value = serde_json::to_value(&run.metrics)?;
    let map = value.as_object_mut().expect("metrics serialize to an object");
    map.insert("seed".into(), json!(seed));
    map.insert("error".into(), Value::Null);
    map.insert(
        "sup_error_estimate".into(),
        json!(run.report.sup_error_estimate),
    );
    map.insert("bound_satisfied".into(), json!(run.report.bound_satisfied));
    Ok(value)
}

fn cmd_sweep(cli: &Cli) -> Result<u8> {
    if cli.seed.is_some() {
        bail!("sweep takes its seeds from sweep.seeds in the config; --seed is not allowed");
    }
    let p = prepare(cli)?;
    let seeds = p.config.sweep.seeds();

    let mut entries: Vec<Value> = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let member = p.config.with_seed(seed);
        let dir = p.out.join(format!("seed_{seed}"));
        let entry = (|| -> Result<Value> {
            fs::create_dir_all(&dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
            let started = Instant::now();
            let run = run_training(&member)?;
            write_train_artifacts(&dir, "train", &p.config_sha256, started, &run)?;
            sweep_entry(seed, &run)
        })();
        // A failed member is recorded, not fatal: the sweep exists to compare
        // seeds, including the ones that blow up.
        entries.push(match entry {
            Ok(v) => v,
            Err(err) => json!({ "seed": seed, "error": format!("{err:#}") }),
        });
    }

    let sweep = json!({ "seeds": seeds, "runs": entries });
    artifacts::write_file(&p.out, "sweep.json", &(to_json_string(&sweep)? + "\n"))?;

    let runs = sweep["runs"].as_array().expect("built as an array");
    let n_converged = runs
        .iter()
        .filter(|e| e.get("converged").and_then(Value::as_bool) == Some(true))
        .count();
    let n_errors = runs
        .iter()
        .filter(|e| e.get("error").is_some_and(|v| !v.is_null()))
        .count();
    let mut best: Option<(u64, f64)> = None;
    for e in runs {
        let (Some(seed), Some(loss)) = (
            e.get("seed").and_then(Value::as_u64),
            e.get("final_loss").and_then(Value::as_f64),
        ) else {
            continue;
        };
        if best.is_none_or(|(_, b)| loss < b) {
            best = Some((seed, loss));
        }
    }

    let results = json!({
        "seeds": seeds,
        "n_runs": seeds.len(),
        "n_converged": n_converged,
        "n_errors": n_errors,
        "best_seed": best.map(|(s, _)| s),
        "best_final_loss": best.map(|(_, l)| l),
    });
    let summary = artifacts::summary_json(
        "sweep",
        &p.config_sha256,
        p.started.elapsed().as_secs_f64(),
        &[],
        results,
    )?;
    artifacts::write_file(&p.out, "summary.json", &summary)?;
    Ok(0)
}
