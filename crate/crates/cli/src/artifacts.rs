//! Artifact writers shared by all commands: CSV tables, the model
//! checkpoint, and the `summary.json` envelope (schema version, command,
//! config hash, wall-clock duration, CSV schemas, command results). Floats
//! are always written with 17 significant digits, so artifacts are
//! bit-stable across identical runs.

use anyhow::{Context, Result};
use manifold_ae::geometry::Vec3;
use manifold_ae::jsonfmt::{format_float, to_json_string};
use manifold_ae::{Mlp, PointSet};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1";
pub const DECODED_CSV_HEADER: &str = "component_id,x,y,z,x_hat,y_hat,z_hat,err";
pub const ERRORS_CSV_HEADER: &str = "component_id,err";
pub const LOSS_CSV_HEADER: &str = "epoch,loss";

/// Header of `bottleneck.csv`: `component_id,u` for a 1-d bottleneck,
/// `component_id,u0,u1,...` for wider ones.
pub fn bottleneck_csv_header(latent_dim: usize) -> String {
    if latent_dim == 1 {
        "component_id,u".to_string()
    } else {
        let cols: Vec<String> = (0..latent_dim).map(|i| format!("u{i}")).collect();
        format!("component_id,{}", cols.join(","))
    }
}

pub fn config_sha256(raw: &str) -> String {
    let digest = Sha256::digest(raw.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn decoded_csv(points: &PointSet, decoded: &[Vec3], errors: &[f64]) -> String {
    let mut out = String::from(DECODED_CSV_HEADER);
    out.push('\n');
    for ((p, d), e) in points.points.iter().zip(decoded).zip(errors) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.component_id,
            format_float(p.position.x),
            format_float(p.position.y),
            format_float(p.position.z),
            format_float(d.x),
            format_float(d.y),
            format_float(d.z),
            format_float(*e),
        ));
    }
    out
}

pub fn bottleneck_csv(points: &PointSet, latents: &[Vec<f64>]) -> String {
    let latent_dim = latents.first().map_or(1, Vec::len);
    let mut out = bottleneck_csv_header(latent_dim);
    out.push('\n');
    for (p, z) in points.points.iter().zip(latents) {
        out.push_str(&p.component_id.to_string());
        for v in z {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Per-epoch mean training loss, 1-indexed epochs.
pub fn loss_csv(history: &[f64]) -> String {
    let mut out = String::from(LOSS_CSV_HEADER);
    out.push('\n');
    for (epoch, loss) in history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", epoch + 1, format_float(*loss)));
    }
    out
}

pub fn errors_csv(points: &PointSet, errors: &[f64]) -> String {
    let mut out = String::from(ERRORS_CSV_HEADER);
    out.push('\n');
    for (p, e) in points.points.iter().zip(errors) {
        out.push_str(&format!("{},{}\n", p.component_id, format_float(*e)));
    }
    out
}

/// Bundles the two checkpoints into one `model.json` document.
pub fn model_json(encoder: &Mlp, decoder: &Mlp) -> Result<String> {
    let enc: serde_json::Value = serde_json::from_str(&encoder.to_json())?;
    let dec: serde_json::Value = serde_json::from_str(&decoder.to_json())?;
    let value = serde_json::json!({ "encoder": enc, "decoder": dec });
    Ok(to_json_string(&value)? + "\n")
}

/// Restores the pair written by [`model_json`].
pub fn parse_model_json(text: &str) -> Result<(Mlp, Mlp)> {
    let value: serde_json::Value =
        serde_json::from_str(text).context("model file is not valid JSON")?;
    let mut nets = Vec::with_capacity(2);
    for key in ["encoder", "decoder"] {
        let sub = value
            .get(key)
            .with_context(|| format!("model file has no `{key}` entry"))?;
        let net = Mlp::from_json(&serde_json::to_string(sub)?)
            .with_context(|| format!("invalid `{key}` checkpoint"))?;
        nets.push(net);
    }
    let decoder = nets.pop().expect("two entries were pushed");
    let encoder = nets.pop().expect("two entries were pushed");
    Ok((encoder, decoder))
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: &'a str,
    command: &'a str,
    config_sha256: &'a str,
    duration_seconds: f64,
    csv_schemas: BTreeMap<&'a str, String>,
    results: serde_json::Value,
}

/// Renders `summary.json`. `csv_schemas` records the exact header of every
/// CSV the command wrote, versioning the schemas alongside the data.
pub fn summary_json(
    command: &str,
    config_sha256: &str,
    duration_seconds: f64,
    csv_schemas: &[(&str, String)],
    results: serde_json::Value,
) -> Result<String> {
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command,
        config_sha256,
        duration_seconds,
        csv_schemas: csv_schemas.iter().map(|(k, v)| (*k, v.clone())).collect(),
        results,
    };
    Ok(to_json_string(&summary)? + "\n")
}
