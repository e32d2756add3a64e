//! Result directories and run manifests.
//!
//! Results for a configuration live in `<output_dir>/<command>/<config-hash>/`
//! and are byte-identical across reruns. Every run also adds a new manifest
//! under `<output_dir>/manifests/`; existing manifests are never rewritten.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST_DIR: &str = "manifests";
pub const MANIFEST_FORMAT: u32 = 1;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
    /// Outcome of the run's checks, when it has any.
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versions {
    pub rmflab: String,
    pub manifest_format: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub created_unix_ms: u64,
    /// Relative to the output directory, `/`-separated.
    pub result_dir: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactRecord>,
    pub passed: Option<bool>,
    pub summary: Value,
    pub versions: Versions,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

/// Writes results and a fresh manifest; returns the manifest path.
pub fn persist(cfg: &ExperimentConfig, out: &RunOutput) -> Result<PathBuf, CliError> {
    let hash = cfg.hash();
    let rel = format!("{}/{}", cfg.command.name(), hash);
    let dir = cfg.output_dir.join(cfg.command.name()).join(&hash);
    fs::create_dir_all(&dir)?;

    let mut files = vec![
        Artifact { name: "config.json".into(), bytes: to_json_bytes(cfg) },
        Artifact {
            name: "summary.json".into(),
            bytes: to_json_bytes(&serde_json::json!({ "passed": out.passed, "summary": out.summary })),
        },
    ];
    files.extend(out.artifacts.iter().map(|a| Artifact { name: a.name.clone(), bytes: a.bytes.clone() }));
    let mut records = Vec::with_capacity(files.len());
    for f in &files {
        fs::write(dir.join(&f.name), &f.bytes)?;
        records.push(ArtifactRecord {
            path: format!("{rel}/{}", f.name),
            sha256: sha256_hex(&f.bytes),
            bytes: f.bytes.len() as u64,
        });
    }

    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    let manifest = Manifest {
        command: cfg.command.name().into(),
        config_hash: hash.clone(),
        created_unix_ms: created,
        result_dir: rel,
        config: cfg.clone(),
        artifacts: records,
        passed: out.passed,
        summary: out.summary.clone(),
        versions: Versions { rmflab: env!("CARGO_PKG_VERSION").into(), manifest_format: MANIFEST_FORMAT },
    };
    let manifests = cfg.output_dir.join(MANIFEST_DIR);
    fs::create_dir_all(&manifests)?;
    let bytes = to_json_bytes(&manifest);
    for attempt in 0u32.. {
        let suffix = if attempt == 0 { String::new() } else { format!("-{attempt}") };
        let path = manifests.join(format!("{created}_{}_{hash}{suffix}.json", cfg.command.name()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                f.write_all(&bytes)?;
                return Ok(path);
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("manifest names are unbounded")
}

/// Creation order: file name without the collision suffix, then the suffix.
fn manifest_order(path: &Path) -> (String, u32) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.rsplit_once('-').and_then(|(head, n)| Some((head, n.parse().ok()?))) {
        Some((head, n)) => (head.to_string(), n),
        None => (stem, 0),
    }
}

/// All manifests under `output_dir`, in creation order.
pub fn load_manifests(output_dir: &Path) -> Result<Vec<Manifest>, CliError> {
    let dir = output_dir.join(MANIFEST_DIR);
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(CliError::Config(format!("no manifests under {}", dir.display())))
        }
        Err(e) => return Err(e.into()),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort_by_cached_key(|p| manifest_order(p));
    if paths.is_empty() {
        return Err(CliError::Config(format!("no manifests under {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}
