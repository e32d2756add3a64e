//! Aggregation of persisted runs into a summary and plot-ready tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::json;

use crate::error::CliError;
use crate::store::{load_manifests, to_json_bytes, Manifest};

/// `(command, artifact, combined table)`.
const COMBINED: [(&str, &str, &str); 5] = [
    ("simulate", "sign_changes.csv", "sign_changes_vs_x.csv"),
    ("signchanges", "sign_change_sweep.csv", "sign_change_sweeps.csv"),
    ("sup-scan", "sup_scan.csv", "sup_scan.csv"),
    ("chaining", "oscillation.csv", "oscillation.csv"),
    ("concentration", "step2.csv", "step2.csv"),
];

/// Latest manifest per result directory, ordered by result directory.
pub fn latest_runs(manifests: Vec<Manifest>) -> Vec<Manifest> {
    let mut by_dir = BTreeMap::new();
    for m in manifests {
        by_dir.insert(m.result_dir.clone(), m);
    }
    by_dir.into_values().collect()
}

/// Writes `report/summary.json` and the combined tables; returns the number of runs.
pub fn write_report(output_dir: &Path) -> Result<usize, CliError> {
    let runs = latest_runs(load_manifests(output_dir)?);
    let dir = output_dir.join("report");
    fs::create_dir_all(&dir)?;

    let entries: Vec<_> = runs
        .iter()
        .map(|m| {
            json!({
                "command": m.command,
                "config_hash": m.config_hash,
                "result_dir": m.result_dir,
                "created_unix_ms": m.created_unix_ms,
                "passed": m.passed,
                "summary": m.summary,
            })
        })
        .collect();
    let failed = runs.iter().filter(|m| m.passed == Some(false)).count();
    fs::write(
        dir.join("summary.json"),
        to_json_bytes(&json!({ "runs": entries, "failed_runs": failed })),
    )?;

    for (command, artifact, combined) in COMBINED {
        let sources: Vec<_> = runs.iter().filter(|m| m.command == command).collect();
        if sources.is_empty() {
            continue;
        }
        let bytes = combine(output_dir, &sources, artifact)?;
        fs::write(dir.join(combined), bytes)?;
    }
    Ok(runs.len())
}

/// Concatenates one artifact across runs, prefixing each row with its config hash.
fn combine(output_dir: &Path, runs: &[&Manifest], artifact: &str) -> Result<Vec<u8>, CliError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(Vec::new());
    let mut header_written = false;
    for m in runs {
        let path = output_dir.join(&m.result_dir).join(artifact);
        let mut reader = match csv::Reader::from_path(&path) {
            Ok(r) => r,
            Err(e) => return Err(CliError::Resource(format!("{}: {e}", path.display()))),
        };
        let csv_err = |e: csv::Error| CliError::Resource(format!("{}: {e}", path.display()));
        if !header_written {
            let header = reader.headers().map_err(csv_err)?.clone();
            out.write_record(std::iter::once("config_hash").chain(header.iter())).map_err(csv_err)?;
            header_written = true;
        }
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            out.write_record(std::iter::once(m.config_hash.as_str()).chain(record.iter())).map_err(csv_err)?;
        }
    }
    out.into_inner().map_err(|e| CliError::Resource(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Command, ExperimentConfig, Params};
    use crate::store::{persist, RunOutput};

    #[test]
    fn reruns_of_one_config_are_reported_once() {
        let tmp = tempfile::tempdir().unwrap();
        let p = Params { output_dir: Some(tmp.path().into()), ..Params::default() };
        let cfg = ExperimentConfig::resolve(Command::Sequences, p).unwrap();
        for passed in [false, true] {
            let out = RunOutput { artifacts: vec![], summary: json!({}), passed: Some(passed) };
            persist(&cfg, &out).unwrap();
        }
        assert_eq!(write_report(tmp.path()).unwrap(), 1);
        let runs = latest_runs(load_manifests(tmp.path()).unwrap());
        assert_eq!(runs[0].passed, Some(true));
    }
}
