use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use wnprobe::probes::ProbeResult;

use crate::commands::{read_json, to_json};
use crate::error::CliError;
use crate::output::{refuse_clobber, write_atomic};
use crate::Format;

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub layer: String,
    pub target: String,
    pub metric_name: String,
    pub train_value: Option<f64>,
    pub test_value: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn probe_rows(results: &[ProbeResult]) -> Vec<Row> {
    results
        .iter()
        .map(|r| Row {
            layer: r.layer_label(),
            target: r.target.to_string(),
            metric_name: r.metric.as_str().to_string(),
            train_value: r.train_value,
            test_value: r.test_value,
            n_train: r.n_train,
            n_test: r.n_test,
        })
        .collect()
}

/// Undefined metrics are written as the literal `undefined`.
pub fn write_rows_csv<W: Write>(rows: &[Row], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["layer", "target", "metric_name", "train_value", "test_value", "n_train", "n_test"])?;
    let v = |x: Option<f64>| x.map_or("undefined".to_string(), |x| format!("{x}"));
    for r in rows {
        w.write_record([
            r.layer.clone(),
            r.target.clone(),
            r.metric_name.clone(),
            v(r.train_value),
            v(r.test_value),
            r.n_train.to_string(),
            r.n_test.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::config(e.to_string()))?;
    Ok(())
}

fn probe_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("probe_") && name.ends_with(".json")
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn collect(inputs: &[PathBuf]) -> Result<Vec<Row>, CliError> {
    let mut results = Vec::new();
    for dir in inputs {
        for f in probe_files(dir)? {
            let r: ProbeResult = read_json(&f).map_err(|e| CliError::format(e.message))?;
            results.push(r);
        }
    }
    Ok(probe_rows(&results))
}

pub fn report(inputs: &[PathBuf], format: Format, out: Option<&Path>, overwrite: bool) -> Result<(), CliError> {
    if let Some(p) = out {
        refuse_clobber(p, overwrite)?;
    }
    let rows = collect(inputs)?;
    let bytes = match format {
        Format::Csv => {
            let mut b = Vec::new();
            write_rows_csv(&rows, &mut b)?;
            b
        }
        Format::Json => to_json(&rows),
    };
    match out {
        Some(p) => write_atomic(p, &bytes),
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::config(e.to_string())),
    }
}
