//! `pbd report`: one row per distinct experiment configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pbd_core::eval::ExperimentReport;
use pbd_core::rng::fnv1a;

use crate::{CliError, ReportArgs};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub scheme: String,
    pub config: String,
    pub hash: String,
    pub folds: String,
    pub accuracy: f64,
    pub mean_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub baseline_f1: f64,
    pub source: PathBuf,
}

/// Hash of the full experiment specification; identical configs collide.
pub fn config_hash(report: &ExperimentReport) -> Result<String, CliError> {
    let json = serde_json::to_string(&report.spec).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(format!("{:016x}", fnv1a(json.as_bytes())))
}

fn describe(r: &ExperimentReport) -> String {
    let s = &r.spec;
    let windows: Vec<String> = s.window.lengths_s.iter().map(|w| format!("{w}s")).collect();
    format!(
        "{} {:?} {} {}-pad {} {}",
        s.labels,
        s.model.architecture,
        match s.model.head {
            pbd_core::HeadKind::FrameLevel => "frame",
            pbd_core::HeadKind::PerTimestep => "per-timestep",
        },
        format!("{:?}", s.window.padding).to_lowercase(),
        windows.join("+"),
        s.window.activity.map_or("all", |a| a.slug())
    )
}

pub fn load_row(path: &Path) -> Result<Row, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read report {}: {e}", path.display())))?;
    let report: ExperimentReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("malformed report {}: {e}", path.display())))?;
    let pooled = report.pooled.as_ref();
    let get = |f: fn(&pbd_core::eval::MetricsReport) -> f64| pooled.map_or(f64::NAN, f);
    Ok(Row {
        scheme: report.scheme.clone(),
        config: describe(&report),
        hash: config_hash(&report)?,
        folds: format!(
            "{}/{}",
            report.folds.len() - report.failed_folds.len(),
            report.folds.len()
        ),
        accuracy: get(|m| m.accuracy),
        mean_f1: get(|m| m.mean_f1),
        mean_precision: get(|m| m.mean_precision),
        mean_recall: get(|m| m.mean_recall),
        baseline_f1: report.baseline.as_ref().map_or(f64::NAN, |b| b.mean_f1),
        source: path.to_path_buf(),
    })
}

/// Keeps the first row of every configuration hash.
pub fn merge(paths: &[PathBuf]) -> Result<(Vec<Row>, usize), CliError> {
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for p in paths {
        let row = load_row(p)?;
        if seen.insert(row.hash.clone()) {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }
    Ok((rows, dropped))
}

pub fn to_csv(rows: &[Row]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record([
        "scheme",
        "config",
        "config_hash",
        "folds_ok",
        "accuracy",
        "mean_f1",
        "mean_precision",
        "mean_recall",
        "baseline_f1",
        "source",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.config.clone(),
            r.hash.clone(),
            r.folds.clone(),
            r.accuracy.to_string(),
            r.mean_f1.to_string(),
            r.mean_precision.to_string(),
            r.mean_recall.to_string(),
            r.baseline_f1.to_string(),
            r.source.display().to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Data(e.to_string()))
}

pub fn to_text(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.config.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<width$} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8}",
        "scheme", "config", "folds", "Acc", "F_m", "Pre", "Re", "base F_m"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:<width$} {:>7} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>8.4}",
            r.scheme, r.config, r.folds, r.accuracy, r.mean_f1, r.mean_precision, r.mean_recall, r.baseline_f1
        );
    }
    out
}

pub fn run(a: ReportArgs) -> Result<(), CliError> {
    if a.reports.is_empty() {
        return Err(CliError::Usage("report needs at least one report file".into()));
    }
    let (rows, dropped) = merge(&a.reports)?;
    let out = a.out_dir.unwrap_or_else(|| PathBuf::from("pbd-out"));
    fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    let text = to_text(&rows);
    for (name, body) in [("summary.csv", to_csv(&rows)?), ("summary.txt", text.clone())] {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    print!("{text}");
    if dropped > 0 {
        eprintln!("{dropped} duplicate configuration(s) skipped");
    }
    Ok(())
}
