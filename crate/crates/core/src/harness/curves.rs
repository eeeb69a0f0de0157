//! Loss-curve CSVs and epochs-to-threshold summaries.

use super::train::TrainTrace;
use crate::error::{Error, Result};
use crate::ranking::Level;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const CURVE_HEADER: [&str; 6] = ["epoch", "L_point", "L_pair", "L_list", "joint", "dev_map"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("csv: {other:?}")),
    }
}

/// One row per epoch; absent levels leave their column empty.
pub fn write_curve(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CURVE_HEADER).map_err(csv_err)?;
    for r in &trace.epochs {
        w.write_record([
            r.epoch.to_string(),
            cell(r.loss_point),
            cell(r.loss_pair),
            cell(r.loss_list),
            r.joint.to_string(),
            r.dev_map.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Full per-epoch trace including MRR, train MAP and timing.
pub fn write_trace(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "epoch", "L_point", "L_pair", "L_list", "joint", "dev_map", "dev_mrr", "train_map", "wall_secs", "best",
    ])
    .map_err(csv_err)?;
    for r in &trace.epochs {
        w.write_record([
            r.epoch.to_string(),
            cell(r.loss_point),
            cell(r.loss_pair),
            cell(r.loss_list),
            r.joint.to_string(),
            r.dev_map.to_string(),
            r.dev_mrr.to_string(),
            cell(r.train_map),
            r.wall_secs.to_string(),
            u8::from(r.epoch == trace.best_epoch).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub scheme: String,
    pub seed: Option<u64>,
    /// First epoch with `L_list <= list_threshold`.
    pub epochs_to_list_loss: Option<f64>,
    /// First epoch with `dev_map >= dev_map_threshold`.
    pub epochs_to_dev_map: Option<f64>,
    pub runs: usize,
    /// Runs that reached the dev-MAP threshold.
    pub reached: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSummary {
    pub list_threshold: f64,
    pub dev_map_threshold: f64,
    pub files: Vec<PathBuf>,
    pub rows: Vec<ThresholdRow>,
}

impl CurveSummary {
    /// The per-scheme mean row.
    pub fn mean(&self, scheme: &str) -> Option<&ThresholdRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.seed.is_none())
    }
}

fn mean(xs: &[Option<usize>]) -> Option<f64> {
    let hit: Vec<f64> = xs.iter().flatten().map(|&x| x as f64).collect();
    (!hit.is_empty()).then(|| hit.iter().sum::<f64>() / hit.len() as f64)
}

/// Writes `curve_<scheme>_seed<seed>.csv` per trace and `summary.csv` with
/// per-run and per-scheme mean epochs-to-threshold (means over runs that
/// reached the threshold).
pub fn emit_curves(
    out_dir: &Path,
    traces: &[TrainTrace],
    list_threshold: f64,
    dev_map_threshold: f64,
) -> Result<CurveSummary> {
    if traces.is_empty() {
        return Err(Error::Data("no traces to plot".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut schemes: Vec<&str> = Vec::new();
    for t in traces {
        let path = out_dir.join(format!("curve_{}_seed{}.csv", t.scheme.replace('/', "_"), t.seed));
        write_curve(&path, t)?;
        files.push(path);
        let list = t.epochs_to_loss(Level::List, list_threshold);
        let dev = t.epochs_to_dev_map(dev_map_threshold);
        rows.push(ThresholdRow {
            scheme: t.scheme.clone(),
            seed: Some(t.seed),
            epochs_to_list_loss: list.map(|e| e as f64),
            epochs_to_dev_map: dev.map(|e| e as f64),
            runs: 1,
            reached: usize::from(dev.is_some()),
        });
        if !schemes.contains(&t.scheme.as_str()) {
            schemes.push(&t.scheme);
        }
    }
    for s in schemes {
        let mine: Vec<&TrainTrace> = traces.iter().filter(|t| t.scheme == s).collect();
        let list: Vec<_> = mine.iter().map(|t| t.epochs_to_loss(Level::List, list_threshold)).collect();
        let dev: Vec<_> = mine.iter().map(|t| t.epochs_to_dev_map(dev_map_threshold)).collect();
        rows.push(ThresholdRow {
            scheme: s.to_string(),
            seed: None,
            epochs_to_list_loss: mean(&list),
            epochs_to_dev_map: mean(&dev),
            runs: mine.len(),
            reached: dev.iter().flatten().count(),
        });
    }
    let summary_path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path).map_err(csv_err)?;
    w.write_record([
        "scheme",
        "seed",
        &format!("epochs_to_L_list<={list_threshold}"),
        &format!("epochs_to_dev_map>={dev_map_threshold}"),
        "runs",
        "reached",
    ])
    .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.scheme.clone(),
            r.seed.map(|s| s.to_string()).unwrap_or_else(|| "mean".into()),
            cell(r.epochs_to_list_loss),
            cell(r.epochs_to_dev_map),
            r.runs.to_string(),
            r.reached.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    files.push(summary_path);
    Ok(CurveSummary { list_threshold, dev_map_threshold, files, rows })
}
