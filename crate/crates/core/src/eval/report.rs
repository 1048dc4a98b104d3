use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::contact::ContactInterval;
use super::location::median_with_misses;
use super::EvalOptions;
use crate::data::Direction;
use crate::error::{Error, Result};

pub const REPORT_JSON: &str = "eval_report.json";
pub const REPORT_CSV: &str = "eval_sequences.csv";
pub const CURVES_DIR: &str = "curves";

/// Metrics of one test sequence. Fields of the other direction stay empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEval {
    pub id: String,
    pub split: String,
    pub gt_interval: Option<ContactInterval>,
    pub pred_interval: Option<ContactInterval>,
    /// Frames; present when both intervals were detected.
    pub contact_error: Option<usize>,
    /// Ground truth shows contact but the prediction's curve is flat.
    pub contact_missed: bool,
    /// Mean tracked-marker distance (px).
    pub marker_error: Option<f64>,
    pub low_confidence_frames: usize,
    pub gt_curve: Vec<f64>,
    pub pred_curve: Vec<f64>,
    /// Contact midpoint frame used for localization.
    pub location_frame: Option<usize>,
    /// Residual centroid to contact centre (px).
    pub location_error: Option<f64>,
    pub location_missed: bool,
}

impl SequenceEval {
    pub fn new(id: &str, split: &str) -> Self {
        Self {
            id: id.to_string(),
            split: split.to_string(),
            gt_interval: None,
            pred_interval: None,
            contact_error: None,
            contact_missed: false,
            marker_error: None,
            low_confidence_frames: 0,
            gt_curve: Vec::new(),
            pred_curve: Vec::new(),
            location_frame: None,
            location_error: None,
            location_missed: false,
        }
    }
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                n: 0,
                mean: None,
                std: None,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            n: values.len(),
            mean: Some(mean),
            std: Some(var.sqrt()),
        }
    }
}

fn rate(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Aggregates over one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: String,
    pub sequences: usize,
    /// Over sequences where both intervals were detected.
    pub contact_error: Stat,
    /// Share of ground-truth contacts the prediction missed.
    pub contact_miss_rate: Option<f64>,
    pub marker_error: Stat,
    /// Over located sequences only.
    pub location_error: Stat,
    /// Median over sequences with contact, misses counting as infinite.
    pub location_error_median: Option<f64>,
    pub location_miss_rate: Option<f64>,
}

impl SplitSummary {
    pub fn from_entries(split: &str, entries: &[&SequenceEval]) -> Self {
        let contact: Vec<f64> = entries.iter().filter_map(|e| e.contact_error.map(|v| v as f64)).collect();
        let with_gt = entries.iter().filter(|e| e.gt_interval.is_some()).count();
        let missed = entries.iter().filter(|e| e.contact_missed).count();
        let marker: Vec<f64> = entries.iter().filter_map(|e| e.marker_error).collect();
        let located: Vec<Option<f64>> = entries
            .iter()
            .filter(|e| e.location_frame.is_some())
            .map(|e| e.location_error)
            .collect();
        let hits: Vec<f64> = located.iter().flatten().copied().collect();
        Self {
            split: split.to_string(),
            sequences: entries.len(),
            contact_error: Stat::of(&contact),
            contact_miss_rate: rate(missed, with_gt),
            marker_error: Stat::of(&marker),
            location_error: Stat::of(&hits),
            location_error_median: median_with_misses(&located),
            location_miss_rate: rate(located.len() - hits.len(), located.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub direction: Direction,
    pub options: EvalOptions,
    /// Step of the evaluated checkpoint; `None` for ground truth.
    pub checkpoint_step: Option<u64>,
    pub splits: Vec<SplitSummary>,
    pub sequences: Vec<SequenceEval>,
}

impl EvalReport {
    pub fn new(direction: Direction, options: &EvalOptions, sequences: Vec<SequenceEval>) -> Self {
        let mut names: Vec<&str> = Vec::new();
        for s in &sequences {
            if !names.contains(&s.split.as_str()) {
                names.push(&s.split);
            }
        }
        let splits = names
            .iter()
            .map(|name| {
                let entries: Vec<&SequenceEval> = sequences.iter().filter(|s| s.split == *name).collect();
                SplitSummary::from_entries(name, &entries)
            })
            .collect();
        Self {
            direction,
            options: options.clone(),
            checkpoint_step: None,
            splits,
            sequences,
        }
    }

    pub fn split(&self, name: &str) -> Option<&SplitSummary> {
        self.splits.iter().find(|s| s.split == name)
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    split: &'a str,
    id: &'a str,
    gt_t_l: Option<usize>,
    gt_t_r: Option<usize>,
    pred_t_l: Option<usize>,
    pred_t_r: Option<usize>,
    contact_error: Option<usize>,
    contact_missed: bool,
    marker_error: Option<f64>,
    low_confidence_frames: usize,
    location_frame: Option<usize>,
    location_error: Option<f64>,
    location_missed: bool,
}

/// Write the JSON report and the per-sequence CSV into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(REPORT_JSON);
    let json = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;

    let path = dir.join(REPORT_CSV);
    let csv_err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    for s in &report.sequences {
        w.serialize(CsvRow {
            split: &s.split,
            id: &s.id,
            gt_t_l: s.gt_interval.map(|i| i.t_l),
            gt_t_r: s.gt_interval.map(|i| i.t_r),
            pred_t_l: s.pred_interval.map(|i| i.t_l),
            pred_t_r: s.pred_interval.map(|i| i.t_r),
            contact_error: s.contact_error,
            contact_missed: s.contact_missed,
            marker_error: s.marker_error,
            low_confidence_frames: s.low_confidence_frames,
            location_frame: s.location_frame,
            location_error: s.location_error,
            location_missed: s.location_missed,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_report(dir: &Path) -> Result<EvalReport> {
    let path = dir.join(REPORT_JSON);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingData(format!("{} not found", path.display())),
        _ => Error::io(&path, e),
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}
