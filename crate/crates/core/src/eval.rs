//! Confusion matrices, precision/recall/F1 and report rendering.
//!
//! Orientation: rows are true labels, columns are predicted labels, both in
//! the order negative, neutral, positive. A metric whose denominator is zero
//! is reported as 0 and sets [`MetricsReport::zero_division`].
//!
//! CSV reports have one row per model with the columns in [`CSV_COLUMNS`]
//! followed by `cm_<true>_<pred>` for the nine cells (`neg`, `neu`, `pos`).
//! JSON-lines reports are one [`ReportRow`] object per line.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDocument;
use crate::label::{Label, NUM_CLASSES};
use crate::models::{ModelBundle, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("nothing to evaluate")]
    EmptyMatrix,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot parse report: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    cells: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_cells(cells: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        ConfusionMatrix { cells }
    }

    pub fn cells(&self) -> &[[u64; NUM_CLASSES]; NUM_CLASSES] {
        &self.cells
    }

    pub fn get(&self, truth: Label, predicted: Label) -> u64 {
        self.cells[truth.index()][predicted.index()]
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        self.cells[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.cells[c][c]).sum()
    }

    /// Number of documents whose true label is `c`.
    pub fn support(&self, c: Label) -> u64 {
        self.cells[c.index()].iter().sum()
    }

    /// Number of documents predicted as `c`.
    pub fn predicted(&self, c: Label) -> u64 {
        self.cells.iter().map(|row| row[c.index()]).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Indexed by label.
    pub per_class: [ClassMetrics; NUM_CLASSES],
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    pub weighted: Averages,
    pub total: u64,
    /// Set when any metric hit a 0/0 and was reported as 0.
    pub zero_division: bool,
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            predicted: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cm.record(t, p);
    }
    Ok(cm)
}

fn ratio(num: f64, den: f64, zero_division: &mut bool) -> f64 {
    if den == 0.0 {
        *zero_division = true;
        0.0
    } else {
        num / den
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut zero_division = false;
    let per_class: [ClassMetrics; NUM_CLASSES] = std::array::from_fn(|c| {
        let label = Label::ALL[c];
        let tp = cm.get(label, label) as f64;
        let precision = ratio(tp, cm.predicted(label) as f64, &mut zero_division);
        let recall = ratio(tp, cm.support(label) as f64, &mut zero_division);
        let f1 = ratio(2.0 * precision * recall, precision + recall, &mut zero_division);
        ClassMetrics {
            precision,
            recall,
            f1,
            support: cm.support(label),
        }
    });

    let n = total as f64;
    let k = NUM_CLASSES as f64;
    let avg = |pick: fn(&ClassMetrics) -> f64| -> (f64, f64) {
        let macro_avg = per_class.iter().map(pick).sum::<f64>() / k;
        let weighted = per_class
            .iter()
            .map(|m| m.support as f64 / n * pick(m))
            .sum::<f64>();
        (macro_avg, weighted)
    };
    let (mp, wp) = avg(|m| m.precision);
    let (mr, wr) = avg(|m| m.recall);
    let (mf, wf) = avg(|m| m.f1);

    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / n,
        per_class,
        macro_avg: Averages {
            precision: mp,
            recall: mr,
            f1: mf,
        },
        weighted: Averages {
            precision: wp,
            recall: wr,
            f1: wf,
        },
        total,
        zero_division,
    })
}

/// Support-weighted F1 of a prediction run; the grid-search score.
pub fn weighted_f1(y_true: &[Label], y_pred: &[Label]) -> Result<f64, EvalError> {
    Ok(metrics(&confusion(y_true, y_pred)?)?.weighted.f1)
}

/// Run the full text pipeline on every document and score the predictions.
pub fn evaluate(
    bundle: &ModelBundle,
    test: &[LabeledDocument],
) -> Result<(ConfusionMatrix, MetricsReport), EvalError> {
    let predicted = test
        .par_iter()
        .map(|doc| bundle.predict_text(&doc.text).map(|p| p.label))
        .collect::<Result<Vec<_>, _>>()?;
    let truth: Vec<Label> = test.iter().map(|d| d.label).collect();
    let cm = confusion(&truth, &predicted)?;
    let report = metrics(&cm)?;
    Ok((cm, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    PlainTable,
    Csv,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain-table" | "table" => Ok(ReportFormat::PlainTable),
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" | "jsonl" => Ok(ReportFormat::JsonLines),
            other => Err(format!(
                "unknown format {other:?} (expected plain-table, csv or json-lines)"
            )),
        }
    }
}

/// One evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
}

impl ReportRow {
    pub fn new(model: impl Into<String>, confusion: ConfusionMatrix, metrics: MetricsReport) -> Self {
        ReportRow {
            model: model.into(),
            metrics,
            confusion,
        }
    }
}

/// Leading CSV columns; the nine confusion cells follow.
pub const CSV_COLUMNS: [&str; 8] = [
    "model",
    "accuracy",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "precision_macro",
    "recall_macro",
    "f1_macro",
];

pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = CSV_COLUMNS.iter().map(|c| c.to_string()).collect();
    for t in Label::ALL {
        for p in Label::ALL {
            cols.push(format!("cm_{}_{}", t.short(), p.short()));
        }
    }
    cols
}

/// Values for `CSV_COLUMNS[1..]`.
fn headline(m: &MetricsReport) -> [f64; 7] {
    [
        m.accuracy,
        m.weighted.precision,
        m.weighted.recall,
        m.weighted.f1,
        m.macro_avg.precision,
        m.macro_avg.recall,
        m.macro_avg.f1,
    ]
}

fn csv_record(row: &ReportRow) -> Vec<String> {
    let mut out = vec![row.model.clone()];
    out.extend(headline(&row.metrics).iter().map(f64::to_string));
    out.extend(row.confusion.cells().iter().flatten().map(u64::to_string));
    out
}

/// `(metric name, value)` pairs in plain-table order.
fn named_values(row: &ReportRow) -> Vec<(String, String)> {
    let m = &row.metrics;
    let mut out: Vec<(String, String)> = CSV_COLUMNS[1..]
        .iter()
        .zip(headline(m))
        .map(|(name, v)| (name.to_string(), fmt4(v)))
        .collect();
    for label in Label::ALL {
        let c = &m.per_class[label.index()];
        let s = label.short();
        out.push((format!("precision_{s}"), fmt4(c.precision)));
        out.push((format!("recall_{s}"), fmt4(c.recall)));
        out.push((format!("f1_{s}"), fmt4(c.f1)));
        out.push((format!("support_{s}"), c.support.to_string()));
    }
    for t in Label::ALL {
        for p in Label::ALL {
            out.push((
                format!("cm_{}_{}", t.short(), p.short()),
                row.confusion.get(t, p).to_string(),
            ));
        }
    }
    out
}

fn plain_table(rows: &[ReportRow]) -> String {
    let columns: Vec<Vec<(String, String)>> = rows.iter().map(named_values).collect();
    let names: Vec<String> = named_values(&ReportRow::new(
        "",
        ConfusionMatrix::default(),
        MetricsReport::default(),
    ))
    .into_iter()
    .map(|(n, _)| n)
    .collect();

    let first = names.iter().map(String::len).max().unwrap_or(6);
    let widths: Vec<usize> = rows.iter().map(|r| r.model.len().max(8)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<first$}", "metric");
    for (r, w) in rows.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", r.model);
    }
    out.push('\n');
    for (k, name) in names.iter().enumerate() {
        let _ = write!(out, "{name:<first$}");
        for (col, w) in columns.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", col[k].1);
        }
        out.push('\n');
    }
    if rows.iter().any(|r| r.metrics.zero_division) {
        out.push_str("note: some metrics had a zero denominator and are reported as 0\n");
    }
    out
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

pub fn render_report<W: Write>(
    rows: &[ReportRow],
    format: ReportFormat,
    mut sink: W,
) -> std::io::Result<()> {
    match format {
        ReportFormat::PlainTable => sink.write_all(plain_table(rows).as_bytes()),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(csv_header())?;
            for row in rows {
                w.write_record(csv_record(row))?;
            }
            w.flush()
        }
        ReportFormat::JsonLines => {
            for row in rows {
                serde_json::to_writer(&mut sink, row)?;
                sink.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

/// Inverse of the CSV rendering. Per-class metrics are recomputed from the
/// confusion cells and checked against the stored aggregates.
pub fn parse_csv_report<R: std::io::Read>(source: R) -> Result<Vec<ReportRow>, EvalError> {
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| EvalError::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != csv_header() {
        return Err(EvalError::Parse("unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EvalError::Parse(e.to_string()))?;
        let mut cells = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (k, cell) in cells.iter_mut().flatten().enumerate() {
            *cell = record[CSV_COLUMNS.len() + k]
                .parse()
                .map_err(|e| EvalError::Parse(format!("cell {k}: {e}")))?;
        }
        let cm = ConfusionMatrix::from_cells(cells);
        let m = metrics(&cm)?;
        let stored: Vec<f64> = (1..CSV_COLUMNS.len())
            .map(|i| record[i].parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EvalError::Parse(e.to_string()))?;
        if stored.iter().zip(&headline(&m)).any(|(a, b)| a != b) {
            return Err(EvalError::Parse(format!(
                "row {:?}: metric columns disagree with the confusion cells",
                &record[0]
            )));
        }
        rows.push(ReportRow::new(&record[0], cm, m));
    }
    Ok(rows)
}

pub fn parse_json_lines_report<R: BufRead>(source: R) -> Result<Vec<ReportRow>, EvalError> {
    let mut rows = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse(e.to_string()))?);
    }
    Ok(rows)
}
