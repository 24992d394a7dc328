//! Labelled dataset loading and stratified train/test splitting.
//!
//! Input is RFC-4180 CSV with the header `textID,text,selected_text,sentiment`
//! (`selected_text` may be omitted). Invalid UTF-8 is replaced with U+FFFD;
//! structural problems are hard errors.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::label::{Label, NUM_CLASSES};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RATIO: f64 = 0.8;

const COL_ID: &str = "textID";
const COL_TEXT: &str = "text";
const COL_SELECTED: &str = "selected_text";
const COL_SENTIMENT: &str = "sentiment";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("unknown sentiment label {label:?} at line {line}")]
    UnknownLabel { line: u64, label: String },
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("empty document id at line {0}")]
    EmptyId(u64),
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error("i/o error reading dataset: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub selected_text: Option<String>,
}

impl LabeledDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        LabeledDocument {
            id: id.into(),
            text: text.into(),
            label,
            selected_text: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
    pub seed: u64,
    pub ratio: f64,
}

fn lossy(field: &[u8]) -> String {
    String::from_utf8_lossy(field).into_owned()
}

fn malformed(err: csv::Error) -> CorpusError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => CorpusError::MalformedRow {
            line,
            reason: format!("expected {expected_len} columns, found {len}"),
        },
        other => CorpusError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Parse a labelled CSV stream. Documents come back in file order.
pub fn load_csv<R: Read>(mut source: R) -> Result<Vec<LabeledDocument>, CorpusError> {
    let mut raw = Vec::new();
    source.read_to_end(&mut raw)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(raw.as_slice());

    let headers = reader.byte_headers().map_err(malformed)?.clone();
    let find = |name: &'static str| headers.iter().position(|h| h == name.as_bytes());
    let id_col = find(COL_ID).ok_or(CorpusError::MissingColumn(COL_ID))?;
    let text_col = find(COL_TEXT).ok_or(CorpusError::MissingColumn(COL_TEXT))?;
    let label_col = find(COL_SENTIMENT).ok_or(CorpusError::MissingColumn(COL_SENTIMENT))?;
    let selected_col = find(COL_SELECTED);

    let mut docs = Vec::new();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(malformed(e)),
        }
        let (line, start) = record
            .position()
            .map(|p| (p.line(), p.byte() as usize))
            .unwrap_or((0, 0));
        // The csv reader accepts an unterminated quote at EOF; we do not.
        if reader.is_done() && has_unbalanced_quotes(&raw[start.min(raw.len())..]) {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "unbalanced quotes".into(),
            });
        }
        let id = lossy(&record[id_col]);
        if id.is_empty() {
            return Err(CorpusError::EmptyId(line));
        }
        let raw_label = lossy(&record[label_col]);
        let label = raw_label
            .parse::<Label>()
            .map_err(|_| CorpusError::UnknownLabel {
                line,
                label: raw_label.clone(),
            })?;
        docs.push(LabeledDocument {
            id,
            text: lossy(&record[text_col]),
            label,
            selected_text: selected_col.map(|c| lossy(&record[c])),
        });
    }
    Ok(docs)
}

// An unterminated quoted field swallows the rest of the input, so the raw
// bytes of the final record carry an odd number of quote characters.
fn has_unbalanced_quotes(tail: &[u8]) -> bool {
    tail.iter().filter(|&&b| b == b'"').count() % 2 == 1
}

/// Serialize documents back to the canonical four-column layout.
pub fn write_csv<W: Write>(docs: &[LabeledDocument], sink: W) -> Result<(), CorpusError> {
    let mut writer = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        other => CorpusError::Io(std::io::Error::other(format!("{other:?}"))),
    };
    writer
        .write_record([COL_ID, COL_TEXT, COL_SELECTED, COL_SENTIMENT])
        .map_err(io)?;
    for d in docs {
        writer
            .write_record([
                d.id.as_str(),
                d.text.as_str(),
                d.selected_text.as_deref().unwrap_or(""),
                d.label.as_str(),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn label_distribution(docs: &[LabeledDocument]) -> BTreeMap<Label, usize> {
    let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    for d in docs {
        *counts.entry(d.label).or_default() += 1;
    }
    counts
}

/// Per-class training quotas: floor(ratio * n_c) for every class, with the
/// remainder up to round(ratio * n) handed to the classes with the largest
/// fractional parts (lowest class index on ties).
fn train_quotas(class_counts: &[usize; NUM_CLASSES], ratio: f64) -> [usize; NUM_CLASSES] {
    const EPS: f64 = 1e-9;
    let n: usize = class_counts.iter().sum();
    let target = (ratio * n as f64).round() as usize;
    let mut quotas = [0usize; NUM_CLASSES];
    let mut fracs = Vec::with_capacity(NUM_CLASSES);
    for c in 0..NUM_CLASSES {
        let exact = ratio * class_counts[c] as f64;
        let floor = (exact + EPS).floor();
        quotas[c] = (floor as usize).min(class_counts[c]);
        fracs.push((exact - floor, c));
    }
    let mut remaining = target.saturating_sub(quotas.iter().sum());
    fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (frac, c) in fracs {
        if remaining == 0 {
            break;
        }
        if frac > EPS && quotas[c] < class_counts[c] {
            quotas[c] += 1;
            remaining -= 1;
        }
    }
    quotas
}

/// Seeded, stratified train/test split.
///
/// A single seeded permutation of all documents is walked once; each
/// document goes to train while its class quota lasts. Both halves therefore
/// come out shuffled, and the result depends only on `(docs, ratio, seed)`.
pub fn split(docs: &[LabeledDocument], ratio: f64, seed: u64) -> Result<DatasetSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    if docs.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut class_counts = [0usize; NUM_CLASSES];
    for d in docs {
        class_counts[d.label.index()] += 1;
    }
    let mut quotas = train_quotas(&class_counts, ratio);

    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in order {
        let c = docs[i].label.index();
        if quotas[c] > 0 {
            quotas[c] -= 1;
            train.push(docs[i].clone());
        } else {
            test.push(docs[i].clone());
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        seed,
        ratio,
    })
}
