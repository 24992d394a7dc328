//! Stream classification and sentiment-trend aggregation.
//!
//! Records arrive as NDJSON (`{"id": .., "text": .., "ts": ms}`, `ts`
//! optional). Each is anonymized, classified and counted into a
//! [`TrendWindow`]. Lines that cannot be parsed or classified go to a
//! dead-letter sink with a reason, so `ingested = classified + dead_lettered`
//! always holds.

pub mod anonymize;
#[cfg(feature = "server")]
pub mod http;
pub mod window;

use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::label::{Label, NUM_CLASSES};
use crate::models::{ModelBundle, ModelError};

pub use anonymize::{anonymize, mask_mentions, Anonymizer, KEY_ENV};
pub use window::{
    query_trend, rebucket, update_window, TrendPoint, TrendWindow, DEFAULT_BUCKET_SECONDS,
    DEFAULT_RETAINED_BUCKETS,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid range: from {from} is after to {to}")]
    InvalidRange { from: i64, to: i64 },
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub id: String,
    pub text: String,
    /// Event time in unix milliseconds; ingest time is used when absent.
    #[serde(default)]
    pub ts: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    pub id: String,
    pub label: Label,
    pub scores: [f64; NUM_CLASSES],
    pub ts: i64,
    pub model_version: String,
}

/// A line that could not be processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub reason: String,
    pub line: String,
}

pub fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// anonymize (if enabled) -> preprocess -> transform -> predict.
pub fn classify_record(
    record: StreamRecord,
    bundle: &ModelBundle,
    model_version: &str,
    anonymizer: Option<&Anonymizer>,
    ingest_ms: i64,
) -> Result<ClassifiedRecord, ServiceError> {
    let record = match anonymizer {
        Some(a) => a.anonymize(record),
        None => record,
    };
    if record.id.is_empty() {
        return Err(ServiceError::Malformed("empty id".into()));
    }
    let prediction = bundle.predict_text(&record.text)?;
    Ok(ClassifiedRecord {
        id: record.id,
        label: prediction.label,
        scores: prediction.scores,
        ts: record.ts.unwrap_or(ingest_ms),
        model_version: model_version.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bucket_seconds: u64,
    pub retained_buckets: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bucket_seconds: DEFAULT_BUCKET_SECONDS,
            retained_buckets: DEFAULT_RETAINED_BUCKETS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub ingested: u64,
    pub classified: u64,
    pub dead_lettered: u64,
    pub dropped_late: u64,
}

/// One model, one window, shared by every ingestion path.
pub struct Service {
    bundle: ModelBundle,
    model_version: String,
    anonymizer: Option<Anonymizer>,
    window: RwLock<TrendWindow>,
    ingested: AtomicU64,
    classified: AtomicU64,
    dead_lettered: AtomicU64,
    started: Instant,
}

pub enum Outcome {
    Classified(ClassifiedRecord),
    DeadLetter(DeadLetter),
}

impl Service {
    /// `anonymizer = None` turns anonymization off.
    pub fn new(
        bundle: ModelBundle,
        model_version: impl Into<String>,
        anonymizer: Option<Anonymizer>,
        config: ServiceConfig,
    ) -> Self {
        Service {
            bundle,
            model_version: model_version.into(),
            anonymizer,
            window: RwLock::new(TrendWindow::new(config.bucket_seconds, config.retained_buckets)),
            ingested: AtomicU64::new(0),
            classified: AtomicU64::new(0),
            dead_lettered: AtomicU64::new(0),
            started: Instant::now(),
        }
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn uptime_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn dead_letter(&self, reason: String, line: &str) -> Outcome {
        self.dead_lettered.fetch_add(1, Ordering::SeqCst);
        Outcome::DeadLetter(DeadLetter {
            reason,
            line: line.to_string(),
        })
    }

    /// Classify one parsed record and count it.
    pub fn ingest_record(&self, record: StreamRecord) -> Result<ClassifiedRecord, ServiceError> {
        self.ingested.fetch_add(1, Ordering::SeqCst);
        match classify_record(
            record,
            &self.bundle,
            &self.model_version,
            self.anonymizer.as_ref(),
            now_ms(),
        ) {
            Ok(rec) => {
                update_window(&mut self.window.write().expect("window lock"), &rec);
                self.classified.fetch_add(1, Ordering::SeqCst);
                Ok(rec)
            }
            Err(e) => {
                self.dead_lettered.fetch_add(1, Ordering::SeqCst);
                Err(e)
            }
        }
    }

    /// Handle one NDJSON line. Blank lines are ignored and return `None`.
    pub fn ingest_line(&self, line: &str) -> Option<Outcome> {
        if line.trim().is_empty() {
            return None;
        }
        let record: StreamRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                self.ingested.fetch_add(1, Ordering::SeqCst);
                return Some(self.dead_letter(format!("invalid record: {e}"), line));
            }
        };
        Some(match self.ingest_record(record) {
            Ok(rec) => Outcome::Classified(rec),
            Err(e) => Outcome::DeadLetter(DeadLetter {
                reason: e.to_string(),
                line: line.to_string(),
            }),
        })
    }

    /// Stream `input` line by line, writing classified records to `out` and
    /// failures to `dead`, both as NDJSON.
    pub fn process_ndjson<R: BufRead, W: Write, D: Write>(
        &self,
        input: R,
        mut out: W,
        mut dead: D,
    ) -> Result<(), ServiceError> {
        for line in input.lines() {
            let line = match line {
                Ok(l) => l,
                Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                    self.ingested.fetch_add(1, Ordering::SeqCst);
                    if let Outcome::DeadLetter(d) = self.dead_letter("line is not UTF-8".into(), "") {
                        write_json_line(&mut dead, &d)?;
                    }
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            match self.ingest_line(&line) {
                Some(Outcome::Classified(rec)) => write_json_line(&mut out, &rec)?,
                Some(Outcome::DeadLetter(d)) => write_json_line(&mut dead, &d)?,
                None => {}
            }
        }
        out.flush()?;
        dead.flush()?;
        Ok(())
    }

    pub fn trend(&self, from_ms: i64, to_ms: i64) -> Result<Vec<TrendPoint>, ServiceError> {
        self.window.read().expect("window lock").query(from_ms, to_ms)
    }

    pub fn window_snapshot(&self) -> TrendWindow {
        self.window.read().expect("window lock").clone()
    }

    pub fn counters(&self) -> Counters {
        Counters {
            ingested: self.ingested.load(Ordering::SeqCst),
            classified: self.classified.load(Ordering::SeqCst),
            dead_lettered: self.dead_lettered.load(Ordering::SeqCst),
            dropped_late: self.window.read().expect("window lock").dropped_late(),
        }
    }
}

fn write_json_line<W: Write, T: Serialize>(sink: &mut W, value: &T) -> Result<(), ServiceError> {
    serde_json::to_writer(&mut *sink, value).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    Ok(())
}
