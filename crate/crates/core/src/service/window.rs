//! Tumbling event-time buckets with bounded retention.
//!
//! The watermark is the newest bucket start seen so far. Buckets older than
//! `retained_buckets` behind it are evicted and their counts move into
//! `dropped_late`, the same counter that absorbs records arriving too late
//! to be stored. A record therefore ends up counted in its bucket if and
//! only if that bucket lies in the final retained range, whatever the
//! arrival order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClassifiedRecord, ServiceError};
use crate::label::{Label, NUM_CLASSES};

pub const DEFAULT_BUCKET_SECONDS: u64 = 60;
pub const DEFAULT_RETAINED_BUCKETS: usize = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendPoint {
    /// Bucket start, unix milliseconds.
    pub bucket_start: i64,
    pub negative: u64,
    pub neutral: u64,
    pub positive: u64,
}

impl TrendPoint {
    fn new(bucket_start: i64, counts: [u64; NUM_CLASSES]) -> Self {
        TrendPoint {
            bucket_start,
            negative: counts[0],
            neutral: counts[1],
            positive: counts[2],
        }
    }

    pub fn total(&self) -> u64 {
        self.negative + self.neutral + self.positive
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrendWindow {
    bucket_seconds: u64,
    retained_buckets: usize,
    buckets: BTreeMap<i64, [u64; NUM_CLASSES]>,
    watermark: Option<i64>,
    dropped_late: u64,
}

impl Default for TrendWindow {
    fn default() -> Self {
        TrendWindow::new(DEFAULT_BUCKET_SECONDS, DEFAULT_RETAINED_BUCKETS)
    }
}

impl TrendWindow {
    pub fn new(bucket_seconds: u64, retained_buckets: usize) -> Self {
        assert!(bucket_seconds >= 1, "bucket_seconds must be at least 1");
        assert!(retained_buckets >= 1, "retained_buckets must be at least 1");
        TrendWindow {
            bucket_seconds,
            retained_buckets,
            buckets: BTreeMap::new(),
            watermark: None,
            dropped_late: 0,
        }
    }

    pub fn bucket_seconds(&self) -> u64 {
        self.bucket_seconds
    }

    pub fn retained_buckets(&self) -> usize {
        self.retained_buckets
    }

    pub fn dropped_late(&self) -> u64 {
        self.dropped_late
    }

    pub fn watermark(&self) -> Option<i64> {
        self.watermark
    }

    fn bucket_ms(&self) -> i64 {
        self.bucket_seconds as i64 * 1000
    }

    pub fn bucket_of(&self, ts_ms: i64) -> i64 {
        ts_ms.div_euclid(self.bucket_ms()) * self.bucket_ms()
    }

    fn span_ms(&self) -> i64 {
        (self.retained_buckets as i64 - 1) * self.bucket_ms()
    }

    /// Oldest retained bucket start, if anything has been seen.
    pub fn oldest_retained(&self) -> Option<i64> {
        self.watermark.map(|w| w - self.span_ms())
    }

    /// Counts of the bucket starting at `bucket_start`.
    pub fn counts(&self, bucket_start: i64) -> [u64; NUM_CLASSES] {
        self.buckets.get(&bucket_start).copied().unwrap_or_default()
    }

    /// Sum over all retained buckets.
    pub fn retained_total(&self) -> u64 {
        self.buckets.values().flatten().sum()
    }

    pub fn record(&mut self, ts_ms: i64, label: Label) {
        let bucket = self.bucket_of(ts_ms);
        if self.watermark.is_none_or(|w| bucket > w) {
            self.watermark = Some(bucket);
            let oldest = bucket - self.span_ms();
            let keep = self.buckets.split_off(&oldest);
            let evicted = std::mem::replace(&mut self.buckets, keep);
            self.dropped_late += evicted.values().flatten().sum::<u64>();
        }
        if bucket < self.oldest_retained().expect("watermark set above") {
            self.dropped_late += 1;
            return;
        }
        self.buckets.entry(bucket).or_default()[label.index()] += 1;
    }

    /// Zero-filled series for every bucket intersecting `[from_ms, to_ms]`,
    /// limited to the retained range. Before anything has been recorded the
    /// range is taken to end at `to_ms`.
    pub fn query(&self, from_ms: i64, to_ms: i64) -> Result<Vec<TrendPoint>, ServiceError> {
        if from_ms > to_ms {
            return Err(ServiceError::InvalidRange {
                from: from_ms,
                to: to_ms,
            });
        }
        let last = self.bucket_of(to_ms);
        let floor = match self.oldest_retained() {
            Some(oldest) => oldest.max(last - self.span_ms()),
            None => last - self.span_ms(),
        };
        let first = self.bucket_of(from_ms).max(floor);
        let step = self.bucket_ms();
        let mut out = Vec::new();
        let mut b = first;
        while b <= last {
            out.push(TrendPoint::new(b, self.counts(b)));
            b += step;
        }
        Ok(out)
    }
}

pub fn update_window(window: &mut TrendWindow, rec: &ClassifiedRecord) {
    window.record(rec.ts, rec.label);
}

pub fn query_trend(
    window: &TrendWindow,
    from_ms: i64,
    to_ms: i64,
) -> Result<Vec<TrendPoint>, ServiceError> {
    window.query(from_ms, to_ms)
}

/// Merge a series into coarser buckets of `bucket_ms`, which should be a
/// multiple of the source bucket width.
pub fn rebucket(points: &[TrendPoint], bucket_ms: i64) -> Vec<TrendPoint> {
    let mut out: Vec<TrendPoint> = Vec::new();
    for p in points {
        let start = p.bucket_start.div_euclid(bucket_ms) * bucket_ms;
        match out.last_mut() {
            Some(last) if last.bucket_start == start => {
                last.negative += p.negative;
                last.neutral += p.neutral;
                last.positive += p.positive;
            }
            _ => out.push(TrendPoint { bucket_start: start, ..*p }),
        }
    }
    out
}
