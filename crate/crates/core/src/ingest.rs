//! Loading raw frequency recordings and cutting them into fixed-length chunks.
//!
//! Timestamps are integer seconds and are treated as opaque UTC values; no
//! timezone arithmetic is applied when aligning windows to day boundaries.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_LEN: usize = 900;
const SECONDS_PER_DAY: i64 = 86_400;

/// One frequency measurement on the 1 s grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySample {
    pub timestamp: i64,
    pub frequency: f64,
}

/// Names of the CSV columns holding the timestamp and the frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub timestamp: String,
    pub frequency: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".to_string(),
            frequency: "frequency".to_string(),
        }
    }
}

impl ColumnSpec {
    pub fn new(timestamp: impl Into<String>, frequency: impl Into<String>) -> Self {
        Self {
            timestamp: timestamp.into(),
            frequency: frequency.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSamples {
    pub samples: Vec<FrequencySample>,
    pub rows_read: usize,
    /// Rows with a missing or unparseable field, plus duplicated timestamps.
    pub rows_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Parses a headed CSV stream into samples sorted by timestamp.
///
/// Rows whose timestamp or frequency is empty, unparseable or non-finite are
/// dropped. Of several rows sharing a timestamp only the first one in file
/// order is kept.
pub fn parse_frequency_csv<R: Read>(source: R, columns: &ColumnSpec) -> Result<ParsedSamples> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("header has no column named {name:?}")))
    };
    let ts_col = find(&columns.timestamp)?;
    let f_col = find(&columns.frequency)?;

    let mut samples = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        rows_read += 1;
        let timestamp = record.get(ts_col).and_then(parse_timestamp);
        let frequency = record
            .get(f_col)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|f| f.is_finite());
        match (timestamp, frequency) {
            (Some(timestamp), Some(frequency)) => samples.push(FrequencySample {
                timestamp,
                frequency,
            }),
            _ => rows_dropped += 1,
        }
    }

    // stable sort keeps file order among equal timestamps
    samples.sort_by_key(|s| s.timestamp);
    let before = samples.len();
    samples.dedup_by_key(|s| s.timestamp);
    let duplicates_dropped = before - samples.len();

    if samples.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no valid rows among {rows_read} read"
        )));
    }
    Ok(ParsedSamples {
        samples,
        rows_read,
        rows_dropped: rows_dropped + duplicates_dropped,
        duplicates_dropped,
    })
}

fn parse_timestamp(field: &str) -> Option<i64> {
    if field.is_empty() {
        return None;
    }
    if let Ok(ts) = field.parse::<i64>() {
        return Some(ts);
    }
    // accept "12.0" style exports as long as they sit on the 1 s grid
    let value = field.parse::<f64>().ok()?;
    (value.is_finite() && value.fract() == 0.0 && value.abs() < 9.0e15).then_some(value as i64)
}

/// A contiguous, gap-free segment of frequency samples.
///
/// Sample `i` was taken at `start + i * dt` seconds. Recorded data always has
/// `dt = 1`; the synthetic generator may use finer spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyChunk {
    pub chunk_id: String,
    pub start: i64,
    pub dt: f64,
    pub f_ref: f64,
    pub frequency: Vec<f64>,
}

impl FrequencyChunk {
    pub fn new(
        chunk_id: impl Into<String>,
        start: i64,
        dt: f64,
        f_ref: f64,
        frequency: Vec<f64>,
    ) -> Result<Self> {
        validate_f_ref(f_ref)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("sampling interval must be > 0, got {dt}")));
        }
        if frequency.len() < 2 {
            return Err(Error::Data("a chunk needs at least 2 samples".into()));
        }
        if let Some(i) = frequency.iter().position(|f| !f.is_finite()) {
            return Err(Error::Data(format!("non-finite frequency at sample {i}")));
        }
        Ok(Self {
            chunk_id: chunk_id.into(),
            start,
            dt,
            f_ref,
            frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.frequency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequency.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> f64 {
        self.start as f64 + i as f64 * self.dt
    }

    /// Seconds since midnight of the chunk's first sample.
    pub fn time_of_day(&self) -> i64 {
        self.start.rem_euclid(SECONDS_PER_DAY)
    }
}

pub fn validate_f_ref(f_ref: f64) -> Result<()> {
    if f_ref == 50.0 || f_ref == 60.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "reference frequency must be 50 or 60 Hz, got {f_ref}"
        )))
    }
}

/// Label of a chunk starting at `start`: UTC date and clock time.
pub fn chunk_label(start: i64) -> String {
    match chrono::DateTime::from_timestamp(start, 0) {
        Some(t) => t.format("%Y-%m-%d_%H%M%S").to_string(),
        None => format!("t{start}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub chunks: Vec<FrequencyChunk>,
    /// Windows that contained samples but were incomplete.
    pub skipped: usize,
}

/// Partitions sorted samples into complete windows of `chunk_len` seconds.
///
/// Windows are aligned to multiples of `chunk_len` counted from midnight of
/// the first sample's day. A window yields a chunk only when every second of
/// it is present.
pub fn segment_chunks(
    samples: &[FrequencySample],
    chunk_len: usize,
    f_ref: f64,
) -> Result<Segmentation> {
    if chunk_len < 2 {
        return Err(Error::Config(format!("chunk length must be >= 2, got {chunk_len}")));
    }
    validate_f_ref(f_ref)?;
    if samples.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::Data("samples must be sorted by timestamp".into()));
    }
    let Some(first) = samples.first() else {
        return Ok(Segmentation {
            chunks: Vec::new(),
            skipped: 0,
        });
    };
    let origin = first.timestamp.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY;
    let len = chunk_len as i64;

    let mut windows: BTreeMap<i64, Vec<&FrequencySample>> = BTreeMap::new();
    for s in samples {
        windows
            .entry((s.timestamp - origin).div_euclid(len))
            .or_default()
            .push(s);
    }

    let mut chunks = Vec::new();
    let mut skipped = 0;
    for (index, members) in windows {
        let start = origin + index * len;
        let complete = members.len() == chunk_len
            && members
                .iter()
                .enumerate()
                .all(|(k, s)| s.timestamp == start + k as i64);
        if complete {
            chunks.push(FrequencyChunk {
                chunk_id: chunk_label(start),
                start,
                dt: 1.0,
                f_ref,
                frequency: members.iter().map(|s| s.frequency).collect(),
            });
        } else {
            skipped += 1;
        }
    }
    Ok(Segmentation { chunks, skipped })
}

/// Angular frequency deviation of a chunk, in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSeries {
    pub omega: Vec<f64>,
    pub dt: f64,
}

pub fn to_angular(chunk: &FrequencyChunk) -> AngularSeries {
    AngularSeries {
        omega: chunk
            .frequency
            .iter()
            .map(|f| 2.0 * PI * (f - chunk.f_ref))
            .collect(),
        dt: chunk.dt,
    }
}

/// Inverse of [`to_angular`] for a single value.
pub fn frequency_from_omega(omega: f64, f_ref: f64) -> f64 {
    f_ref + omega / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub chunks_emitted: usize,
    pub chunks_skipped: usize,
}

/// Writes chunks as `chunk_id,timestamp,frequency,f_ref` rows.
///
/// Only chunks on the 1 s grid can be stored.
pub fn write_chunk_store<W: Write>(chunks: &[FrequencyChunk], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chunk_id", "timestamp", "frequency", "f_ref"])?;
    for chunk in chunks {
        if chunk.dt != 1.0 {
            return Err(Error::Data(format!(
                "chunk {} is sampled every {} s; the store holds 1 s data only",
                chunk.chunk_id, chunk.dt
            )));
        }
        for (i, f) in chunk.frequency.iter().enumerate() {
            w.write_record([
                chunk.chunk_id.clone(),
                (chunk.start + i as i64).to_string(),
                f.to_string(),
                chunk.f_ref.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes chunks as a raw `timestamp,frequency` recording, readable by [`parse_frequency_csv`].
pub fn write_frequency_csv<W: Write>(chunks: &[FrequencyChunk], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "frequency"])?;
    for chunk in chunks {
        if chunk.dt != 1.0 {
            return Err(Error::Data(format!(
                "chunk {} is sampled every {} s; recordings are on the 1 s grid",
                chunk.chunk_id, chunk.dt
            )));
        }
        for (i, f) in chunk.frequency.iter().enumerate() {
            w.write_record([(chunk.start + i as i64).to_string(), f.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_chunk_store<R: Read>(source: R) -> Result<Vec<FrequencyChunk>> {
    #[derive(Deserialize)]
    struct Row {
        chunk_id: String,
        timestamp: i64,
        frequency: f64,
        f_ref: f64,
    }

    let mut reader = csv::Reader::from_reader(source);
    let mut chunks: Vec<FrequencyChunk> = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row.map_err(|e| Error::Format(format!("chunk store: {e}")))?;
        match chunks.last_mut() {
            Some(c) if c.chunk_id == row.chunk_id => {
                if row.timestamp != c.start + c.frequency.len() as i64 || row.f_ref != c.f_ref {
                    return Err(Error::Format(format!(
                        "chunk {} is not contiguous at timestamp {}",
                        c.chunk_id, row.timestamp
                    )));
                }
                c.frequency.push(row.frequency);
            }
            _ => chunks.push(FrequencyChunk {
                chunk_id: row.chunk_id,
                start: row.timestamp,
                dt: 1.0,
                f_ref: row.f_ref,
                frequency: vec![row.frequency],
            }),
        }
    }
    for c in &chunks {
        FrequencyChunk::new(c.chunk_id.clone(), c.start, c.dt, c.f_ref, c.frequency.clone())
            .map_err(|e| e.in_chunk(&c.chunk_id))?;
    }
    if chunks.is_empty() {
        return Err(Error::EmptyInput("chunk store holds no chunks".into()));
    }
    Ok(chunks)
}
