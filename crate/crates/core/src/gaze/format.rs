//! The generic gaze file: CSV with a fixed header.
//!
//! `timestamp_ns`, then for each of `left`, `right`, `combined`:
//! `origin_x/y/z`, `dir_x/y/z`, `pupil_mm`, `valid`; last `vendor_extras`
//! holding a JSON string literal.

use std::io::{Read, Write};

use super::sample::{EyeSample, GazeSample};
use super::GazeError;

const EYES: [&str; 3] = ["left", "right", "combined"];
const EYE_FIELDS: [&str; 8] = [
    "origin_x", "origin_y", "origin_z", "dir_x", "dir_y", "dir_z", "pupil_mm", "valid",
];
pub const COLUMN_COUNT: usize = 1 + 3 * 8 + 1;

pub fn header() -> Vec<String> {
    let mut cols = vec!["timestamp_ns".to_string()];
    for eye in EYES {
        cols.extend(EYE_FIELDS.iter().map(|f| format!("{eye}_{f}")));
    }
    cols.push("vendor_extras".into());
    cols
}

/// Streams samples to CSV, rejecting non-increasing timestamps.
pub struct GazeWriter<W: Write> {
    inner: csv::Writer<W>,
    last: Option<u64>,
    written: usize,
}

impl<W: Write> GazeWriter<W> {
    pub fn new(sink: W) -> Result<Self, GazeError> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(header()).map_err(csv_io)?;
        Ok(Self {
            inner,
            last: None,
            written: 0,
        })
    }

    pub fn write(&mut self, sample: &GazeSample) -> Result<(), GazeError> {
        if self.last.is_some_and(|t| sample.timestamp_ns <= t) {
            return Err(GazeError::NonMonotonic {
                previous: self.last.unwrap(),
                got: sample.timestamp_ns,
            });
        }
        let mut row = Vec::with_capacity(COLUMN_COUNT);
        row.push(sample.timestamp_ns.to_string());
        for eye in sample.eyes() {
            for v in eye.origin.iter().chain(&eye.direction) {
                row.push(v.to_string());
            }
            row.push(eye.pupil_mm.to_string());
            row.push(if eye.valid { "1" } else { "0" }.to_string());
        }
        row.push(serde_json::to_string(&sample.vendor_extras).expect("string serializes"));
        self.inner.write_record(&row).map_err(csv_io)?;
        self.last = Some(sample.timestamp_ns);
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<W, GazeError> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| GazeError::Io(std::io::Error::other(e.to_string())))
    }
}

fn csv_io(e: csv::Error) -> GazeError {
    GazeError::Io(std::io::Error::other(e.to_string()))
}

/// Parses a whole gaze file. Row numbers in errors count data rows from 1.
pub fn read_gaze<R: Read>(source: R) -> Result<Vec<GazeSample>, GazeError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| GazeError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header() {
        return Err(GazeError::Parse {
            row: 0,
            message: "header does not match the generic gaze format".into(),
        });
    }

    let mut samples: Vec<GazeSample> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| GazeError::Parse {
            row,
            message: e.to_string(),
        })?;
        let sample = parse_row(&record).map_err(|message| GazeError::Parse { row, message })?;
        if let Some(prev) = samples.last() {
            if sample.timestamp_ns <= prev.timestamp_ns {
                return Err(GazeError::Parse {
                    row,
                    message: format!(
                        "timestamp {} does not increase after {}",
                        sample.timestamp_ns, prev.timestamp_ns
                    ),
                });
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

fn parse_row(record: &csv::StringRecord) -> Result<GazeSample, String> {
    if record.len() != COLUMN_COUNT {
        return Err(format!(
            "expected {COLUMN_COUNT} fields, found {}",
            record.len()
        ));
    }
    let float = |i: usize| -> Result<f64, String> {
        record[i]
            .parse::<f64>()
            .map_err(|_| format!("column {} is not a number: {:?}", header()[i], &record[i]))
    };
    let timestamp_ns = record[0]
        .parse::<u64>()
        .map_err(|_| format!("bad timestamp {:?}", &record[0]))?;
    let mut eyes = [EyeSample::INVALID; 3];
    for (e, eye) in eyes.iter_mut().enumerate() {
        let base = 1 + e * 8;
        eye.origin = [float(base)?, float(base + 1)?, float(base + 2)?];
        eye.direction = [float(base + 3)?, float(base + 4)?, float(base + 5)?];
        eye.pupil_mm = float(base + 6)?;
        eye.valid = match &record[base + 7] {
            "1" => true,
            "0" => false,
            other => return Err(format!("validity flag must be 0 or 1, got {other:?}")),
        };
    }
    let vendor_extras: String = serde_json::from_str(&record[COLUMN_COUNT - 1])
        .map_err(|e| format!("vendor_extras is not a JSON string: {e}"))?;
    let [left, right, combined] = eyes;
    Ok(GazeSample {
        timestamp_ns,
        left,
        right,
        combined,
        vendor_extras,
    })
}
