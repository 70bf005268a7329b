use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Response, SceneLayout, TaskError, Trial, TrialResponse};
use crate::experiment::{create_unique_file, Session};

pub const TRIALS_FILE_STEM: &str = "trials";

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub table_screen: String,
    pub landolt_screen: String,
    pub sloan_screen: String,
    /// Landolt gap direction, degrees.
    pub orientation: u16,
    pub letter: char,
    /// Letters of the table columns, orientation 0° first.
    pub table: String,
    pub is_match: bool,
    pub response: Response,
    pub correct: bool,
    /// Seconds.
    pub response_time: f64,
}

impl TrialRecord {
    pub fn new(layout: &SceneLayout, trial: &Trial, response: &TrialResponse) -> Self {
        let name = |i: usize| layout.screens[i].name.clone();
        Self {
            trial_id: trial.id,
            table_screen: name(trial.table_screen),
            landolt_screen: name(trial.landolt_screen),
            sloan_screen: name(trial.sloan_screen),
            orientation: trial.landolt_orientation.degrees(),
            letter: trial.sloan_letter.as_char(),
            table: trial.table.to_string(),
            is_match: trial.is_match,
            response: response.response,
            correct: response.correct,
            response_time: response.response_time,
        }
    }

    /// The record with its response time zeroed, for comparing runs whose
    /// timing differs.
    pub fn untimed(&self) -> Self {
        Self {
            response_time: 0.0,
            ..self.clone()
        }
    }
}

fn csv_error(e: csv::Error) -> TaskError {
    TaskError::Io(std::io::Error::other(e.to_string()))
}

pub fn write_trials<W: Write>(sink: W, records: &[TrialRecord]) -> Result<(), TaskError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    if records.is_empty() {
        // header only, so the file still documents its columns
        w.write_record([
            "trial_id",
            "table_screen",
            "landolt_screen",
            "sloan_screen",
            "orientation",
            "letter",
            "table",
            "is_match",
            "response",
            "correct",
            "response_time",
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials<R: Read>(source: R) -> Result<Vec<TrialRecord>, TaskError> {
    csv::Reader::from_reader(source)
        .deserialize()
        .collect::<Result<Vec<TrialRecord>, _>>()
        .map_err(|e| TaskError::Validation(format!("trials file: {e}")))
}

pub fn read_trials_file(path: &Path) -> Result<Vec<TrialRecord>, TaskError> {
    let file = std::fs::File::open(path).map_err(|e| {
        TaskError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    read_trials(std::io::BufReader::new(file))
}

/// Writes `session_dir/<scene_name>/trials.csv`, suffixing instead of
/// overwriting.
pub fn record_trials(
    records: &[TrialRecord],
    session: &Session,
    scene_name: &str,
) -> Result<PathBuf, TaskError> {
    let dir = session
        .scene_dir(scene_name)
        .map_err(|e| TaskError::Io(std::io::Error::other(e.to_string())))?;
    let (file, path) = create_unique_file(&dir, TRIALS_FILE_STEM, "csv")?;
    write_trials(std::io::BufWriter::new(file), records)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{generate_trial, score, TaskConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csv_roundtrip() {
        let layout = SceneLayout::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let records: Vec<TrialRecord> = (0..20)
            .map(|i| {
                let t = generate_trial(&mut rng, i, &layout, &TaskConfig::default()).unwrap();
                let r = score(&t, Response::from_match(i % 3 == 0), 1.25 + i as f64 * 0.1);
                TrialRecord::new(&layout, &t, &r)
            })
            .collect();
        let mut buf = Vec::new();
        write_trials(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "trial_id,table_screen,landolt_screen,sloan_screen,orientation,letter,table,is_match,response,correct,response_time\n"
        ));
        assert_eq!(read_trials(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn empty_file_has_header() {
        let mut buf = Vec::new();
        write_trials(&mut buf, &[]).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("trial_id,"));
        assert!(read_trials(buf.as_slice()).unwrap().is_empty());
    }
}
