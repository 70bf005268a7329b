//! Eye-tracking layer: a device abstraction with separate device and
//! sampling lifecycles, the generic gaze file format, and simulated and
//! replay sources.

mod device;
mod format;
mod sample;
mod simulated;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{create_unique_file, Session};

pub use device::{
    replay_gaze, Capability, ClockMode, DeviceDescriptor, DeviceRegistry, DeviceSource, GazeDevice,
    ReplayStream, SampleSource, SimulatedSource, DEVICES_ENV,
};
pub use format::{header, read_gaze, GazeWriter, COLUMN_COUNT};
pub use sample::{angle_between, direction_from_angles, EyeSample, GazeSample, Vec3};
pub use simulated::{simulated_gaze, FixationScript, FixationTarget, Segment, HALF_IPD};

#[derive(Debug, Error)]
pub enum GazeError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("timestamp {got} does not increase after {previous}")]
    NonMonotonic { previous: u64, got: u64 },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("{0}")]
    State(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid fixation script: {0}")]
    InvalidScript(String),
    #[error("device registry: {0}")]
    Registry(String),
    #[error("{path}: recording stopped after {written} samples: {source}")]
    Record {
        written: usize,
        path: PathBuf,
        #[source]
        source: Box<GazeError>,
    },
}

pub const GAZE_FILE_STEM: &str = "gaze";

pub fn read_gaze_file(path: &Path) -> Result<Vec<GazeSample>, GazeError> {
    let file = File::open(path).map_err(|e| {
        GazeError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    read_gaze(BufReader::new(file))
}

/// Writes `samples` to `session_dir/<scene_name>/gaze.csv` (or `gaze_N.csv`
/// if the scene already has one). Returns the path and number of rows.
pub fn record_gaze(
    samples: impl IntoIterator<Item = GazeSample>,
    session: &Session,
    scene_name: &str,
) -> Result<(PathBuf, usize), GazeError> {
    let dir = session
        .scene_dir(scene_name)
        .map_err(|e| GazeError::Io(std::io::Error::other(e.to_string())))?;
    let (file, path) = create_unique_file(&dir, GAZE_FILE_STEM, "csv")?;
    let mut writer = GazeWriter::new(std::io::BufWriter::new(file))?;
    let fail = |written, source| GazeError::Record {
        written,
        path: path.clone(),
        source: Box::new(source),
    };
    for sample in samples {
        if let Err(e) = writer.write(&sample) {
            let written = writer.written();
            // keep what was accepted before the failure
            let _ = writer.finish();
            return Err(fail(written, e));
        }
    }
    let written = writer.written();
    writer.finish().map_err(|e| fail(written, e))?;
    Ok((path, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::create_session;

    fn samples(n: u64) -> Vec<GazeSample> {
        (0..n)
            .map(|i| GazeSample {
                timestamp_ns: i * 1_000_000,
                combined: EyeSample::toward([0.0; 3], [0.1, 0.0, 1.0], 3.5),
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn thousand_samples_one_header() {
        let root = tempfile::tempdir().unwrap();
        let session = create_session("S1", Default::default(), root.path()).unwrap();
        let (path, n) = record_gaze(samples(1000), &session, "task").unwrap();
        assert_eq!(n, 1000);
        assert_eq!(path, session.session_dir.join("task").join("gaze.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1001);
        assert_eq!(read_gaze_file(&path).unwrap(), samples(1000));
    }

    #[test]
    fn scenes_get_distinct_folders() {
        let root = tempfile::tempdir().unwrap();
        let session = create_session("S1", Default::default(), root.path()).unwrap();
        let (a, _) = record_gaze(samples(3), &session, "task").unwrap();
        let (b, _) = record_gaze(samples(3), &session, "quest").unwrap();
        assert_ne!(a.parent(), b.parent());
        let (c, _) = record_gaze(samples(3), &session, "task").unwrap();
        assert_eq!(c.file_name().unwrap(), "gaze_1.csv");
    }

    #[test]
    fn failure_reports_written_count() {
        let root = tempfile::tempdir().unwrap();
        let session = create_session("S1", Default::default(), root.path()).unwrap();
        let mut data = samples(5);
        data[3].timestamp_ns = 0;
        match record_gaze(data, &session, "task") {
            Err(GazeError::Record { written, path, .. }) => {
                assert_eq!(written, 3);
                assert_eq!(read_gaze_file(&path).unwrap().len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
