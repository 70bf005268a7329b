use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::ExperimentError;

pub const SESSION_FILE: &str = "session.json";

/// One subject's run: the folder every scene writes into.
#[derive(Debug, Clone)]
pub struct Session {
    pub subject_id: String,
    pub demographics: BTreeMap<String, String>,
    pub data_root: PathBuf,
    pub session_dir: PathBuf,
    pub created_at: DateTime<Utc>,
    pub protocol: Option<String>,
    /// Session-scoped values shared between scenes.
    pub globals: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct SessionManifest<'a> {
    subject_id: &'a str,
    demographics: &'a BTreeMap<String, String>,
    created_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protocol: Option<&'a str>,
}

/// Rejects anything that is not a single, plain path component.
pub fn validate_path_component(what: &str, value: &str) -> Result<(), ExperimentError> {
    let reason = if value.is_empty() {
        Some("must not be empty")
    } else if value == "." || value == ".." {
        Some("must not be a relative path marker")
    } else if value.contains(['/', '\\']) {
        Some("must not contain path separators")
    } else if value.chars().any(|c| c.is_control() || c == ':') {
        Some("must not contain control characters or ':'")
    } else {
        None
    };
    match reason {
        Some(reason) => Err(ExperimentError::Validation(format!(
            "{what} {value:?} {reason}"
        ))),
        None => Ok(()),
    }
}

/// Creates `data_root/subject_id`, or `subject_id_N` with the smallest free
/// `N >= 1` when that folder already exists, and writes `session.json`.
pub fn create_session(
    subject_id: &str,
    demographics: BTreeMap<String, String>,
    data_root: &Path,
) -> Result<Session, ExperimentError> {
    validate_path_component("subject id", subject_id)?;
    fs::create_dir_all(data_root).map_err(|e| ExperimentError::io(data_root, e))?;

    let mut n = 0usize;
    let session_dir = loop {
        let name = if n == 0 {
            subject_id.to_string()
        } else {
            format!("{subject_id}_{n}")
        };
        let candidate = data_root.join(name);
        match fs::create_dir(&candidate) {
            Ok(()) => break candidate,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(ExperimentError::io(&candidate, e)),
        }
    };

    let session = Session {
        subject_id: subject_id.to_string(),
        demographics,
        data_root: data_root.to_path_buf(),
        session_dir,
        created_at: Utc::now(),
        protocol: None,
        globals: BTreeMap::new(),
    };
    session.write_manifest()?;
    Ok(session)
}

impl Session {
    pub fn bind_protocol(&mut self, name: &str) -> Result<(), ExperimentError> {
        self.protocol = Some(name.to_string());
        self.write_manifest()
    }

    pub fn write_manifest(&self) -> Result<(), ExperimentError> {
        let manifest = SessionManifest {
            subject_id: &self.subject_id,
            demographics: &self.demographics,
            created_at: self.created_at,
            protocol: self.protocol.as_deref(),
        };
        let path = self.session_dir.join(SESSION_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| ExperimentError::io(&path, e))
    }

    /// `session_dir/<scene_name>`, created on first use.
    pub fn scene_dir(&self, scene_name: &str) -> Result<PathBuf, ExperimentError> {
        validate_path_component("scene name", scene_name)?;
        let dir = self.session_dir.join(scene_name);
        fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
        Ok(dir)
    }
}

/// Opens `dir/stem.ext`, or `dir/stem_N.ext` for the smallest free `N >= 1`,
/// never truncating an existing file.
pub fn create_unique_file(dir: &Path, stem: &str, ext: &str) -> io::Result<(File, PathBuf)> {
    let mut n = 0usize;
    loop {
        let name = if n == 0 {
            format!("{stem}.{ext}")
        } else {
            format!("{stem}_{n}.{ext}")
        };
        let path = dir.join(name);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(file) => return Ok((file, path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(e),
        }
    }
}
