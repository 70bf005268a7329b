use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::scenes::{headless_registry, GazeFeed, HeadlessSettings};
use super::validate::{default_questionnaire_dir, validate_protocol};
use crate::error::{Error, Result};
use crate::experiment::{bind_scene_handlers, create_session, DemographicsMask, EventKind};
use crate::gaze::DeviceRegistry;

/// Environment variable that overrides the default data root.
pub const DATA_ENV: &str = "VISIONSIM_DATA";

/// `$VISIONSIM_DATA`, or `./data`.
pub fn default_data_root() -> PathBuf {
    match std::env::var_os(DATA_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("data"),
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub protocol: PathBuf,
    pub subject_id: String,
    pub demographics: BTreeMap<String, String>,
    /// Checked against the demographics when given.
    pub mask: Option<PathBuf>,
    pub data_root: PathBuf,
    /// Overrides the protocol seed.
    pub seed: Option<u64>,
    pub devices: Option<PathBuf>,
    /// Device name; the first registered device when absent.
    pub device: Option<String>,
    /// Defaults to `questionnaires/` next to the protocol.
    pub questionnaire_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(protocol: impl Into<PathBuf>, subject_id: impl Into<String>) -> Self {
        Self {
            protocol: protocol.into(),
            subject_id: subject_id.into(),
            demographics: BTreeMap::new(),
            mask: None,
            data_root: default_data_root(),
            seed: None,
            devices: None,
            device: None,
            questionnaire_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub session_dir: PathBuf,
    /// Scene folders in the order they were played.
    pub scene_dirs: Vec<PathBuf>,
    pub seed: u64,
}

/// Plays a protocol end to end without a participant. Everything is
/// validated before the session folder is created.
pub fn run_protocol(opts: &RunOptions) -> Result<RunSummary> {
    let (protocol, diags) = validate_protocol(
        &opts.protocol,
        opts.questionnaire_dir.as_deref(),
        opts.devices.as_deref(),
    );
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    let protocol = protocol.expect("no diagnostics means the protocol loaded");
    if let Some(mask) = &opts.mask {
        DemographicsMask::load(mask)?.validate(&opts.demographics)?;
    }

    let registry = DeviceRegistry::discover(opts.devices.as_deref())?;
    let device = match &opts.device {
        Some(name) => name.clone(),
        None => registry
            .devices()
            .first()
            .map(|d| d.name.clone())
            .ok_or_else(|| crate::gaze::GazeError::Registry("device registry is empty".into()))?,
    };
    let feed = GazeFeed::shared(registry.open_source(&device)?);

    let seed = opts.seed.unwrap_or(protocol.seed);
    let settings = HeadlessSettings {
        seed,
        questionnaire_dir: opts
            .questionnaire_dir
            .clone()
            .unwrap_or_else(|| default_questionnaire_dir(&opts.protocol)),
    };
    let mut protocol = protocol;
    protocol.seed = seed;

    let mut session = create_session(&opts.subject_id, opts.demographics.clone(), &opts.data_root)?;
    let mut bound = bind_scene_handlers(protocol, headless_registry(feed, settings))?;
    bound.run_to_completion(&mut session)?;

    let proto = bound.controller().protocol();
    let scene_dirs = bound
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::SceneLoaded)
        .map(|e| session.session_dir.join(proto.scene_name(e.scene_index)))
        .collect();
    Ok(RunSummary {
        session_dir: session.session_dir.clone(),
        scene_dirs,
        seed,
    })
}

/// Folders directly under `dir`, sorted by name.
pub fn list_dirs(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}
