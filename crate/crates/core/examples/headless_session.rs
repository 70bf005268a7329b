//! Plays the bundled demo protocol without a participant and lists what
//! landed on disk.

use std::path::Path;

use visionsim::runner::{run_protocol, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let data = tempfile_dir()?;
    let mut opts = RunOptions::new(demo.join("protocol.json"), "P01");
    opts.data_root = data.clone();
    opts.devices = Some(demo.join("devices.json"));
    opts.demographics.insert("age".into(), "34".into());

    let summary = run_protocol(&opts)?;
    println!(
        "session {} (seed {})",
        summary.session_dir.display(),
        summary.seed
    );
    for dir in &summary.scene_dirs {
        let mut files: Vec<String> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<Result<_, _>>()?;
        files.sort();
        println!(
            "  {}: {}",
            dir.file_name().unwrap().to_string_lossy(),
            files.join(", ")
        );
    }
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("visionsim_demo_{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
