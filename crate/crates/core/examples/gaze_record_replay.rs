//! Simulates a fixation sequence across the three screens, records it in the
//! gaze file format, and replays it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use visionsim::experiment::create_session;
use visionsim::gaze::{
    record_gaze, replay_gaze, simulated_gaze, ClockMode, FixationScript, FixationTarget,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let script = FixationScript {
        targets: vec![
            FixationTarget {
                position: [-0.15, -0.08, 0.3],
                dwell: 0.5,
            },
            FixationTarget {
                position: [0.0, 0.03, 1.0],
                dwell: 0.5,
            },
            FixationTarget {
                position: [3.2, 0.5, 6.0],
                dwell: 0.5,
            },
        ],
        saccade_duration: 0.05,
        noise_sigma: 0.3,
        sample_rate: 100.0,
        pupil_mm: 4.0,
    };
    let samples = simulated_gaze(&script, &mut ChaCha8Rng::seed_from_u64(1))?;

    let root = std::env::temp_dir().join(format!("visionsim_gaze_{}", std::process::id()));
    let session = create_session("gaze_demo", Default::default(), &root)?;
    let (path, rows) = record_gaze(samples.clone(), &session, "fixations_1")?;
    println!("recorded {rows} samples to {}", path.display());

    let replayed: Vec<_> = replay_gaze(&path, ClockMode::FreeRun)?.collect();
    assert_eq!(replayed.len(), samples.len());
    for s in replayed.iter().step_by(30) {
        let (az, el) = s.view_angles().unwrap_or((f64::NAN, f64::NAN));
        println!(
            "  t={:.2} s  az {az:6.2}  el {el:6.2}",
            s.timestamp_ns as f64 * 1e-9
        );
    }
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
