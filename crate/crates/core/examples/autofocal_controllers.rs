//! Step response of the three lens controllers: gaze jumps from the
//! display (1 m) to the smartphone (0.3 m).

use visionsim::optics::{autofocal_update, AutofocalConfig, FocusAlgorithm, FocusState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dt = 1.0 / 90.0;
    let target = 1.0 / 0.3;
    for algorithm in [
        FocusAlgorithm::Instant,
        FocusAlgorithm::SlewLimited,
        FocusAlgorithm::LowPass,
    ] {
        let config = AutofocalConfig::with_algorithm(algorithm);
        let mut state = FocusState::new(1.0, 4.0)?;
        let mut settled = None;
        let mut trace = Vec::new();
        for step in 1..=90 {
            state = autofocal_update(&config, state, target, dt)?;
            if step % 9 == 0 {
                trace.push(format!("{:.2}", state.lens_power));
            }
            if settled.is_none() && (target - state.lens_power).abs() < 0.05 {
                settled = Some(step as f64 * dt);
            }
        }
        println!(
            "{algorithm:?}: within 0.05 D after {}; every 0.1 s: {}",
            settled.map_or("never".into(), |t| format!("{t:.3} s")),
            trace.join(" ")
        );
    }
    Ok(())
}
