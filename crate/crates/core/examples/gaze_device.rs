//! Device lifecycle: open the simulated tracker from a registry, calibrate,
//! sample for a moment with two subscribers, restart sampling.

use std::time::Duration;

use visionsim::gaze::{ClockMode, DeviceRegistry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = DeviceRegistry::discover(None)?;
    for d in registry.devices() {
        println!("device {:?} with {:?}", d.name, d.capabilities);
    }
    let mut device = registry.open("simulated", ClockMode::RealTime)?;
    device.start_device()?;
    device.calibrate()?;

    let a = device.subscribe();
    let b = device.subscribe();
    for round in 1..=2 {
        device.start_sampling()?;
        std::thread::sleep(Duration::from_millis(200));
        device.stop_sampling()?;
        let got_a: Vec<_> = a.try_iter().collect();
        let got_b: Vec<_> = b.try_iter().collect();
        assert_eq!(got_a, got_b);
        if let (Some(first), Some(last)) = (got_a.first(), got_a.last()) {
            println!(
                "round {round}: {} samples, t {:.3}..{:.3} s",
                got_a.len(),
                first.timestamp_ns as f64 * 1e-9,
                last.timestamp_ns as f64 * 1e-9
            );
        }
    }
    device.stop_device()?;
    println!("calibrations: {}", device.calibration_count());
    Ok(())
}
