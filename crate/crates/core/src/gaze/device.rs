use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::GazeSample;
use super::simulated::{simulated_gaze, FixationScript, FixationTarget};
use super::{read_gaze_file, GazeError};

/// Environment variable naming the device registry file.
pub const DEVICES_ENV: &str = "VISIONSIM_DEVICES";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Calibration,
    PerEye,
    Pupil,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceSource {
    Simulated {
        #[serde(default)]
        script: Option<FixationScript>,
        #[serde(default)]
        seed: u64,
    },
    Replay {
        path: PathBuf,
    },
    /// A vendor driver configured elsewhere; see [`GazeDevice::new`].
    External {
        #[serde(default)]
        config: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub name: String,
    #[serde(default)]
    pub capabilities: BTreeSet<Capability>,
    pub source: DeviceSource,
}

/// How a device or replay paces its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Honor the recorded inter-sample intervals.
    #[default]
    RealTime,
    /// Emit as fast as the consumer takes them.
    FreeRun,
}

/// Anything that yields gaze samples in timestamp order.
pub trait SampleSource: Send {
    fn next_sample(&mut self) -> Option<GazeSample>;
}

/// Endless stream from a fixation script; each pass draws fresh noise.
pub struct SimulatedSource {
    script: FixationScript,
    rng: ChaCha8Rng,
    buffer: std::vec::IntoIter<GazeSample>,
    pass: u64,
    period_ns: u64,
}

impl SimulatedSource {
    pub fn new(script: FixationScript, seed: u64) -> Result<Self, GazeError> {
        script.validate()?;
        let period_ns = (script.sample_count() as f64 / script.sample_rate * 1e9).round() as u64;
        if period_ns == 0 {
            return Err(GazeError::InvalidScript(
                "script is shorter than one sample".into(),
            ));
        }
        Ok(Self {
            script,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buffer: Vec::new().into_iter(),
            pass: 0,
            period_ns,
        })
    }

    /// One second straight ahead at 1 m, 100 Hz.
    pub fn default_script() -> FixationScript {
        FixationScript {
            targets: vec![FixationTarget {
                position: [0.0, 0.0, 1.0],
                dwell: 1.0,
            }],
            saccade_duration: 0.0,
            noise_sigma: 0.1,
            sample_rate: 100.0,
            pupil_mm: 4.0,
        }
    }
}

impl SampleSource for SimulatedSource {
    fn next_sample(&mut self) -> Option<GazeSample> {
        loop {
            if let Some(mut s) = self.buffer.next() {
                s.timestamp_ns += (self.pass - 1) * self.period_ns;
                return Some(s);
            }
            let next = simulated_gaze(&self.script, &mut self.rng).ok()?;
            self.buffer = next.into_iter();
            self.pass += 1;
        }
    }
}

/// Samples read from a gaze file, optionally paced at their recorded timing.
pub struct ReplayStream {
    samples: std::vec::IntoIter<GazeSample>,
    clock: ClockMode,
    origin: Option<(Instant, u64)>,
}

impl ReplayStream {
    pub fn from_samples(samples: Vec<GazeSample>, clock: ClockMode) -> Self {
        Self {
            samples: samples.into_iter(),
            clock,
            origin: None,
        }
    }

    pub fn remaining(&self) -> usize {
        self.samples.len()
    }
}

impl Iterator for ReplayStream {
    type Item = GazeSample;

    fn next(&mut self) -> Option<GazeSample> {
        let sample = self.samples.next()?;
        if self.clock == ClockMode::RealTime {
            let (start, t0) = *self
                .origin
                .get_or_insert((Instant::now(), sample.timestamp_ns));
            let due = start + Duration::from_nanos(sample.timestamp_ns - t0);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        Some(sample)
    }
}

impl SampleSource for ReplayStream {
    // The device thread does its own pacing.
    fn next_sample(&mut self) -> Option<GazeSample> {
        self.samples.next()
    }
}

/// Opens a recorded gaze file for replay. The whole file is parsed up front,
/// so a malformed row fails here rather than mid-stream.
pub fn replay_gaze(path: &Path, clock: ClockMode) -> Result<ReplayStream, GazeError> {
    Ok(ReplayStream::from_samples(read_gaze_file(path)?, clock))
}

type Subscribers = Arc<Mutex<Vec<Sender<GazeSample>>>>;

struct Worker {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<(Box<dyn SampleSource>, Option<GazeSample>)>,
}

/// An eye tracker with separate device and sampling lifecycles.
///
/// Sampling runs on its own thread and fans samples out, in order, to every
/// subscriber.
pub struct GazeDevice {
    descriptor: DeviceDescriptor,
    clock: ClockMode,
    running: bool,
    source: Option<Box<dyn SampleSource>>,
    pending: Option<GazeSample>,
    worker: Option<Worker>,
    subscribers: Subscribers,
    calibrations: usize,
}

impl GazeDevice {
    /// Wraps any sample source. This is also the hook for external drivers.
    pub fn new(
        descriptor: DeviceDescriptor,
        source: Box<dyn SampleSource>,
        clock: ClockMode,
    ) -> Self {
        Self {
            descriptor,
            clock,
            running: false,
            source: Some(source),
            pending: None,
            worker: None,
            subscribers: Arc::default(),
            calibrations: 0,
        }
    }

    pub fn descriptor(&self) -> &DeviceDescriptor {
        &self.descriptor
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn is_sampling(&self) -> bool {
        self.worker.is_some()
    }

    pub fn calibration_count(&self) -> usize {
        self.calibrations
    }

    /// Receives every sample delivered from now on.
    pub fn subscribe(&self) -> Receiver<GazeSample> {
        let (tx, rx) = channel();
        self.subscribers.lock().expect("subscriber lock").push(tx);
        rx
    }

    pub fn start_device(&mut self) -> Result<(), GazeError> {
        if self.running {
            return Err(GazeError::State("device already started".into()));
        }
        self.running = true;
        log::info!("gaze device {:?} started", self.descriptor.name);
        Ok(())
    }

    pub fn stop_device(&mut self) -> Result<(), GazeError> {
        if !self.running {
            return Err(GazeError::State("device is not started".into()));
        }
        if self.is_sampling() {
            self.stop_sampling()?;
        }
        self.running = false;
        log::info!("gaze device {:?} stopped", self.descriptor.name);
        Ok(())
    }

    pub fn start_sampling(&mut self) -> Result<(), GazeError> {
        if !self.running {
            return Err(GazeError::State(
                "start_sampling requires a started device".into(),
            ));
        }
        if self.is_sampling() {
            return Err(GazeError::State("already sampling".into()));
        }
        let source = self.source.take().expect("source is home while idle");
        let pending = self.pending.take();
        let stop = Arc::new(AtomicBool::new(false));
        let handle = std::thread::spawn({
            let stop = stop.clone();
            let subscribers = self.subscribers.clone();
            let clock = self.clock;
            move || sample_loop(source, pending, stop, subscribers, clock)
        });
        self.worker = Some(Worker { stop, handle });
        Ok(())
    }

    /// Stops the sampling thread. Every sample it produced has been delivered
    /// when this returns.
    pub fn stop_sampling(&mut self) -> Result<(), GazeError> {
        let worker = self
            .worker
            .take()
            .ok_or_else(|| GazeError::State("not sampling".into()))?;
        worker.stop.store(true, Ordering::SeqCst);
        let (source, pending) = worker
            .handle
            .join()
            .map_err(|_| GazeError::State("sampling thread panicked".into()))?;
        self.source = Some(source);
        self.pending = pending;
        Ok(())
    }

    /// Invokes the vendor calibration. Devices here have nothing to
    /// calibrate, so a capable device only logs the call.
    pub fn calibrate(&mut self) -> Result<(), GazeError> {
        if !self
            .descriptor
            .capabilities
            .contains(&Capability::Calibration)
        {
            return Err(GazeError::Unsupported(format!(
                "device {:?} has no calibration capability",
                self.descriptor.name
            )));
        }
        self.calibrations += 1;
        log::info!(
            "calibration requested on {:?} (#{})",
            self.descriptor.name,
            self.calibrations
        );
        Ok(())
    }
}

impl Drop for GazeDevice {
    fn drop(&mut self) {
        if self.worker.is_some() {
            let _ = self.stop_sampling();
        }
    }
}

const POLL: Duration = Duration::from_millis(2);

fn sample_loop(
    mut source: Box<dyn SampleSource>,
    mut pending: Option<GazeSample>,
    stop: Arc<AtomicBool>,
    subscribers: Subscribers,
    clock: ClockMode,
) -> (Box<dyn SampleSource>, Option<GazeSample>) {
    let mut origin: Option<(Instant, u64)> = None;
    loop {
        if stop.load(Ordering::SeqCst) {
            return (source, pending);
        }
        let sample = match pending.take().or_else(|| source.next_sample()) {
            Some(s) => s,
            None => return (source, None),
        };
        if clock == ClockMode::RealTime {
            let (start, t0) = *origin.get_or_insert((Instant::now(), sample.timestamp_ns));
            let due = start + Duration::from_nanos(sample.timestamp_ns.saturating_sub(t0));
            loop {
                let now = Instant::now();
                if now >= due {
                    break;
                }
                if stop.load(Ordering::SeqCst) {
                    return (source, Some(sample));
                }
                std::thread::sleep((due - now).min(POLL));
            }
        }
        subscribers
            .lock()
            .expect("subscriber lock")
            .retain(|tx| tx.send(sample.clone()).is_ok());
    }
}

/// Named device descriptors, as loaded from a registry file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceRegistry {
    devices: Vec<DeviceDescriptor>,
}

impl DeviceRegistry {
    pub fn new(devices: Vec<DeviceDescriptor>) -> Result<Self, GazeError> {
        let mut seen = BTreeSet::new();
        for d in &devices {
            if !seen.insert(d.name.as_str()) {
                return Err(GazeError::Registry(format!(
                    "device name {:?} is not unique",
                    d.name
                )));
            }
        }
        Ok(Self { devices })
    }

    /// Parses a JSON list of descriptors. Relative replay paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, GazeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GazeError::Registry(format!("{}: {e}", path.display())))?;
        let mut devices: Vec<DeviceDescriptor> = serde_json::from_str(&text)
            .map_err(|e| GazeError::Registry(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut devices {
            if let DeviceSource::Replay { path } = &mut d.source {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Self::new(devices)
    }

    /// Loads from `explicit` if given, else from `$VISIONSIM_DEVICES`, else a
    /// registry holding just the default simulated device.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, GazeError> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(DEVICES_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn builtin() -> Self {
        Self {
            devices: vec![DeviceDescriptor {
                name: "simulated".into(),
                capabilities: [
                    Capability::Calibration,
                    Capability::PerEye,
                    Capability::Pupil,
                ]
                .into_iter()
                .collect(),
                source: DeviceSource::Simulated {
                    script: None,
                    seed: 0,
                },
            }],
        }
    }

    pub fn devices(&self) -> &[DeviceDescriptor] {
        &self.devices
    }

    pub fn get(&self, name: &str) -> Option<&DeviceDescriptor> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// Instantiates a simulated or replay device. External devices need a
    /// driver and must be built with [`GazeDevice::new`].
    pub fn open(&self, name: &str, clock: ClockMode) -> Result<GazeDevice, GazeError> {
        let source = self.open_source(name)?;
        let descriptor = self
            .get(name)
            .expect("open_source checked the name")
            .clone();
        Ok(GazeDevice::new(descriptor, source, clock))
    }

    /// The raw sample source behind a device, for callers that pull samples
    /// synchronously instead of running a sampling thread.
    pub fn open_source(&self, name: &str) -> Result<Box<dyn SampleSource>, GazeError> {
        let descriptor = self
            .get(name)
            .ok_or_else(|| GazeError::Registry(format!("no device named {name:?}")))?;
        let source: Box<dyn SampleSource> = match &descriptor.source {
            DeviceSource::Simulated { script, seed } => Box::new(SimulatedSource::new(
                script
                    .clone()
                    .unwrap_or_else(SimulatedSource::default_script),
                *seed,
            )?),
            DeviceSource::Replay { path } => Box::new(replay_gaze(path, ClockMode::FreeRun)?),
            DeviceSource::External { .. } => {
                return Err(GazeError::Unsupported(format!(
                    "device {name:?} needs an external driver"
                )))
            }
        };
        Ok(source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simulated(caps: &[Capability]) -> GazeDevice {
        let descriptor = DeviceDescriptor {
            name: "sim".into(),
            capabilities: caps.iter().copied().collect(),
            source: DeviceSource::Simulated {
                script: None,
                seed: 1,
            },
        };
        GazeDevice::new(
            descriptor,
            Box::new(SimulatedSource::new(SimulatedSource::default_script(), 1).unwrap()),
            ClockMode::RealTime,
        )
    }

    #[test]
    fn sampling_requires_started_device() {
        let mut dev = simulated(&[]);
        assert!(matches!(dev.start_sampling(), Err(GazeError::State(_))));
    }

    #[test]
    fn calibration_needs_capability() {
        let mut dev = simulated(&[]);
        assert!(matches!(dev.calibrate(), Err(GazeError::Unsupported(_))));
        let mut dev = simulated(&[Capability::Calibration]);
        dev.calibrate().unwrap();
        assert_eq!(dev.calibration_count(), 1);
    }

    #[test]
    fn hundred_ms_at_hundred_hz() {
        let mut dev = simulated(&[]);
        let rx = dev.subscribe();
        dev.start_device().unwrap();
        dev.start_sampling().unwrap();
        std::thread::sleep(Duration::from_millis(100));
        dev.stop_sampling().unwrap();
        let n = rx.try_iter().count();
        // first sample is due immediately
        assert!((9..=12).contains(&n), "{n} samples");
    }

    #[test]
    fn sampling_cycles_keep_order_and_device_state() {
        let mut dev = simulated(&[]);
        let rx = dev.subscribe();
        dev.start_device().unwrap();
        for _ in 0..3 {
            dev.start_sampling().unwrap();
            std::thread::sleep(Duration::from_millis(25));
            dev.stop_sampling().unwrap();
            assert!(dev.is_running());
        }
        let ts: Vec<u64> = rx.try_iter().map(|s| s.timestamp_ns).collect();
        assert!(!ts.is_empty());
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ts[0], 0);
        // no gaps: consecutive 10 ms steps across restarts
        assert!(ts.windows(2).all(|w| w[1] - w[0] == 10_000_000));
        dev.stop_device().unwrap();
    }

    #[test]
    fn stop_device_stops_sampling() {
        let mut dev = simulated(&[]);
        dev.start_device().unwrap();
        dev.start_sampling().unwrap();
        dev.stop_device().unwrap();
        assert!(!dev.is_sampling() && !dev.is_running());
    }

    #[test]
    fn every_subscriber_gets_every_sample() {
        let mut dev = simulated(&[]);
        let a = dev.subscribe();
        let b = dev.subscribe();
        dev.start_device().unwrap();
        dev.start_sampling().unwrap();
        std::thread::sleep(Duration::from_millis(30));
        dev.stop_device().unwrap();
        let a: Vec<_> = a.try_iter().collect();
        let b: Vec<_> = b.try_iter().collect();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn simulated_source_loops_with_continuous_timestamps() {
        let mut src = SimulatedSource::new(SimulatedSource::default_script(), 0).unwrap();
        let ts: Vec<u64> = (0..250)
            .map(|_| src.next_sample().unwrap().timestamp_ns)
            .collect();
        assert_eq!(ts[100], 1_000_000_000);
        assert_eq!(ts[249], 2_490_000_000);
    }

    #[test]
    fn registry_rules() {
        let d = DeviceRegistry::builtin().devices()[0].clone();
        assert!(DeviceRegistry::new(vec![d.clone(), d.clone()]).is_err());
        let json = r#"[
            {"name": "sim", "capabilities": ["calibration"], "source": {"kind": "simulated"}},
            {"name": "vendor", "source": {"kind": "external", "config": {"port": 5}}}
        ]"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("devices.json");
        std::fs::write(&path, json).unwrap();
        let reg = DeviceRegistry::load(&path).unwrap();
        assert!(reg.open("sim", ClockMode::FreeRun).is_ok());
        assert!(matches!(
            reg.open("vendor", ClockMode::FreeRun),
            Err(GazeError::Unsupported(_))
        ));
        assert!(reg.open("nope", ClockMode::FreeRun).is_err());
    }
}
