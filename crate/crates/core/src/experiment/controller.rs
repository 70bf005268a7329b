use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::protocol::{resolve_order, Protocol, SceneEntry};
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command", content = "index")]
pub enum Command {
    Start,
    Next,
    Previous,
    RestartScene,
    RepeatScene,
    Jump(usize),
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SceneLoaded,
    SceneUnloaded,
    ExperimentStarted,
    ExperimentFinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub kind: EventKind,
    /// Index of the entry in the protocol's scene list.
    pub scene_index: usize,
    /// Position in the resolved presentation order.
    pub position: usize,
    pub scene_id: String,
    pub parameter: String,
    /// Seconds since the experiment started.
    pub timestamp: f64,
}

impl SceneEvent {
    /// The event with its timestamp zeroed, for comparing replays.
    pub fn untimed(&self) -> SceneEvent {
        SceneEvent {
            timestamp: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Ready,
    Running,
    Finished,
}

/// Sequences a protocol's scenes and emits lifecycle events.
#[derive(Debug)]
pub struct Controller {
    protocol: Protocol,
    order: Vec<usize>,
    position: usize,
    phase: Phase,
    started: Option<Instant>,
    listeners: Vec<Sender<SceneEvent>>,
}

impl Controller {
    pub fn new(protocol: Protocol) -> Result<Self, ExperimentError> {
        protocol.validate()?;
        let order = resolve_order(&protocol);
        Ok(Self {
            protocol,
            order,
            position: 0,
            phase: Phase::Ready,
            started: None,
            listeners: Vec::new(),
        })
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Current presentation order; grows when scenes are repeated.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self) -> usize {
        self.position
    }

    /// `(position, scene_index, entry)` of the active scene while running.
    pub fn current(&self) -> Option<(usize, usize, &SceneEntry)> {
        (self.phase == Phase::Running).then(|| {
            let index = self.order[self.position];
            (self.position, index, &self.protocol.scenes[index])
        })
    }

    /// Receives a copy of every event emitted from now on.
    pub fn subscribe(&mut self) -> Receiver<SceneEvent> {
        let (tx, rx) = channel();
        self.listeners.push(tx);
        rx
    }

    pub fn step(&mut self, command: Command) -> Result<Vec<SceneEvent>, ExperimentError> {
        let mut events = Vec::new();
        match (self.phase, command) {
            (Phase::Ready, Command::Start) => {
                self.phase = Phase::Running;
                self.started = Some(Instant::now());
                self.position = 0;
                events.push(self.event(EventKind::ExperimentStarted));
                events.push(self.event(EventKind::SceneLoaded));
            }
            (Phase::Ready, _) => {
                return Err(ExperimentError::State(
                    "experiment has not been started".into(),
                ))
            }
            (Phase::Finished, _) => {
                return Err(ExperimentError::State("experiment already finished".into()))
            }
            (Phase::Running, Command::Start) => {
                return Err(ExperimentError::State("experiment already started".into()))
            }
            (Phase::Running, Command::Next) => {
                if self.position + 1 < self.order.len() {
                    self.transition(self.position + 1, &mut events);
                } else {
                    self.finish(&mut events);
                }
            }
            (Phase::Running, Command::Previous) => {
                if self.position > 0 {
                    self.transition(self.position - 1, &mut events);
                }
            }
            (Phase::Running, Command::RestartScene) => self.transition(self.position, &mut events),
            (Phase::Running, Command::RepeatScene) => {
                self.order
                    .insert(self.position + 1, self.order[self.position]);
            }
            (Phase::Running, Command::Jump(target)) => {
                if target >= self.order.len() {
                    return Err(ExperimentError::Domain(format!(
                        "jump target {target} outside 0..{}",
                        self.order.len()
                    )));
                }
                self.transition(target, &mut events);
            }
            (Phase::Running, Command::Finish) => self.finish(&mut events),
        }
        self.listeners
            .retain(|tx| events.iter().all(|e| tx.send(e.clone()).is_ok()));
        Ok(events)
    }

    fn transition(&mut self, target: usize, events: &mut Vec<SceneEvent>) {
        events.push(self.event(EventKind::SceneUnloaded));
        self.position = target;
        events.push(self.event(EventKind::SceneLoaded));
    }

    fn finish(&mut self, events: &mut Vec<SceneEvent>) {
        events.push(self.event(EventKind::SceneUnloaded));
        events.push(self.event(EventKind::ExperimentFinished));
        self.phase = Phase::Finished;
    }

    fn event(&self, kind: EventKind) -> SceneEvent {
        let scene_index = self.order[self.position];
        let entry = &self.protocol.scenes[scene_index];
        SceneEvent {
            kind,
            scene_index,
            position: self.position,
            scene_id: entry.scene_id.clone(),
            parameter: entry.parameter.clone(),
            timestamp: self.started.map_or(0.0, |t| t.elapsed().as_secs_f64()),
        }
    }
}
