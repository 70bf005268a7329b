use std::collections::BTreeMap;

use super::controller::{Command, Controller, EventKind, Phase, SceneEvent};
use super::protocol::Protocol;
use super::session::Session;
use super::ExperimentError;

pub type HandlerError = Box<dyn std::error::Error + Send + Sync>;

/// What a scene handler was asked to run.
pub struct SceneContext<'a> {
    pub session: &'a mut Session,
    pub scene_id: &'a str,
    pub parameter: &'a str,
    /// Per-entry folder name under the session directory.
    pub scene_name: String,
    pub scene_index: usize,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneOutcome {
    /// The scene is done; advance to the next one if `auto_advance`.
    Completed { auto_advance: bool },
    /// The scene keeps running until an external command moves on.
    Waiting,
}

/// A scene kind, developed independently and referenced from protocols by id.
pub trait SceneHandler {
    fn on_load(&mut self, ctx: &mut SceneContext<'_>) -> Result<SceneOutcome, HandlerError>;

    fn on_unload(&mut self, _ctx: &mut SceneContext<'_>) -> Result<(), HandlerError> {
        Ok(())
    }
}

#[derive(Default)]
pub struct SceneRegistry {
    handlers: BTreeMap<String, Box<dyn SceneHandler>>,
}

impl SceneRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, scene_id: impl Into<String>, handler: impl SceneHandler + 'static) {
        self.handlers.insert(scene_id.into(), Box::new(handler));
    }

    pub fn contains(&self, scene_id: &str) -> bool {
        self.handlers.contains_key(scene_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.handlers.keys().map(String::as_str)
    }
}

/// Scene ids referenced by `protocol` but absent from `known`, in protocol order.
pub fn missing_scene_ids<'a>(protocol: &'a Protocol, known: impl Fn(&str) -> bool) -> Vec<&'a str> {
    let mut missing: Vec<&str> = Vec::new();
    for entry in &protocol.scenes {
        if !known(&entry.scene_id) && !missing.contains(&entry.scene_id.as_str()) {
            missing.push(&entry.scene_id);
        }
    }
    missing
}

/// A controller whose scene_loaded events dispatch to registered handlers.
pub struct BoundExperiment {
    controller: Controller,
    registry: SceneRegistry,
    events: Vec<SceneEvent>,
}

pub fn bind_scene_handlers(
    protocol: Protocol,
    registry: SceneRegistry,
) -> Result<BoundExperiment, ExperimentError> {
    let missing = missing_scene_ids(&protocol, |id| registry.contains(id));
    if !missing.is_empty() {
        return Err(ExperimentError::UnknownScenes(
            missing.into_iter().map(str::to_string).collect(),
        ));
    }
    Ok(BoundExperiment {
        controller: Controller::new(protocol)?,
        registry,
        events: Vec::new(),
    })
}

impl BoundExperiment {
    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    /// Every event emitted so far.
    pub fn events(&self) -> &[SceneEvent] {
        &self.events
    }

    /// Applies `command` and dispatches the resulting events, following
    /// auto-advance requests until a scene waits or the experiment ends.
    pub fn command(
        &mut self,
        session: &mut Session,
        command: Command,
    ) -> Result<Vec<SceneEvent>, ExperimentError> {
        let mut emitted = Vec::new();
        let mut pending = vec![command];
        while let Some(cmd) = pending.pop() {
            let events = self.controller.step(cmd)?;
            for event in &events {
                match event.kind {
                    EventKind::SceneLoaded => {
                        if let SceneOutcome::Completed { auto_advance: true } =
                            self.dispatch(session, event, true)?
                        {
                            pending.push(Command::Next);
                        }
                    }
                    EventKind::SceneUnloaded => {
                        self.dispatch(session, event, false)?;
                    }
                    _ => {}
                }
            }
            emitted.extend(events);
        }
        self.events.extend(emitted.iter().cloned());
        Ok(emitted)
    }

    /// Starts the experiment and keeps advancing while scenes auto-complete.
    pub fn run_to_completion(&mut self, session: &mut Session) -> Result<(), ExperimentError> {
        session.bind_protocol(&self.controller.protocol().name.clone())?;
        self.command(session, Command::Start)?;
        while self.controller.phase() == Phase::Running {
            self.command(session, Command::Next)?;
        }
        Ok(())
    }

    fn dispatch(
        &mut self,
        session: &mut Session,
        event: &SceneEvent,
        load: bool,
    ) -> Result<SceneOutcome, ExperimentError> {
        let handler = self
            .registry
            .handlers
            .get_mut(&event.scene_id)
            .expect("registry validated at bind time");
        let mut ctx = SceneContext {
            session,
            scene_id: &event.scene_id,
            parameter: &event.parameter,
            scene_name: self.controller.protocol().scene_name(event.scene_index),
            scene_index: event.scene_index,
            position: event.position,
        };
        let wrap = |source| ExperimentError::Scene {
            scene: event.scene_id.clone(),
            source,
        };
        if load {
            handler.on_load(&mut ctx).map_err(wrap)
        } else {
            handler
                .on_unload(&mut ctx)
                .map(|_| SceneOutcome::Waiting)
                .map_err(wrap)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::protocol::{OrderMode, SceneEntry};
    use crate::experiment::session::create_session;
    use std::sync::{Arc, Mutex};

    struct Recorder {
        seen: Arc<Mutex<Vec<String>>>,
        auto_advance: bool,
    }

    impl SceneHandler for Recorder {
        fn on_load(&mut self, ctx: &mut SceneContext<'_>) -> Result<SceneOutcome, HandlerError> {
            self.seen
                .lock()
                .unwrap()
                .push(format!("{}:{}", ctx.scene_name, ctx.parameter));
            Ok(SceneOutcome::Completed {
                auto_advance: self.auto_advance,
            })
        }
    }

    fn protocol(scenes: &[(&str, &str)]) -> Protocol {
        Protocol {
            name: "p".into(),
            order_mode: OrderMode::Sequential,
            seed: 0,
            scenes: scenes
                .iter()
                .map(|(s, p)| SceneEntry::new(*s, *p))
                .collect(),
        }
    }

    #[test]
    fn missing_handler_is_named() {
        let mut reg = SceneRegistry::new();
        reg.register(
            "task",
            Recorder {
                seen: Default::default(),
                auto_advance: true,
            },
        );
        let err = bind_scene_handlers(protocol(&[("task", ""), ("questionnaire", "TLX")]), reg)
            .err()
            .unwrap();
        match err {
            ExperimentError::UnknownScenes(ids) => assert_eq!(ids, ["questionnaire"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn same_handler_runs_with_each_parameter() {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let mut reg = SceneRegistry::new();
        reg.register(
            "task",
            Recorder {
                seen: seen.clone(),
                auto_advance: true,
            },
        );
        let root = tempfile::tempdir().unwrap();
        let mut session = create_session("S", Default::default(), root.path()).unwrap();
        let mut bound =
            bind_scene_handlers(protocol(&[("task", "near"), ("task", "far")]), reg).unwrap();
        bound.run_to_completion(&mut session).unwrap();
        assert_eq!(*seen.lock().unwrap(), ["task_1:near", "task_2:far"]);
        assert_eq!(bound.controller().phase(), Phase::Finished);
    }

    #[test]
    fn auto_advance_drives_next() {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let mut reg = SceneRegistry::new();
        reg.register(
            "a",
            Recorder {
                seen: seen.clone(),
                auto_advance: true,
            },
        );
        reg.register(
            "b",
            Recorder {
                seen: seen.clone(),
                auto_advance: false,
            },
        );
        let root = tempfile::tempdir().unwrap();
        let mut session = create_session("S", Default::default(), root.path()).unwrap();
        let mut bound =
            bind_scene_handlers(protocol(&[("a", ""), ("b", ""), ("a", "")]), reg).unwrap();
        bound.command(&mut session, Command::Start).unwrap();
        // a completes and advances; b waits
        assert_eq!(bound.controller().position(), 1);
        bound.command(&mut session, Command::Next).unwrap();
        assert_eq!(bound.controller().phase(), Phase::Finished);
        assert_eq!(seen.lock().unwrap().len(), 3);
    }
}
