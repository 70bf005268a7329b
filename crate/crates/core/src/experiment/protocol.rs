use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneEntry {
    #[serde(rename = "scene")]
    pub scene_id: String,
    /// Opaque to the controller; interpreted by the scene handler.
    #[serde(default)]
    pub parameter: String,
}

impl SceneEntry {
    pub fn new(scene_id: impl Into<String>, parameter: impl Into<String>) -> Self {
        Self {
            scene_id: scene_id.into(),
            parameter: parameter.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    #[default]
    Sequential,
    Shuffled,
}

/// A run configuration: which scenes to show, in what order, with which parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub name: String,
    #[serde(default)]
    pub order_mode: OrderMode,
    #[serde(default)]
    pub seed: u64,
    pub scenes: Vec<SceneEntry>,
}

impl Protocol {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let protocol: Protocol =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Json {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        protocol.validate()?;
        Ok(protocol)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.name.trim().is_empty() {
            return Err(ExperimentError::Validation("protocol name is empty".into()));
        }
        if self.scenes.is_empty() {
            return Err(ExperimentError::Validation(format!(
                "protocol {:?} has no scenes",
                self.name
            )));
        }
        if let Some(i) = self
            .scenes
            .iter()
            .position(|s| s.scene_id.trim().is_empty())
        {
            return Err(ExperimentError::Validation(format!(
                "scene entry {i} has an empty scene id"
            )));
        }
        Ok(())
    }

    /// Folder name for the entry at `scene_index`: the scene id plus its
    /// 1-based occurrence among entries with the same id, e.g. `questionnaire_1`.
    pub fn scene_name(&self, scene_index: usize) -> String {
        let id = &self.scenes[scene_index].scene_id;
        let occurrence = self.scenes[..=scene_index]
            .iter()
            .filter(|s| &s.scene_id == id)
            .count();
        format!("{id}_{occurrence}")
    }
}

/// Scene indices in presentation order: identity for sequential protocols,
/// a seeded permutation for shuffled ones.
pub fn resolve_order(protocol: &Protocol) -> Vec<usize> {
    let mut order: Vec<usize> = (0..protocol.scenes.len()).collect();
    if protocol.order_mode == OrderMode::Shuffled {
        let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
        order.shuffle(&mut rng);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn protocol(n: usize, mode: OrderMode, seed: u64) -> Protocol {
        Protocol {
            name: "p".into(),
            order_mode: mode,
            seed,
            scenes: (0..n)
                .map(|i| SceneEntry::new(format!("s{i}"), ""))
                .collect(),
        }
    }

    #[test]
    fn sequential_is_identity() {
        assert_eq!(
            resolve_order(&protocol(4, OrderMode::Sequential, 9)),
            [0, 1, 2, 3]
        );
    }

    #[test]
    fn shuffled_is_deterministic() {
        let p = protocol(8, OrderMode::Shuffled, 42);
        assert_eq!(resolve_order(&p), resolve_order(&p));
    }

    proptest! {
        #[test]
        fn order_is_a_permutation(n in 1usize..40, seed: u64, shuffled: bool) {
            let mode = if shuffled { OrderMode::Shuffled } else { OrderMode::Sequential };
            let mut order = resolve_order(&protocol(n, mode, seed));
            order.sort_unstable();
            prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn sequential_ignores_seed(n in 1usize..20, a: u64, b: u64) {
            prop_assert_eq!(
                resolve_order(&protocol(n, OrderMode::Sequential, a)),
                resolve_order(&protocol(n, OrderMode::Sequential, b))
            );
        }
    }

    #[test]
    fn json_shape() {
        let json = r#"{
            "name": "Group 1",
            "order_mode": "shuffled",
            "seed": 7,
            "scenes": [{"scene": "main_menu"}, {"scene": "questionnaire", "parameter": "TLX"}]
        }"#;
        let p: Protocol = serde_json::from_str(json).unwrap();
        p.validate().unwrap();
        assert_eq!(p.order_mode, OrderMode::Shuffled);
        assert_eq!(p.scenes[1], SceneEntry::new("questionnaire", "TLX"));
        assert_eq!(p.scenes[0].parameter, "");
    }

    #[test]
    fn validation() {
        assert!(protocol(0, OrderMode::Sequential, 0).validate().is_err());
        let mut p = protocol(1, OrderMode::Sequential, 0);
        p.name = " ".into();
        assert!(p.validate().is_err());
    }

    #[test]
    fn scene_names_count_occurrences() {
        let p = Protocol {
            name: "p".into(),
            order_mode: OrderMode::Sequential,
            seed: 0,
            scenes: vec![
                SceneEntry::new("task", "a"),
                SceneEntry::new("questionnaire", "TLX"),
                SceneEntry::new("task", "b"),
            ],
        };
        assert_eq!(p.scene_name(0), "task_1");
        assert_eq!(p.scene_name(1), "questionnaire_1");
        assert_eq!(p.scene_name(2), "task_2");
    }
}
