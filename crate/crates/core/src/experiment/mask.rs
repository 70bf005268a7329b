use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// One field of the experimenter's setup mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskField {
    pub id: String,
    pub label: String,
    #[serde(flatten)]
    pub kind: MaskFieldKind,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MaskFieldKind {
    Text,
    Integer {
        #[serde(default)]
        min: Option<i64>,
        #[serde(default)]
        max: Option<i64>,
    },
    Choice {
        options: Vec<String>,
    },
}

/// Demographic fields collected before a session starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemographicsMask {
    pub fields: Vec<MaskField>,
}

impl Default for DemographicsMask {
    fn default() -> Self {
        let field = |id: &str, label: &str, kind| MaskField {
            id: id.into(),
            label: label.into(),
            kind,
            required: false,
        };
        Self {
            fields: vec![
                field(
                    "age",
                    "Age",
                    MaskFieldKind::Integer {
                        min: Some(0),
                        max: Some(120),
                    },
                ),
                field(
                    "gender",
                    "Gender",
                    MaskFieldKind::Choice {
                        options: ["female", "male", "diverse", "not stated"]
                            .map(String::from)
                            .to_vec(),
                    },
                ),
                field(
                    "vision_correction",
                    "Habitual correction",
                    MaskFieldKind::Choice {
                        options: ["none", "single vision", "progressive", "contact lenses"]
                            .map(String::from)
                            .to_vec(),
                    },
                ),
            ],
        }
    }
}

impl DemographicsMask {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let mask: Self = serde_json::from_str(&text).map_err(|e| ExperimentError::Json {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut ids = std::collections::BTreeSet::new();
        for f in &mask.fields {
            if f.id.is_empty() || !ids.insert(f.id.as_str()) {
                return Err(ExperimentError::Validation(format!(
                    "mask field ids must be unique and non-empty ({:?})",
                    f.id
                )));
            }
        }
        Ok(mask)
    }

    /// Checks submitted demographics: required fields present, integers parse
    /// within bounds, choices among the options, no unknown keys.
    pub fn validate(&self, values: &BTreeMap<String, String>) -> Result<(), ExperimentError> {
        for key in values.keys() {
            if !self.fields.iter().any(|f| &f.id == key) {
                return Err(ExperimentError::Validation(format!(
                    "unknown demographic field {key:?}"
                )));
            }
        }
        for field in &self.fields {
            let Some(value) = values.get(&field.id).filter(|v| !v.is_empty()) else {
                if field.required {
                    return Err(ExperimentError::Validation(format!(
                        "demographic field {:?} is required",
                        field.id
                    )));
                }
                continue;
            };
            let bad = |why: String| {
                Err(ExperimentError::Validation(format!(
                    "demographic field {:?}: {why}",
                    field.id
                )))
            };
            match &field.kind {
                MaskFieldKind::Text => {}
                MaskFieldKind::Integer { min, max } => {
                    let Ok(n) = value.trim().parse::<i64>() else {
                        return bad(format!("{value:?} is not an integer"));
                    };
                    if min.is_some_and(|m| n < m) || max.is_some_and(|m| n > m) {
                        return bad(format!("{n} out of range"));
                    }
                }
                MaskFieldKind::Choice { options } => {
                    if !options.contains(value) {
                        return bad(format!("{value:?} is not one of {options:?}"));
                    }
                }
            }
        }
        Ok(())
    }
}
