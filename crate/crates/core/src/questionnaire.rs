//! Questionnaires loaded at runtime from `<abbreviation>.json` files.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{create_unique_file, validate_path_component, Session};

#[derive(Debug, Error)]
pub enum QuestionnaireError {
    #[error("questionnaire file not found: {}", .path.display())]
    NotFound { path: PathBuf },
    #[error("{}", match .item { Some(id) => format!("item {id:?}: {message}"), None => message.clone() })]
    Validation {
        item: Option<String>,
        message: String,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(item: Option<&str>, message: impl Into<String>) -> QuestionnaireError {
    QuestionnaireError::Validation {
        item: item.map(str::to_string),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ItemKind {
    Likert {
        min: i64,
        max: i64,
        /// Labels for the scale ends or every point, shown by the UI.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        anchors: Vec<String>,
    },
    Choice {
        options: Vec<String>,
    },
    FreeText,
    Slider {
        min: f64,
        max: f64,
        step: f64,
    },
}

fn yes() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
    #[serde(flatten)]
    pub kind: ItemKind,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub abbreviation: String,
    #[serde(default)]
    pub title: String,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Integer(i64),
    Number(f64),
    Text(String),
}

impl Answer {
    fn as_f64(&self) -> Option<f64> {
        match *self {
            Answer::Integer(i) => Some(i as f64),
            Answer::Number(x) => Some(x),
            Answer::Text(_) => None,
        }
    }
}

/// Answers to one questionnaire presented in one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub questionnaire: String,
    pub scene_name: String,
    pub answers: BTreeMap<String, Answer>,
    pub completed_at: DateTime<Utc>,
}

impl Item {
    fn validate(&self) -> Result<(), QuestionnaireError> {
        let bad = |m: &str| Err(invalid(Some(&self.id), m));
        if self.id.trim().is_empty() {
            return Err(invalid(None, "item id must not be empty"));
        }
        match &self.kind {
            ItemKind::Likert { min, max, .. } if min >= max => bad("likert min must be below max"),
            ItemKind::Choice { options } if options.len() < 2 => {
                bad("choice needs at least 2 options")
            }
            ItemKind::Slider { min, max, step } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    bad("slider min must be below max")
                } else if !(*step > 0.0) {
                    bad("slider step must be > 0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Type- and range-checks one answer.
    pub fn check(&self, answer: &Answer) -> Result<(), QuestionnaireError> {
        let bad = |m: String| Err(invalid(Some(&self.id), m));
        match (&self.kind, answer) {
            (ItemKind::Likert { min, max, .. }, Answer::Integer(v)) => {
                if v < min || v > max {
                    bad(format!("answer {v} outside scale {min}..{max}"))
                } else {
                    Ok(())
                }
            }
            (ItemKind::Choice { options }, Answer::Text(t)) => {
                if options.contains(t) {
                    Ok(())
                } else {
                    bad(format!("{t:?} is not one of the options"))
                }
            }
            (ItemKind::FreeText, Answer::Text(_)) => Ok(()),
            (ItemKind::Slider { min, max, step }, a) if a.as_f64().is_some() => {
                let v = a.as_f64().unwrap();
                let k = (v - min) / step;
                if v < *min || v > *max {
                    bad(format!("answer {v} outside {min}..{max}"))
                } else if (k - k.round()).abs() > 1e-9 {
                    bad(format!("answer {v} is not on the {step} step grid"))
                } else {
                    Ok(())
                }
            }
            (kind, a) => bad(format!(
                "answer {a:?} does not fit a {} item",
                kind_name(kind)
            )),
        }
    }
}

fn kind_name(kind: &ItemKind) -> &'static str {
    match kind {
        ItemKind::Likert { .. } => "likert",
        ItemKind::Choice { .. } => "choice",
        ItemKind::FreeText => "free_text",
        ItemKind::Slider { .. } => "slider",
    }
}

impl Questionnaire {
    pub fn validate(&self) -> Result<(), QuestionnaireError> {
        if self.abbreviation.trim().is_empty() {
            return Err(invalid(None, "abbreviation must not be empty"));
        }
        if self.items.is_empty() {
            return Err(invalid(None, "questionnaire needs at least one item"));
        }
        let mut ids = BTreeSet::new();
        for item in &self.items {
            item.validate()?;
            if !ids.insert(item.id.as_str()) {
                return Err(invalid(Some(&item.id), "duplicate item id"));
            }
        }
        Ok(())
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Checks that every answer fits its item and every required item is
    /// answered.
    pub fn check_answers(
        &self,
        answers: &BTreeMap<String, Answer>,
    ) -> Result<(), QuestionnaireError> {
        for (id, answer) in answers {
            self.item(id)
                .ok_or_else(|| invalid(Some(id), "no such item"))?
                .check(answer)?;
        }
        let missing: Vec<&str> = self
            .items
            .iter()
            .filter(|i| i.required && !answers.contains_key(&i.id))
            .map(|i| i.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(invalid(
                None,
                format!("unanswered items: {}", missing.join(", ")),
            ));
        }
        Ok(())
    }

    /// A complete, valid answer set drawn uniformly per item, for headless runs.
    pub fn auto_answers<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<String, Answer> {
        self.items
            .iter()
            .map(|item| {
                let answer = match &item.kind {
                    ItemKind::Likert { min, max, .. } => {
                        Answer::Integer(rng.random_range(*min..=*max))
                    }
                    ItemKind::Choice { options } => {
                        Answer::Text(options.choose(rng).expect("validated").clone())
                    }
                    ItemKind::FreeText => Answer::Text(String::new()),
                    ItemKind::Slider { min, max, step } => {
                        let steps = ((max - min) / step + 1e-9).floor() as i64;
                        Answer::Number(min + step * rng.random_range(0..=steps) as f64)
                    }
                };
                (item.id.clone(), answer)
            })
            .collect()
    }
}

pub fn questionnaire_path(abbreviation: &str, search_dir: &Path) -> PathBuf {
    search_dir.join(format!("{abbreviation}.json"))
}

/// Reads and validates `search_dir/<abbreviation>.json`.
pub fn load_questionnaire(
    abbreviation: &str,
    search_dir: &Path,
) -> Result<Questionnaire, QuestionnaireError> {
    validate_path_component("questionnaire abbreviation", abbreviation)
        .map_err(|e| invalid(None, e.to_string()))?;
    let path = questionnaire_path(abbreviation, search_dir);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(QuestionnaireError::NotFound { path })
        }
        Err(source) => return Err(QuestionnaireError::Io { path, source }),
    };
    let q = parse_questionnaire(&text).map_err(|e| match e {
        QuestionnaireError::Validation { item, message } => QuestionnaireError::Validation {
            item,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    if q.abbreviation != abbreviation {
        return Err(invalid(
            None,
            format!(
                "{} declares abbreviation {:?}, expected {abbreviation:?}",
                path.display(),
                q.abbreviation
            ),
        ));
    }
    Ok(q)
}

/// Parses and validates questionnaire JSON. Schema errors name the
/// offending item when one can be singled out.
pub fn parse_questionnaire(text: &str) -> Result<Questionnaire, QuestionnaireError> {
    match serde_json::from_str::<Questionnaire>(text) {
        Ok(q) => {
            q.validate()?;
            Ok(q)
        }
        Err(e) => Err(locate_schema_error(text).unwrap_or_else(|| invalid(None, e.to_string()))),
    }
}

fn locate_schema_error(text: &str) -> Option<QuestionnaireError> {
    let value: serde_json::Value = serde_json::from_str(text).ok()?;
    let items = value.get("items")?.as_array()?;
    items.iter().enumerate().find_map(|(i, raw)| {
        serde_json::from_value::<Item>(raw.clone()).err().map(|e| {
            let id = raw
                .get("id")
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .unwrap_or_else(|| format!("#{i}"));
            invalid(Some(&id), e.to_string())
        })
    })
}

pub fn save_questionnaire(q: &Questionnaire, dir: &Path) -> Result<PathBuf, QuestionnaireError> {
    q.validate()?;
    validate_path_component("questionnaire abbreviation", &q.abbreviation)
        .map_err(|e| invalid(None, e.to_string()))?;
    let path = questionnaire_path(&q.abbreviation, dir);
    let json = serde_json::to_string_pretty(q).expect("questionnaire serializes");
    std::fs::write(&path, json + "\n").map_err(|source| QuestionnaireError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Persists a complete response set to
/// `session_dir/<scene_name>/responses_<abbrev>.json`, suffixing on collision.
pub fn record_responses(
    responses: &ResponseSet,
    questionnaire: &Questionnaire,
    session: &Session,
) -> Result<PathBuf, QuestionnaireError> {
    if responses.questionnaire != questionnaire.abbreviation {
        return Err(invalid(
            None,
            format!(
                "responses are for {:?}, not {:?}",
                responses.questionnaire, questionnaire.abbreviation
            ),
        ));
    }
    questionnaire.check_answers(&responses.answers)?;
    let dir = session
        .scene_dir(&responses.scene_name)
        .map_err(|e| invalid(None, e.to_string()))?;
    let stem = format!("responses_{}", questionnaire.abbreviation);
    let io = |path: &Path, source| QuestionnaireError::Io {
        path: path.to_path_buf(),
        source,
    };
    let (mut file, path) = create_unique_file(&dir, &stem, "json").map_err(|e| io(&dir, e))?;
    let json = serde_json::to_string_pretty(responses).expect("responses serialize");
    file.write_all(json.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| io(&path, e))?;
    Ok(path)
}

pub fn read_responses(path: &Path) -> Result<ResponseSet, QuestionnaireError> {
    let text = std::fs::read_to_string(path).map_err(|source| QuestionnaireError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| invalid(None, format!("{}: {e}", path.display())))
}
