//! Request classification and parameter extraction.
//!
//! Every backend's output passes through [`conform`] (schema and provenance
//! check) and [`railguard`] before anyone else sees it.

mod remote;
mod rules;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{canonical_name, canonicalize_allergen};
use crate::inner_speech::ShortTermMemory;
use crate::llm::BackendError;

pub use remote::RemoteRecognizer;
pub use rules::RuleRecognizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    UserInsertion,
    DishInfo,
    MealPreparation,
    OutOfScope,
}

impl IntentKind {
    pub const ALL: [IntentKind; 4] = [
        IntentKind::UserInsertion,
        IntentKind::DishInfo,
        IntentKind::MealPreparation,
        IntentKind::OutOfScope,
    ];

    pub fn key(self) -> &'static str {
        match self {
            IntentKind::UserInsertion => "user_insertion",
            IntentKind::DishInfo => "dish_info",
            IntentKind::MealPreparation => "meal_preparation",
            IntentKind::OutOfScope => "out_of_scope",
        }
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for IntentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        IntentKind::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| format!("unknown intent '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Name,
    Calories,
    Carbs,
    Proteins,
    Fats,
    Allergies,
    DishName,
    UserName,
}

impl ParamName {
    pub const ALL: [ParamName; 8] = [
        ParamName::Name,
        ParamName::Calories,
        ParamName::Carbs,
        ParamName::Proteins,
        ParamName::Fats,
        ParamName::Allergies,
        ParamName::DishName,
        ParamName::UserName,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ParamName::Name => "name",
            ParamName::Calories => "calories",
            ParamName::Carbs => "carbs",
            ParamName::Proteins => "proteins",
            ParamName::Fats => "fats",
            ParamName::Allergies => "allergies",
            ParamName::DishName => "dish_name",
            ParamName::UserName => "user_name",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            ParamName::Calories | ParamName::Carbs | ParamName::Proteins | ParamName::Fats
        )
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ParamName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| format!("unknown parameter '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: ParamName,
    pub required: bool,
}

const fn req(name: ParamName) -> ParamSpec {
    ParamSpec { name, required: true }
}

const fn opt(name: ParamName) -> ParamSpec {
    ParamSpec { name, required: false }
}

static USER_INSERTION: [ParamSpec; 6] = [
    req(ParamName::Name),
    req(ParamName::Calories),
    req(ParamName::Carbs),
    req(ParamName::Proteins),
    req(ParamName::Fats),
    opt(ParamName::Allergies),
];
static DISH_INFO: [ParamSpec; 2] = [req(ParamName::DishName), opt(ParamName::UserName)];
static MEAL_PREPARATION: [ParamSpec; 1] = [req(ParamName::UserName)];

pub fn schema(kind: IntentKind) -> &'static [ParamSpec] {
    match kind {
        IntentKind::UserInsertion => &USER_INSERTION,
        IntentKind::DishInfo => &DISH_INFO,
        IntentKind::MealPreparation => &MEAL_PREPARATION,
        IntentKind::OutOfScope => &[],
    }
}

pub type Params = BTreeMap<ParamName, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: IntentKind,
    pub params: Params,
    pub confidence_note: String,
}

impl Intent {
    pub fn new(kind: IntentKind, params: Params, note: impl Into<String>) -> Self {
        Intent {
            kind,
            params,
            confidence_note: note.into(),
        }
    }

    pub fn out_of_scope(note: impl Into<String>) -> Self {
        Self::new(IntentKind::OutOfScope, Params::new(), note)
    }

    pub fn get(&self, p: ParamName) -> Option<&str> {
        self.params.get(&p).map(String::as_str)
    }

    /// Required parameters that are not bound, in schema order.
    pub fn missing(&self) -> Vec<ParamName> {
        schema(self.kind)
            .iter()
            .filter(|s| s.required && !self.params.contains_key(&s.name))
            .map(|s| s.name)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// Allergy list parsed from the comma separated `allergies` slot.
    pub fn allergy_list(&self) -> Vec<String> {
        self.get(ParamName::Allergies)
            .map(split_list)
            .unwrap_or_default()
    }
}

pub(crate) fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(canonical_name)
        .filter(|x| !x.is_empty())
        .collect()
}

/// What a recognizer may consult besides the utterance.
#[derive(Debug, Clone, Copy)]
pub struct DialogueContext<'a> {
    pub memory: &'a ShortTermMemory,
    /// Intent awaiting clarification, if any.
    pub pending: Option<&'a Intent>,
    /// Parameters the last clarification question asked for.
    pub asked: &'a [ParamName],
}

impl<'a> DialogueContext<'a> {
    pub fn new(memory: &'a ShortTermMemory, pending: Option<&'a Intent>) -> Self {
        Self { memory, pending, asked: &[] }
    }

    pub fn with_asked(self, asked: &'a [ParamName]) -> Self {
        Self { asked, ..self }
    }

    /// Parameters an answer is expected to supply.
    pub fn missing(&self) -> Vec<ParamName> {
        let mut m = self.pending.map(Intent::missing).unwrap_or_default();
        for p in self.asked {
            if !m.contains(p) {
                m.push(*p);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendIdentity {
    pub name: String,
    /// Configuration summary (model, temperature, rule table version).
    pub fingerprint: String,
}

pub trait RecognizerBackend: Send + Sync {
    fn classify(&self, utterance: &str, context: &DialogueContext<'_>) -> Result<Intent, BackendError>;
    fn identity(&self) -> BackendIdentity;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntentError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Lowercase, straight apostrophes, single spaces.
pub fn normalize(text: &str) -> String {
    canonical_name(&text.replace(['\u{2019}', '\u{2018}'], "'"))
}

/// Classifies an utterance with the given backend, then validates and
/// filters the result.
pub fn classify(
    backend: &dyn RecognizerBackend,
    utterance: &str,
    context: &DialogueContext<'_>,
) -> Result<Intent, IntentError> {
    if utterance.trim().is_empty() {
        return Err(IntentError::EmptyUtterance);
    }
    let raw = backend.classify(utterance, context)?;
    let conformed = conform(raw, utterance, context);
    Ok(railguard(conformed, utterance))
}

/// Drops parameters outside the kind's schema and any value that cannot be
/// traced back to the utterance or the dialogue context.
pub fn conform(mut intent: Intent, utterance: &str, context: &DialogueContext<'_>) -> Intent {
    if intent.kind == IntentKind::OutOfScope {
        intent.params.clear();
        return intent;
    }
    let allowed: Vec<ParamName> = schema(intent.kind).iter().map(|s| s.name).collect();
    let mut sources = vec![normalize(utterance)];
    if let Some(p) = context.pending {
        sources.extend(p.params.values().map(|v| normalize(v)));
    }
    let grounded = |value: &str, param: ParamName| -> bool {
        let parts = if param == ParamName::Allergies {
            split_list(value)
        } else {
            vec![normalize(value)]
        };
        parts
            .iter()
            .all(|part| !part.is_empty() && sources.iter().any(|s| s.contains(part.as_str())))
    };
    let mut dropped = Vec::new();
    intent.params.retain(|k, v| {
        let keep = allowed.contains(k) && grounded(v, *k);
        if !keep {
            dropped.push(k.key());
        }
        keep
    });
    if !dropped.is_empty() {
        intent.confidence_note = format!("{}; dropped ungrounded {}", intent.confidence_note, dropped.join(","));
    }
    intent
}

static DENY_UNSUPPORTED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(delete|remove|erase|drop|update|modify|edit|rename|replace|change)\b[^.?!]*\b(users?|profiles?|dish|dishes|allergens?|allerg(y|ies)|recipes?|records?|database|entries|entry)\b",
    )
    .expect("deny pattern")
});

static DENY_OFF_TOPIC: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(weather|forecast|news|jokes?|football|soccer|stocks?|bitcoin|music|songs?|movies?|films?|president|capital of|translate|homework|what time|traffic|horoscope|lottery|poem)\b",
    )
    .expect("deny pattern")
});

/// Demotes to out-of-scope anything matching a deny pattern or carrying a
/// slot value that can never be valid.
pub fn railguard(intent: Intent, utterance: &str) -> Intent {
    if intent.kind == IntentKind::OutOfScope {
        return intent;
    }
    let text = normalize(utterance);
    if DENY_UNSUPPORTED.is_match(&text) {
        return Intent::out_of_scope("railguard: unsupported operation");
    }
    if DENY_OFF_TOPIC.is_match(&text) {
        return Intent::out_of_scope("railguard: off-topic request");
    }
    for (param, value) in &intent.params {
        let ok = if param.is_numeric() {
            parse_amount(value).is_some()
        } else if *param == ParamName::Allergies {
            value
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .all(|s| canonicalize_allergen(s).is_ok())
        } else {
            !canonical_name(value).is_empty()
        };
        if !ok {
            return Intent::out_of_scope(format!("railguard: unusable value for {param}"));
        }
    }
    intent
}

/// A finite, non-negative decimal.
pub fn parse_amount(value: &str) -> Option<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(ParamName, &str)]) -> Params {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn railguard_rejects_unparseable_numbers() {
        let i = Intent::new(
            IntentKind::UserInsertion,
            params(&[(ParamName::Name, "marco"), (ParamName::Calories, "many")]),
            "",
        );
        assert_eq!(railguard(i, "add marco with many calories").kind, IntentKind::OutOfScope);
    }

    #[test]
    fn railguard_passes_well_formed() {
        let i = Intent::new(IntentKind::MealPreparation, params(&[(ParamName::UserName, "anna")]), "r");
        assert_eq!(railguard(i.clone(), "prepare a meal for anna"), i);
    }

    #[test]
    fn railguard_rejects_deletion() {
        let i = Intent::new(IntentKind::DishInfo, params(&[(ParamName::DishName, "rice")]), "r");
        assert_eq!(railguard(i, "please delete the dish rice").kind, IntentKind::OutOfScope);
    }

    #[test]
    fn conform_drops_foreign_and_invented_slots() {
        let memory = ShortTermMemory::default();
        let ctx = DialogueContext::new(&memory, None);
        let i = Intent::new(
            IntentKind::MealPreparation,
            params(&[(ParamName::UserName, "bob"), (ParamName::DishName, "rice")]),
            "r",
        );
        let out = conform(i, "prepare a meal for anna", &ctx);
        assert!(out.params.is_empty());
    }

    #[test]
    fn missing_follows_schema() {
        let i = Intent::new(IntentKind::UserInsertion, params(&[(ParamName::Name, "marco")]), "");
        assert_eq!(
            i.missing(),
            vec![ParamName::Calories, ParamName::Carbs, ParamName::Proteins, ParamName::Fats]
        );
        assert!(Intent::out_of_scope("").missing().is_empty());
    }
}
