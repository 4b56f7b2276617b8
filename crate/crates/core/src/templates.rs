//! Versioned phrase tables with `{placeholder}` substitution.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

pub const ENGLISH: &str = include_str!("../assets/templates/en.v1.toml");

/// Every key the engine looks up. A locale must define all of them.
pub const REQUIRED_KEYS: &[&str] = &[
    "param.name",
    "param.calories",
    "param.carbs",
    "param.proteins",
    "param.fats",
    "param.allergies",
    "param.dish_name",
    "param.user_name",
    "action.user_insertion",
    "action.dish_info",
    "action.meal_preparation",
    "speech.clarify",
    "speech.not_found_dish",
    "speech.not_found_user",
    "speech.duplicate_user",
    "speech.invalid_values",
    "speech.out_of_scope",
    "speech.replan_cap",
    "speech.topic_switch",
    "speech.farewell",
    "speech.backend_unavailable",
    "speech.no_solution",
    "speech.no_safe_dishes",
    "speech.and",
    "explain.dish",
    "explain.dish_safe",
    "explain.dish_unsafe",
    "explain.user_created",
    "explain.meal_header",
    "explain.meal_excluded",
    "explain.meal_rank",
    "explain.none",
    "inner.intent_received",
    "inner.params_missing",
    "inner.params_complete",
    "inner.out_of_scope",
    "inner.query_planned",
    "inner.query_observed",
    "inner.solver_planned",
    "inner.solver_observed",
    "inner.clarification_asked",
    "inner.replan_cap",
    "inner.conclusion",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template table does not parse: {0}")]
    Parse(String),
    #[error("no template '{0}'")]
    MissingKey(String),
    #[error("template '{key}' needs a value for '{placeholder}'")]
    Unfilled { key: String, placeholder: String },
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").expect("pattern"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    version: String,
    entries: BTreeMap<String, String>,
}

impl Templates {
    /// Reads a table of `[section] key = "text"` entries; `meta.version`
    /// names the table.
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| TemplateError::Parse(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (section, body) in &doc {
            let toml::Value::Table(body) = body else {
                return Err(TemplateError::Parse(format!("'{section}' is not a section")));
            };
            for (key, value) in body {
                let toml::Value::String(s) = value else {
                    return Err(TemplateError::Parse(format!("'{section}.{key}' is not a string")));
                };
                entries.insert(format!("{section}.{key}"), s.clone());
            }
        }
        let version = entries
            .get("meta.version")
            .cloned()
            .ok_or_else(|| TemplateError::MissingKey("meta.version".into()))?;
        Ok(Templates { version, entries })
    }

    pub fn english() -> Self {
        Self::from_toml(ENGLISH).expect("bundled templates parse")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn raw(&self, key: &str) -> Result<&str, TemplateError> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| TemplateError::MissingKey(key.to_string()))
    }

    pub fn placeholders(&self, key: &str) -> Result<BTreeSet<String>, TemplateError> {
        Ok(PLACEHOLDER
            .captures_iter(self.raw(key)?)
            .map(|c| c[1].to_string())
            .collect())
    }

    pub fn render(&self, key: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let raw = self.raw(key)?;
        let mut out = String::with_capacity(raw.len());
        let mut last = 0;
        for caps in PLACEHOLDER.captures_iter(raw) {
            let whole = caps.get(0).expect("match");
            let name = &caps[1];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Unfilled {
                    key: key.to_string(),
                    placeholder: name.to_string(),
                })?;
            out.push_str(&raw[last..whole.start()]);
            out.push_str(value);
            last = whole.end();
        }
        out.push_str(&raw[last..]);
        Ok(out)
    }

    /// Keys from [`REQUIRED_KEYS`] that this table lacks.
    pub fn missing_keys(&self) -> Vec<&'static str> {
        REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| !self.entries.contains_key(*k))
            .collect()
    }

    /// Joins items as "a", "a and b", "a, b and c".
    pub fn join_list(&self, items: &[String]) -> String {
        let and = self.raw("speech.and").unwrap_or("and");
        match items {
            [] => String::new(),
            [one] => one.clone(),
            [init @ .., last] => format!("{} {and} {last}", init.join(", ")),
        }
    }
}

impl Default for Templates {
    fn default() -> Self {
        Self::english()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_covers_required_keys() {
        let t = Templates::english();
        assert_eq!(t.missing_keys(), Vec::<&str>::new());
        assert_eq!(t.version(), "en.v1");
    }

    #[test]
    fn render_substitutes_and_reports_gaps() {
        let t = Templates::english();
        let s = t.render("speech.clarify", &[("action", "add the user"), ("missing", "fats (g)")]).unwrap();
        assert_eq!(s, "To add the user, I still need fats (g). Could you tell me?");
        assert_eq!(
            t.render("speech.clarify", &[("action", "x")]),
            Err(TemplateError::Unfilled { key: "speech.clarify".into(), placeholder: "missing".into() })
        );
        assert!(matches!(t.render("speech.nope", &[]), Err(TemplateError::MissingKey(_))));
    }

    #[test]
    fn substituted_braces_are_not_reexpanded() {
        let t = Templates::from_toml("[meta]\nversion = \"t\"\n[a]\nb = \"<{x}>\"\n").unwrap();
        assert_eq!(t.render("a.b", &[("x", "{x}")]).unwrap(), "<{x}>");
    }

    #[test]
    fn list_joining() {
        let t = Templates::english();
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(t.join_list(&v(&["a"])), "a");
        assert_eq!(t.join_list(&v(&["a", "b"])), "a and b");
        assert_eq!(t.join_list(&v(&["a", "b", "c"])), "a, b and c");
    }

    #[test]
    fn swapped_locale_is_used() {
        let it = ENGLISH.replace("Could you tell me?", "Me lo dici?").replace("en.v1", "it.v1");
        let t = Templates::from_toml(&it).unwrap();
        assert!(t.render("speech.clarify", &[("action", "a"), ("missing", "b")]).unwrap().ends_with("Me lo dici?"));
        assert_eq!(t.version(), "it.v1");
    }
}
