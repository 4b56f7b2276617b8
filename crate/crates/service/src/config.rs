//! Service settings read from `ADVISOR_*` environment variables.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use advisor_core::inner_speech::SessionConfig;
use advisor_core::llm::{LlmSettings, Temperatures};
use advisor_core::solver::SolverConfig;
use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Rule recognizer and templates; no network.
    Deterministic,
    /// An OpenAI-compatible chat endpoint.
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub snapshot: Option<PathBuf>,
    pub backend: BackendKind,
    pub llm: LlmSettings,
    pub session: SessionConfig,
    pub solver: SolverConfig,
    pub transcript_log: Option<PathBuf>,
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            snapshot: None,
            backend: BackendKind::Deterministic,
            llm: LlmSettings {
                endpoint: "http://127.0.0.1:11434/v1/chat/completions".into(),
                api_key: None,
                model: "llama3".into(),
                temperatures: Temperatures::default(),
                timeout: Duration::from_secs(30),
            },
            session: SessionConfig::default(),
            solver: SolverConfig::default(),
            transcript_log: None,
            bind: "127.0.0.1:8080".into(),
        }
    }
}

fn parse<T: std::str::FromStr>(vars: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match vars.get(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow::anyhow!("{key}={v:?}: {e}")),
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self> {
        Self::from_vars(&std::env::vars().filter(|(k, _)| k.starts_with("ADVISOR_")).collect())
    }

    pub fn from_vars(vars: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = ServiceConfig {
            snapshot: vars.get("ADVISOR_SNAPSHOT").map(PathBuf::from),
            transcript_log: vars.get("ADVISOR_TRANSCRIPT_LOG").map(PathBuf::from),
            ..ServiceConfig::default()
        };
        if let Some(b) = vars.get("ADVISOR_BIND") {
            c.bind = b.clone();
        }
        c.backend = match vars.get("ADVISOR_BACKEND").map(String::as_str) {
            None | Some("deterministic") => BackendKind::Deterministic,
            Some("remote") => BackendKind::Remote,
            Some(other) => bail!("ADVISOR_BACKEND must be 'deterministic' or 'remote', not {other:?}"),
        };
        if let Some(e) = vars.get("ADVISOR_LLM_ENDPOINT") {
            c.llm.endpoint = e.clone();
        }
        c.llm.api_key = vars.get("ADVISOR_LLM_API_KEY").cloned();
        if let Some(m) = vars.get("ADVISOR_LLM_MODEL") {
            c.llm.model = m.clone();
        }
        if let Some(s) = parse::<f64>(vars, "ADVISOR_LLM_TIMEOUT_SECS")? {
            c.llm.timeout = Duration::try_from_secs_f64(s).context("ADVISOR_LLM_TIMEOUT_SECS")?;
        }
        let t = &mut c.llm.temperatures;
        t.intent = parse(vars, "ADVISOR_TEMP_INTENT")?.unwrap_or(t.intent);
        t.inner_speech = parse(vars, "ADVISOR_TEMP_INNER")?.unwrap_or(t.inner_speech);
        t.outer_speech = parse(vars, "ADVISOR_TEMP_OUTER")?.unwrap_or(t.outer_speech);
        for (name, v) in [("intent", t.intent), ("inner", t.inner_speech), ("outer", t.outer_speech)] {
            if !(0.0..=2.0).contains(&v) {
                bail!("temperature for {name} must be within 0..=2, got {v}");
            }
        }
        let s = &mut c.session;
        s.replan_cap = parse(vars, "ADVISOR_REPLAN_CAP")?.unwrap_or(s.replan_cap);
        s.transparency = parse(vars, "ADVISOR_TRANSPARENCY")?.unwrap_or(s.transparency);
        s.memory_budget = parse(vars, "ADVISOR_MEMORY_BUDGET")?.unwrap_or(s.memory_budget);
        s.validate()?;
        let solver = &mut c.solver;
        solver.max_dishes = parse(vars, "ADVISOR_MAX_DISHES")?.unwrap_or(solver.max_dishes);
        solver.max_solutions = parse(vars, "ADVISOR_MAX_SOLUTIONS")?.unwrap_or(solver.max_solutions);
        if let Some(th) = parse::<f64>(vars, "ADVISOR_THRESHOLD")? {
            *solver = solver.clone().with_threshold(th)?;
        }
        solver.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_are_deterministic() {
        let c = ServiceConfig::from_vars(&BTreeMap::new()).unwrap();
        assert_eq!(c.backend, BackendKind::Deterministic);
        assert_eq!(c.session.replan_cap, 3);
        assert_eq!(c.solver.threshold_bp, 1000);
    }

    #[test]
    fn overrides_apply() {
        let c = ServiceConfig::from_vars(&vars(&[
            ("ADVISOR_REPLAN_CAP", "2"),
            ("ADVISOR_THRESHOLD", "0.05"),
            ("ADVISOR_TEMP_OUTER", "0.7"),
            ("ADVISOR_BACKEND", "remote"),
        ]))
        .unwrap();
        assert_eq!(c.session.replan_cap, 2);
        assert_eq!(c.solver.threshold_bp, 500);
        assert_eq!(c.llm.temperatures.outer_speech, 0.7);
        assert_eq!(c.backend, BackendKind::Remote);
    }

    #[test]
    fn bad_values_are_refused() {
        for bad in [
            ("ADVISOR_REPLAN_CAP", "0"),
            ("ADVISOR_REPLAN_CAP", "three"),
            ("ADVISOR_BACKEND", "magic"),
            ("ADVISOR_TEMP_INTENT", "5"),
            ("ADVISOR_MAX_DISHES", "0"),
        ] {
            assert!(ServiceConfig::from_vars(&vars(&[bad])).is_err(), "{bad:?}");
        }
    }
}
