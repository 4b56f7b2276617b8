//! Scripted dialogues replayed against the demo store with deterministic
//! backends. A script is one utterance per line; `# key: value` lines set
//! options:
//!
//! ```text
//! # covers: one_replan, topic_switch
//! # replan_cap: 2
//! # transparency: false
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use advisor_core::engine::Engine;
use advisor_core::explainer::ExplanationKind;
use advisor_core::fixtures;
use advisor_core::inner_speech::{DialogueSession, Effect, SessionConfig};
use advisor_core::store::SharedStore;
use advisor_core::templates::Templates;
use anyhow::{bail, Context, Result};

use crate::transcript::{render, TurnRecord};

pub const TAGS: [&str; 6] = ["complete", "one_replan", "two_replan", "topic_switch", "out_of_scope", "replan_cap"];

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub name: String,
    pub covers: Vec<String>,
    pub config: SessionConfig,
    pub utterances: Vec<String>,
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn parse_script(name: &str, text: &str) -> Result<Script> {
    let mut s = Script { name: name.to_string(), covers: vec![], config: SessionConfig::default(), utterances: vec![] };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let Some((k, v)) = meta.split_once(':') else { continue };
            let v = v.trim();
            match k.trim() {
                "covers" => s.covers.extend(v.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty())),
                "replan_cap" => s.config.replan_cap = v.parse().context("replan_cap")?,
                "transparency" => s.config.transparency = v.parse().context("transparency")?,
                other => bail!("{name}: unknown option '{other}'"),
            }
            continue;
        }
        s.utterances.push(line.to_string());
    }
    for t in &s.covers {
        if !TAGS.contains(&t.as_str()) {
            bail!("{name}: unknown tag '{t}'");
        }
    }
    Ok(s)
}

/// All `*.script` files in the golden directory, sorted by name.
pub fn load_scripts() -> Result<Vec<Script>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(golden_dir())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "script"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().expect("file name").to_string_lossy().to_string();
            parse_script(&name, &fs::read_to_string(p)?)
        })
        .collect()
}

pub struct Replay {
    pub records: Vec<TurnRecord>,
    pub store: SharedStore,
}

impl Replay {
    pub fn transcript(&self) -> String {
        render(&self.records)
    }
}

/// Replays a script against a fresh copy of the demo store.
pub fn replay(script: &Script) -> Result<Replay> {
    let store = fixtures::demo_store().into_shared();
    let engine = Engine::new(
        store.clone(),
        advisor_core::engine::Backends::deterministic(),
        Templates::english(),
        Default::default(),
    );
    let mut session = DialogueSession::new(script.name.clone(), &script.config)?;
    let mut records = Vec::new();
    for u in &script.utterances {
        let outcome = engine.run_turn(&mut session, u)?;
        records.push(TurnRecord::new(&session.id, u, &outcome));
    }
    Ok(Replay { records, store })
}

pub fn golden_path(script: &Script) -> PathBuf {
    golden_dir().join(format!("{}.golden", script.name))
}

/// Checks that a replay actually exhibits the behaviour a tag names.
pub fn exhibits(tag: &str, records: &[TurnRecord], topic_switch_text: &str) -> bool {
    let effects: Vec<Effect> = records.iter().map(|r| r.effect).collect();
    // A request answered after exactly `n` clarification questions.
    let answered_after = |n: usize| {
        effects.iter().enumerate().any(|(i, e)| {
            *e == Effect::Reply
                && i >= n
                && effects[i - n..i].iter().all(|x| *x == Effect::AskClarification)
                && (i == n || effects[i - n - 1] != Effect::AskClarification)
        })
    };
    match tag {
        "complete" => records.iter().enumerate().any(|(i, r)| {
            r.effect == Effect::Reply && (i == 0 || records[i - 1].effect != Effect::AskClarification)
        }),
        "one_replan" => answered_after(1),
        "two_replan" => answered_after(2),
        "topic_switch" => records.iter().any(|r| r.reply.starts_with(topic_switch_text)),
        "out_of_scope" => records.iter().any(|r| r.reply_kind == ExplanationKind::Refusal),
        "replan_cap" => effects.contains(&Effect::ReplanCapExceeded),
        _ => false,
    }
}

pub fn topic_switch_text() -> String {
    Templates::english().raw("speech.topic_switch").expect("template").to_string()
}
