//! Bundled sample data: a small dish catalogue with four users, and the
//! labelled utterances used to check intent recognition.

use serde::Deserialize;

use crate::intent::{IntentKind, Params};
use crate::store::{GraphSnapshot, KnowledgeStore};

pub const DEMO_STORE: &str = include_str!("../fixtures/demo_store.json");
pub const INTENT_CORPUS: &str = include_str!("../fixtures/intent_corpus.jsonl");

pub fn demo_store() -> KnowledgeStore {
    let snapshot = GraphSnapshot::from_json(DEMO_STORE).expect("bundled snapshot parses");
    KnowledgeStore::from_snapshot(snapshot).expect("bundled snapshot is valid")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelledUtterance {
    pub utterance: String,
    pub intent: IntentKind,
    pub params: Params,
}

pub fn intent_corpus() -> Vec<LabelledUtterance> {
    INTENT_CORPUS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("corpus line parses"))
        .collect()
}
