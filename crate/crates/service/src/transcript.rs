//! Per-turn records as exposed over HTTP, logged as JSONL and rendered for
//! golden transcripts.

use std::fmt::Write as _;

use advisor_core::engine::TurnOutcome;
use advisor_core::explainer::ExplanationKind;
use advisor_core::inner_speech::{Effect, SessionState};
use advisor_core::intent::Intent;
use advisor_core::timing::StageTiming;
use serde::Serialize;

pub const TURN_RECORD_SCHEMA: &str = include_str!("../assets/turn_record.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MealRecord {
    pub dishes: Vec<String>,
    pub dish_ids: Vec<u32>,
    pub score: f64,
    pub deviations_percent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverRecord {
    pub safe_dishes: usize,
    pub explored_nodes: u64,
    pub pruned_nodes: u64,
    pub meals: Vec<MealRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnRecord {
    pub session_id: String,
    pub turn: u32,
    pub utterance: String,
    pub reply: String,
    pub reply_kind: ExplanationKind,
    pub effect: Effect,
    pub intent: Option<Intent>,
    /// Inner-speech notes; empty when the session has transparency off.
    pub disclosed_notes: Vec<String>,
    pub queries: Vec<String>,
    pub solver: Option<SolverRecord>,
    pub state: SessionState,
    pub replans_used: u32,
    pub timings: Vec<StageTiming>,
}

impl TurnRecord {
    pub fn new(session_id: &str, utterance: &str, o: &TurnOutcome) -> Self {
        TurnRecord {
            session_id: session_id.to_string(),
            turn: o.turn,
            utterance: utterance.to_string(),
            reply: o.reply.clone(),
            reply_kind: o.reply_kind,
            effect: o.effect,
            intent: o.intent.clone(),
            disclosed_notes: o.notes.iter().map(|n| n.render()).collect(),
            queries: o.queries.clone(),
            solver: o.solver.as_ref().map(|s| SolverRecord {
                safe_dishes: s.safe_dishes,
                explored_nodes: s.explored_nodes,
                pruned_nodes: s.pruned_nodes,
                meals: s
                    .solutions
                    .iter()
                    .map(|m| MealRecord {
                        dishes: m.dish_names.clone(),
                        dish_ids: m.dish_ids.iter().map(|d| d.0).collect(),
                        score: m.score.as_f64(),
                        deviations_percent: m.deviations.iter().map(|d| d.signed_percent_tenths() as f64 / 10.0).collect(),
                    })
                    .collect(),
            }),
            state: o.state,
            replans_used: o.replans_used,
            timings: o.timings.clone(),
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializes")
}

/// Human-readable transcript of everything deterministic in the records
/// (timings are left out).
pub fn render(records: &[TurnRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "> {}", r.utterance);
        for line in r.reply.lines() {
            let _ = writeln!(out, "< {line}");
        }
        let intent = match &r.intent {
            Some(i) => format!("{} {}", i.kind, json(&i.params)),
            None => "-".into(),
        };
        let _ = writeln!(out, "  intent: {intent}");
        for n in &r.disclosed_notes {
            let _ = writeln!(out, "  note {n}");
        }
        for q in &r.queries {
            let _ = writeln!(out, "  query {q}");
        }
        if let Some(s) = &r.solver {
            let _ = writeln!(
                out,
                "  solver: {} safe dishes, {} meals, {} explored, {} pruned",
                s.safe_dishes,
                s.meals.len(),
                s.explored_nodes,
                s.pruned_nodes
            );
        }
        let _ = writeln!(
            out,
            "  effect: {} -> {} (replans {})",
            json(&r.effect).trim_matches('"'),
            r.state,
            r.replans_used
        );
    }
    out
}
