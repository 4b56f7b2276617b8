//! One dialogue turn: recognize, supervise, then either ask, refuse or
//! execute the plan (solving for meals), and finally explain.

use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{allergen_set, Dish, DishId};
use crate::explainer::{format_threshold, ExplainError, Explainer, Explanation, ExplanationKind, RemoteSpeech, SpeechBackend, TemplateSpeech};
use crate::inner_speech::{
    merge_clarification, supervise, DialogueSession, Effect, InnerSpeechNote, NoteComposer, NoteStage,
    RemoteComposer, SessionEvent, SessionState, Supervision, TemplateComposer,
};
use crate::intent::{classify, BackendIdentity, DialogueContext, Intent, IntentError, IntentKind, ParamName, RecognizerBackend, RemoteRecognizer, RuleRecognizer};
use crate::llm::{RemoteModel, Temperatures};
use crate::query::{compile, execute, QueryOutput, QueryResult};
use crate::solver::{solve, MealSolution, SolverConfig};
use crate::store::SharedStore;
use crate::templates::{TemplateError, Templates};
use crate::timing::{Stage, StageTiming, TurnClock};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TurnError {
    #[error("session is closed")]
    SessionClosed,
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<TemplateError> for TurnError {
    fn from(e: TemplateError) -> Self {
        TurnError::Internal(e.to_string())
    }
}

impl From<ExplainError> for TurnError {
    fn from(e: ExplainError) -> Self {
        TurnError::Internal(e.to_string())
    }
}

/// The three swappable language backends.
#[derive(Clone)]
pub struct Backends {
    pub recognizer: Arc<dyn RecognizerBackend>,
    pub composer: Arc<dyn NoteComposer>,
    pub speech: Arc<dyn SpeechBackend>,
}

impl Backends {
    /// Rule recognizer and templates only: no network, byte-stable output.
    pub fn deterministic() -> Self {
        Backends {
            recognizer: Arc::new(RuleRecognizer),
            composer: Arc::new(TemplateComposer),
            speech: Arc::new(TemplateSpeech),
        }
    }

    pub fn remote(model: RemoteModel, temperatures: Temperatures) -> Self {
        Backends {
            recognizer: Arc::new(RemoteRecognizer::new(model.clone(), temperatures.intent)),
            composer: Arc::new(RemoteComposer::new(model.clone(), temperatures.inner_speech)),
            speech: Arc::new(RemoteSpeech::new(model, temperatures.outer_speech)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub safe_dishes: usize,
    pub explored_nodes: u64,
    pub pruned_nodes: u64,
    pub solutions: Vec<MealSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnOutcome {
    pub turn: u32,
    pub intent: Option<Intent>,
    pub reply: String,
    pub reply_kind: ExplanationKind,
    pub effect: Effect,
    /// This turn's inner-speech notes; empty when transparency is off.
    pub notes: Vec<InnerSpeechNote>,
    pub queries: Vec<String>,
    pub results: Vec<QueryResult>,
    pub solver: Option<SolverSummary>,
    pub state: SessionState,
    pub replans_used: u32,
    pub timings: Vec<StageTiming>,
}

static FAREWELL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(bye|goodbye|good bye|bye bye|see you|farewell|quit|exit|that's all|that is all)\b").expect("pattern")
});

pub fn is_farewell(utterance: &str) -> bool {
    FAREWELL.is_match(&crate::intent::normalize(utterance))
}

struct Turn {
    clock: TurnClock,
    intent: Option<Intent>,
    queries: Vec<String>,
    results: Vec<QueryResult>,
    solver: Option<SolverSummary>,
}

pub struct Engine {
    store: SharedStore,
    backends: Backends,
    explainer: Explainer,
    solver: SolverConfig,
}

impl Engine {
    pub fn new(store: SharedStore, backends: Backends, templates: Templates, solver: SolverConfig) -> Self {
        Engine { store, backends, explainer: Explainer::new(templates), solver }
    }

    pub fn deterministic(store: SharedStore) -> Self {
        Self::new(store, Backends::deterministic(), Templates::english(), SolverConfig::default())
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn identity(&self) -> Vec<BackendIdentity> {
        vec![
            self.backends.recognizer.identity(),
            BackendIdentity { name: "inner_speech".into(), fingerprint: self.backends.composer.identity() },
            BackendIdentity { name: "speech".into(), fingerprint: self.backends.speech.identity() },
            BackendIdentity { name: "templates".into(), fingerprint: self.explainer.templates().version().into() },
        ]
    }

    fn note(&self, session: &mut DialogueSession, t: &mut Turn, stage: NoteStage, key: &str, values: &[(&str, &str)]) -> Result<(), TurnError> {
        let draft = self.explainer.templates().render(key, values)?;
        let composer = &self.backends.composer;
        let memory = &session.memory;
        let text = t.clock.time(Stage::InnerSpeech, || composer.compose(stage, &draft, memory));
        session.record(stage, text);
        Ok(())
    }

    pub fn run_turn(&self, session: &mut DialogueSession, utterance: &str) -> Result<TurnOutcome, TurnError> {
        if session.state() == SessionState::Closed {
            return Err(TurnError::SessionClosed);
        }
        if utterance.trim().is_empty() {
            return Err(TurnError::EmptyUtterance);
        }
        session.begin_turn();
        let mut t = Turn { clock: TurnClock::start(), intent: None, queries: vec![], results: vec![], solver: None };

        if is_farewell(utterance) {
            let effect = session.apply(SessionEvent::Farewell);
            let e = self.explainer.notice("speech.farewell", &[])?;
            return self.finish(session, t, effect, e);
        }

        let recognized = {
            let ctx = DialogueContext::new(&session.memory, session.pending.as_ref()).with_asked(&session.asked);
            let recognizer = &self.backends.recognizer;
            t.clock.time(Stage::IntentRecognition, || classify(recognizer.as_ref(), utterance, &ctx))
        };
        let intent = match recognized {
            Ok(i) => i,
            Err(IntentError::EmptyUtterance) => return Err(TurnError::EmptyUtterance),
            Err(IntentError::Backend(_)) => {
                let effect = session.apply(SessionEvent::BackendDown);
                let e = self.explainer.notice("speech.backend_unavailable", &[])?;
                return self.finish(session, t, effect, e);
            }
        };
        let params = if intent.params.is_empty() {
            "none".to_string()
        } else {
            intent.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
        };
        self.note(session, &mut t, NoteStage::IntentReceived, "inner.intent_received", &[
            ("kind", intent.kind.key()),
            ("note", &intent.confidence_note),
            ("params", &params),
        ])?;

        let (merged, switched, verdict) = t.clock.time(Stage::InnerSpeech, || {
            if intent.kind == IntentKind::OutOfScope {
                let v = supervise(&intent);
                return (intent, false, v);
            }
            let (merged, switched) = merge_clarification(session.pending.as_ref(), intent);
            let v = supervise(&merged);
            (merged, switched, v)
        });
        t.intent = Some(merged.clone());

        let missing = match verdict {
            Supervision::Reject(_) => {
                let effect = session.apply(SessionEvent::OutOfScope);
                self.note(session, &mut t, NoteStage::ParamsChecked, "inner.out_of_scope", &[])?;
                let e = self.explainer.refuse_out_of_scope()?;
                return self.finish(session, t, effect, e);
            }
            Supervision::Clarify(m) => m,
            Supervision::Proceed => vec![],
        };
        let complete = missing.is_empty();
        let event = if session.pending.is_some() && !switched {
            SessionEvent::Answer { complete }
        } else {
            SessionEvent::NewRequest { complete }
        };
        let effect = session.apply(event);
        let prefix = if switched { Some(self.explainer.templates().raw("speech.topic_switch")?.to_string()) } else { None };
        let labels = |ps: &[ParamName]| ps.iter().map(|p| p.key().to_string()).collect::<Vec<_>>().join(", ");
        let reply = match effect {
            Effect::AskClarification => {
                self.note(session, &mut t, NoteStage::ParamsChecked, "inner.params_missing", &[("missing", &labels(&missing))])?;
                self.clarify(session, &mut t, merged, missing, None)?
            }
            Effect::ReplanCapExceeded => {
                self.note(session, &mut t, NoteStage::ParamsChecked, "inner.params_missing", &[("missing", &labels(&missing))])?;
                self.give_up(session, &mut t, None)?
            }
            Effect::Execute => {
                self.note(session, &mut t, NoteStage::ParamsChecked, "inner.params_complete", &[])?;
                return self.execute_plan(session, t, merged, prefix);
            }
            other => return Err(TurnError::Internal(format!("unexpected effect {other:?} for a request"))),
        };
        let reply = with_prefix(prefix, reply);
        self.finish(session, t, effect, reply)
    }

    fn clarify(
        &self,
        session: &mut DialogueSession,
        t: &mut Turn,
        intent: Intent,
        missing: Vec<ParamName>,
        failure: Option<Explanation>,
    ) -> Result<Explanation, TurnError> {
        let kind = intent.kind;
        let names = missing.iter().map(|p| p.key().to_string()).collect::<Vec<_>>().join(", ");
        self.note(session, t, NoteStage::ClarificationAsked, "inner.clarification_asked", &[
            ("missing", &names),
            ("used", &session.replans_used().to_string()),
            ("cap", &session.replan_cap().to_string()),
        ])?;
        session.pending = Some(intent);
        session.asked = missing.clone();
        let question = self.explainer.ask_clarification(kind, &missing)?;
        Ok(match failure {
            Some(f) => join(f, question),
            None => question,
        })
    }

    fn give_up(&self, session: &mut DialogueSession, t: &mut Turn, failure: Option<Explanation>) -> Result<Explanation, TurnError> {
        let cap = session.replan_cap().to_string();
        self.note(session, t, NoteStage::ClarificationAsked, "inner.replan_cap", &[("cap", &cap)])?;
        let notice = self.explainer.notice("speech.replan_cap", &[("cap", &cap)])?;
        Ok(match failure {
            Some(f) => join(f, notice),
            None => notice,
        })
    }

    fn execute_plan(&self, session: &mut DialogueSession, mut t: Turn, mut intent: Intent, prefix: Option<String>) -> Result<TurnOutcome, TurnError> {
        let plan = t.clock.time(Stage::QueryGeneration, || compile(&intent)).map_err(|e| TurnError::Internal(e.to_string()))?;
        let kinds = plan.iter().map(|q| q.kind().to_string()).collect::<Vec<_>>().join(", ");
        self.note(session, &mut t, NoteStage::QueryPlanned, "inner.query_planned", &[("queries", &kinds)])?;
        t.queries = plan.iter().map(|q| q.text().to_string()).collect();
        for q in &plan {
            let store = &self.store;
            let r = t.clock.time(Stage::QueryExecution, || execute(q, store));
            let status = describe(&r.output);
            let complete = r.is_complete();
            self.note(session, &mut t, NoteStage::QueryObserved, "inner.query_observed", &[("kind", &r.kind.to_string()), ("status", &status)])?;
            t.results.push(r);
            if !complete {
                break;
            }
        }

        let failed = t.results.last().filter(|r| !r.is_complete()).cloned();
        let (effect, explanation) = if let Some(bad) = failed {
            let offending = bad.offending();
            for p in &offending {
                intent.params.remove(p);
            }
            let explainer = &self.explainer;
            let failure = t.clock.time(Stage::QueryExplanation, || explainer.explain_failure(&bad))?;
            let effect = session.apply(SessionEvent::ResultsIncomplete);
            let e = match effect {
                Effect::AskClarification => {
                    let mut missing = intent.missing();
                    for p in offending {
                        if !missing.contains(&p) {
                            missing.push(p);
                        }
                    }
                    self.clarify(session, &mut t, intent, missing, Some(failure))?
                }
                Effect::ReplanCapExceeded => self.give_up(session, &mut t, Some(failure))?,
                other => return Err(TurnError::Internal(format!("unexpected effect {other:?} after a query"))),
            };
            (effect, e)
        } else {
            let e = if intent.kind == IntentKind::MealPreparation {
                self.plan_meal(session, &mut t)?
            } else {
                let explainer = &self.explainer;
                let results = &t.results;
                t.clock.time(Stage::QueryExplanation, || explainer.explain_query(results))?
            };
            (session.apply(SessionEvent::ResultsComplete), e)
        };
        self.finish(session, t, effect, with_prefix(prefix, explanation))
    }

    fn plan_meal(&self, session: &mut DialogueSession, t: &mut Turn) -> Result<Explanation, TurnError> {
        let Some(QueryOutput::SafeDishes { user, dishes, examined, excluded_allergens, .. }) =
            t.results.iter().find_map(|r| matches!(r.output, QueryOutput::SafeDishes { .. }).then(|| r.output.clone()))
        else {
            return Err(TurnError::Internal("meal plan without a safe-dish result".into()));
        };
        let candidates: Vec<Dish> = dishes
            .iter()
            .map(|d| {
                let mut dish = Dish::new(d.name.clone(), d.nutrients, allergen_set(&d.allergens).unwrap_or_default());
                dish.id = DishId(d.id);
                dish
            })
            .collect();
        self.note(session, t, NoteStage::SolverPlanned, "inner.solver_planned", &[
            ("k", &self.solver.max_dishes.to_string()),
            ("n", &candidates.len().to_string()),
            ("threshold", &format_threshold(self.solver.threshold_bp)),
        ])?;
        let config = &self.solver;
        let report = t
            .clock
            .time(Stage::Solver, || solve(&candidates, &user.needs, config))
            .map_err(|e| TurnError::Internal(e.to_string()))?;
        self.note(session, t, NoteStage::SolverObserved, "inner.solver_observed", &[
            ("count", &report.solutions.len().to_string()),
            ("explored", &report.explored_nodes.to_string()),
            ("pruned", &report.pruned_nodes.to_string()),
        ])?;
        t.solver = Some(SolverSummary {
            safe_dishes: candidates.len(),
            explored_nodes: report.explored_nodes,
            pruned_nodes: report.pruned_nodes,
            solutions: report.solutions.clone(),
        });
        let explainer = &self.explainer;
        let e = t.clock.time(Stage::SolverExplanation, || {
            if report.solutions.is_empty() {
                explainer.explain_no_meal(&user, candidates.len(), examined, config)
            } else {
                explainer.explain_solution(&user, candidates.len(), examined, &excluded_allergens, &report)
            }
        })?;
        Ok(e)
    }

    fn finish(&self, session: &mut DialogueSession, mut t: Turn, effect: Effect, explanation: Explanation) -> Result<TurnOutcome, TurnError> {
        let speech = &self.backends.speech;
        let reply = t.clock.time(Stage::OuterSpeech, || speech.phrase(&explanation));
        let kind = serde_json::to_value(explanation.kind).expect("kind serializes");
        let state = session.state().to_string();
        self.note(session, &mut t, NoteStage::Conclusion, "inner.conclusion", &[
            ("reply", kind.as_str().unwrap_or_default()),
            ("state", &state),
        ])?;
        Ok(TurnOutcome {
            turn: session.turn_index,
            intent: t.intent,
            reply,
            reply_kind: explanation.kind,
            effect,
            notes: if session.transparency { session.turn_notes().to_vec() } else { vec![] },
            queries: t.queries,
            results: t.results,
            solver: t.solver,
            state: session.state(),
            replans_used: session.replans_used(),
            timings: t.clock.finish(),
        })
    }
}

fn describe(output: &QueryOutput) -> String {
    match output {
        QueryOutput::Dish { dish } => format!("found dish \"{}\"", dish.name),
        QueryOutput::User { user } => format!("found user \"{}\"", user.name),
        QueryOutput::SafeDishes { dishes, examined, .. } => format!("{} of {examined} dishes are safe", dishes.len()),
        QueryOutput::Created { user } => format!("created user \"{}\"", user.name),
        QueryOutput::NotFound { param, value } => format!("nothing matches {param} \"{value}\""),
        QueryOutput::Rejected { reason, .. } => format!("rejected ({reason})"),
    }
}

fn join(first: Explanation, second: Explanation) -> Explanation {
    Explanation {
        kind: second.kind,
        text: format!("{} {}", first.text, second.text),
        structured: serde_json::json!([first.structured, second.structured]),
    }
}

fn with_prefix(prefix: Option<String>, mut e: Explanation) -> Explanation {
    if let Some(p) = prefix {
        e.text = format!("{p} {}", e.text);
    }
    e
}
