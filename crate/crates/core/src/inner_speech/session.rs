use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::memory::{InnerSpeechNote, NoteStage, NoteStamp, ShortTermMemory};
use crate::intent::{Intent, IntentKind, ParamName};

pub const DEFAULT_REPLAN_CAP: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingInput,
    AwaitingClarification,
    Executing,
    Closed,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::AwaitingInput => "awaiting_input",
            SessionState::AwaitingClarification => "awaiting_clarification",
            SessionState::Executing => "executing",
            SessionState::Closed => "closed",
        })
    }
}

/// What the engine observed; drives [`transition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionEvent {
    /// An in-scope request that does not continue the pending one.
    NewRequest { complete: bool },
    /// More parameters for the pending request.
    Answer { complete: bool },
    OutOfScope,
    ResultsComplete,
    /// A query came back without the entity the plan needed.
    ResultsIncomplete,
    BackendDown,
    Farewell,
    Close,
}

impl SessionEvent {
    pub const ALL: [SessionEvent; 10] = [
        SessionEvent::NewRequest { complete: true },
        SessionEvent::NewRequest { complete: false },
        SessionEvent::Answer { complete: true },
        SessionEvent::Answer { complete: false },
        SessionEvent::OutOfScope,
        SessionEvent::ResultsComplete,
        SessionEvent::ResultsIncomplete,
        SessionEvent::BackendDown,
        SessionEvent::Farewell,
        SessionEvent::Close,
    ];
}

/// What the engine must do after a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Execute,
    AskClarification,
    Refuse,
    /// The clarification budget is spent; the pending request is dropped.
    ReplanCapExceeded,
    Reply,
    ReportUnavailable,
    Closed,
    /// A turn is already executing; the input is refused.
    Busy,
    /// A stale event with no effect on the dialogue.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Machine {
    pub state: SessionState,
    pub replans_used: u32,
    pub replan_cap: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("no transition from {0} on {1:?}")]
    Undefined(SessionState, SessionEvent),
}

impl Machine {
    pub fn new(replan_cap: u32) -> Self {
        Machine { state: SessionState::AwaitingInput, replans_used: 0, replan_cap }
    }

    fn clarify_or_give_up(self) -> (Machine, Effect) {
        if self.replans_used < self.replan_cap {
            let next = Machine {
                state: SessionState::AwaitingClarification,
                replans_used: self.replans_used + 1,
                ..self
            };
            (next, Effect::AskClarification)
        } else {
            let next = Machine { state: SessionState::AwaitingInput, replans_used: 0, ..self };
            (next, Effect::ReplanCapExceeded)
        }
    }
}

/// The complete dialogue state machine.
pub fn transition(m: Machine, event: SessionEvent) -> Result<(Machine, Effect), TransitionError> {
    use SessionEvent as E;
    use SessionState as S;
    let fresh = Machine { replans_used: 0, ..m };
    let out = match (m.state, event) {
        (S::Closed, _) => (m, Effect::Closed),
        (_, E::Close) | (_, E::Farewell) => (Machine { state: S::Closed, ..fresh }, Effect::Closed),

        (S::Executing, E::ResultsComplete) => (Machine { state: S::AwaitingInput, ..fresh }, Effect::Reply),
        (S::Executing, E::ResultsIncomplete) => m.clarify_or_give_up(),
        (S::Executing, E::BackendDown) => (Machine { state: S::AwaitingInput, ..fresh }, Effect::ReportUnavailable),
        (S::Executing, E::NewRequest { .. } | E::Answer { .. } | E::OutOfScope) => (m, Effect::Busy),

        (S::AwaitingInput | S::AwaitingClarification, E::ResultsComplete | E::ResultsIncomplete) => {
            (m, Effect::Ignored)
        }
        (S::AwaitingInput | S::AwaitingClarification, E::BackendDown) => (m, Effect::ReportUnavailable),
        (S::AwaitingInput | S::AwaitingClarification, E::OutOfScope) => (m, Effect::Refuse),

        (S::AwaitingInput, E::NewRequest { complete } | E::Answer { complete })
        | (S::AwaitingClarification, E::NewRequest { complete }) => {
            if complete {
                (Machine { state: S::Executing, ..fresh }, Effect::Execute)
            } else {
                fresh.clarify_or_give_up()
            }
        }
        (S::AwaitingClarification, E::Answer { complete: true }) => {
            (Machine { state: S::Executing, ..m }, Effect::Execute)
        }
        (S::AwaitingClarification, E::Answer { complete: false }) => m.clarify_or_give_up(),
    };
    debug_assert!(out.0.replans_used <= out.0.replan_cap || out.0.replan_cap == 0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub replan_cap: u32,
    /// Disclose inner-speech notes with each reply.
    pub transparency: bool,
    pub memory_budget: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            replan_cap: DEFAULT_REPLAN_CAP,
            transparency: true,
            memory_budget: super::memory::DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("replan_cap must be at least 1")]
    ZeroReplanCap,
    #[error("memory_budget must be positive")]
    ZeroMemoryBudget,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.replan_cap == 0 {
            return Err(SessionError::ZeroReplanCap);
        }
        if self.memory_budget == 0 {
            return Err(SessionError::ZeroMemoryBudget);
        }
        Ok(())
    }
}

/// One conversation: state machine, pending request and short-term memory.
#[derive(Debug, Clone)]
pub struct DialogueSession {
    pub id: String,
    machine: Machine,
    pub pending: Option<Intent>,
    /// Parameters named in the last clarification question.
    pub asked: Vec<ParamName>,
    pub memory: ShortTermMemory,
    pub transparency: bool,
    pub turn_index: u32,
    seq: u32,
    turn_notes: Vec<InnerSpeechNote>,
}

impl DialogueSession {
    pub fn new(id: impl Into<String>, config: &SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        Ok(DialogueSession {
            id: id.into(),
            machine: Machine::new(config.replan_cap),
            pending: None,
            asked: Vec::new(),
            memory: ShortTermMemory::with_budget(config.memory_budget),
            transparency: config.transparency,
            turn_index: 0,
            seq: 0,
            turn_notes: Vec::new(),
        })
    }

    pub fn state(&self) -> SessionState {
        self.machine.state
    }

    pub fn replans_used(&self) -> u32 {
        self.machine.replans_used
    }

    pub fn replan_cap(&self) -> u32 {
        self.machine.replan_cap
    }

    pub fn machine(&self) -> Machine {
        self.machine
    }

    pub fn apply(&mut self, event: SessionEvent) -> Effect {
        let (next, effect) = transition(self.machine, event).expect("transition table is total");
        self.machine = next;
        if matches!(effect, Effect::ReplanCapExceeded | Effect::Closed | Effect::Reply) {
            self.pending = None;
            self.asked.clear();
        }
        effect
    }

    pub fn begin_turn(&mut self) {
        self.turn_index += 1;
        self.seq = 0;
        self.turn_notes.clear();
    }

    /// Records a note in memory and in the current turn's list.
    pub fn record(&mut self, stage: NoteStage, text: String) -> &InnerSpeechNote {
        let note = InnerSpeechNote {
            stage,
            text,
            stamp: NoteStamp { turn: self.turn_index, seq: self.seq },
        };
        self.seq += 1;
        self.memory.push(note.clone());
        self.turn_notes.push(note);
        self.turn_notes.last().expect("just pushed")
    }

    pub fn turn_notes(&self) -> &[InnerSpeechNote] {
        &self.turn_notes
    }
}

/// Verdict on a recognized intent before anything runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Supervision {
    Proceed,
    Clarify(Vec<ParamName>),
    Reject(String),
}

pub fn supervise(intent: &Intent) -> Supervision {
    if intent.kind == IntentKind::OutOfScope {
        return Supervision::Reject(intent.confidence_note.clone());
    }
    match intent.missing() {
        m if m.is_empty() => Supervision::Proceed,
        m => Supervision::Clarify(m),
    }
}

/// Folds a follow-up into the pending request. A different kind is a topic
/// switch: the new request replaces the old one.
pub fn merge_clarification(pending: Option<&Intent>, new: Intent) -> (Intent, bool) {
    match pending {
        Some(p) if p.kind == new.kind => {
            let mut merged = p.clone();
            merged.params.extend(new.params);
            merged.confidence_note = new.confidence_note;
            (merged, false)
        }
        Some(_) => (new, true),
        None => (new, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::Params;

    #[test]
    fn cap_is_enforced() {
        let mut m = Machine::new(3);
        let mut effects = vec![];
        for e in [
            SessionEvent::NewRequest { complete: false },
            SessionEvent::Answer { complete: false },
            SessionEvent::Answer { complete: false },
            SessionEvent::Answer { complete: false },
        ] {
            let (n, eff) = transition(m, e).unwrap();
            m = n;
            effects.push(eff);
        }
        assert_eq!(
            effects,
            vec![Effect::AskClarification, Effect::AskClarification, Effect::AskClarification, Effect::ReplanCapExceeded]
        );
        assert_eq!(m.state, SessionState::AwaitingInput);
        assert_eq!(m.replans_used, 0);
    }

    #[test]
    fn closed_is_absorbing() {
        let (m, _) = transition(Machine::new(2), SessionEvent::Farewell).unwrap();
        for e in SessionEvent::ALL {
            assert_eq!(transition(m, e).unwrap(), (m, Effect::Closed));
        }
    }

    #[test]
    fn merge_prefers_new_values_and_detects_switch() {
        let p = |pairs: &[(ParamName, &str)]| pairs.iter().map(|(k, v)| (*k, v.to_string())).collect::<Params>();
        let pending = Intent::new(IntentKind::UserInsertion, p(&[(ParamName::Name, "a"), (ParamName::Fats, "1")]), "");
        let (m, switched) = merge_clarification(
            Some(&pending),
            Intent::new(IntentKind::UserInsertion, p(&[(ParamName::Fats, "2"), (ParamName::Carbs, "3")]), "n"),
        );
        assert!(!switched);
        assert_eq!(m.params, p(&[(ParamName::Name, "a"), (ParamName::Fats, "2"), (ParamName::Carbs, "3")]));
        let other = Intent::new(IntentKind::DishInfo, p(&[(ParamName::DishName, "rice")]), "");
        let (m, switched) = merge_clarification(Some(&pending), other.clone());
        assert!(switched);
        assert_eq!(m, other);
    }

    #[test]
    fn zero_cap_is_rejected() {
        let cfg = SessionConfig { replan_cap: 0, ..Default::default() };
        assert_eq!(DialogueSession::new("s", &cfg).unwrap_err(), SessionError::ZeroReplanCap);
    }
}
