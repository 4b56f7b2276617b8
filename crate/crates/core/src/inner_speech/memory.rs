use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Steps of one turn's self-dialogue, in the order they may occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteStage {
    IntentReceived,
    ParamsChecked,
    QueryPlanned,
    QueryObserved,
    SolverPlanned,
    SolverObserved,
    ClarificationAsked,
    Conclusion,
}

impl NoteStage {
    pub const ALL: [NoteStage; 8] = [
        NoteStage::IntentReceived,
        NoteStage::ParamsChecked,
        NoteStage::QueryPlanned,
        NoteStage::QueryObserved,
        NoteStage::SolverPlanned,
        NoteStage::SolverObserved,
        NoteStage::ClarificationAsked,
        NoteStage::Conclusion,
    ];

    pub fn key(self) -> &'static str {
        match self {
            NoteStage::IntentReceived => "intent_received",
            NoteStage::ParamsChecked => "params_checked",
            NoteStage::QueryPlanned => "query_planned",
            NoteStage::QueryObserved => "query_observed",
            NoteStage::SolverPlanned => "solver_planned",
            NoteStage::SolverObserved => "solver_observed",
            NoteStage::ClarificationAsked => "clarification_asked",
            NoteStage::Conclusion => "conclusion",
        }
    }
}

impl fmt::Display for NoteStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Logical timestamp: turn index and position within the turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoteStamp {
    pub turn: u32,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerSpeechNote {
    pub stage: NoteStage,
    pub text: String,
    pub stamp: NoteStamp,
}

impl InnerSpeechNote {
    pub fn render(&self) -> String {
        format!("[{}] {}", self.stage, self.text)
    }
}

pub const DEFAULT_MEMORY_BUDGET: usize = 4096;

/// Chronological note fragments; the oldest are dropped whole once the
/// rendered size exceeds the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortTermMemory {
    fragments: VecDeque<InnerSpeechNote>,
    budget: usize,
    used: usize,
}

impl Default for ShortTermMemory {
    fn default() -> Self {
        Self::with_budget(DEFAULT_MEMORY_BUDGET)
    }
}

impl ShortTermMemory {
    pub fn with_budget(budget: usize) -> Self {
        ShortTermMemory {
            fragments: VecDeque::new(),
            budget,
            used: 0,
        }
    }

    fn cost(note: &InnerSpeechNote) -> usize {
        note.render().chars().count() + 1
    }

    pub fn push(&mut self, note: InnerSpeechNote) {
        self.used += Self::cost(&note);
        self.fragments.push_back(note);
        while self.used > self.budget {
            match self.fragments.pop_front() {
                Some(old) => self.used -= Self::cost(&old),
                None => break,
            }
        }
    }

    pub fn fragments(&self) -> impl Iterator<Item = &InnerSpeechNote> {
        self.fragments.iter()
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// The fragments concatenated for inclusion in a prompt.
    pub fn prompt_context(&self) -> String {
        self.fragments
            .iter()
            .map(|n| n.render() + "\n")
            .collect()
    }

    pub fn clear(&mut self) {
        self.fragments.clear();
        self.used = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(seq: u32, text: &str) -> InnerSpeechNote {
        InnerSpeechNote {
            stage: NoteStage::IntentReceived,
            text: text.into(),
            stamp: NoteStamp { turn: 0, seq },
        }
    }

    #[test]
    fn truncation_drops_oldest_whole_fragments() {
        let mut m = ShortTermMemory::with_budget(80);
        for i in 0..10 {
            m.push(note(i, &format!("fragment number {i}")));
        }
        let ctx = m.prompt_context();
        assert!(ctx.chars().count() <= 80);
        let seqs: Vec<u32> = m.fragments().map(|n| n.stamp.seq).collect();
        assert_eq!(seqs, vec![8, 9]);
        for line in ctx.lines() {
            assert!(line.starts_with("[intent_received] fragment number "));
        }
    }

    #[test]
    fn oversized_fragment_is_not_split() {
        let mut m = ShortTermMemory::with_budget(10);
        m.push(note(0, "this is far longer than ten characters"));
        assert!(m.is_empty());
        assert_eq!(m.prompt_context(), "");
    }

    proptest::proptest! {
        #[test]
        fn memory_within_budget_and_ordered(
            texts in proptest::collection::vec("[a-z ]{1,40}", 1..40),
            budget in 20usize..400,
        ) {
            let mut m = ShortTermMemory::with_budget(budget);
            for (i, t) in texts.iter().enumerate() {
                m.push(note(i as u32, t));
            }
            proptest::prop_assert!(m.prompt_context().chars().count() <= budget);
            let seqs: Vec<u32> = m.fragments().map(|n| n.stamp.seq).collect();
            proptest::prop_assert!(seqs.windows(2).all(|w| w[0] + 1 == w[1]));
            if let Some(&last) = seqs.last() {
                proptest::prop_assert_eq!(last as usize, texts.len() - 1);
            }
        }
    }
}
