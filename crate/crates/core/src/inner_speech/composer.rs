use super::memory::{NoteStage, ShortTermMemory};
use crate::llm::{ChatMessage, RemoteModel};

/// Turns a templated draft into the note actually recorded.
pub trait NoteComposer: Send + Sync {
    fn compose(&self, stage: NoteStage, draft: &str, memory: &ShortTermMemory) -> String;
    fn identity(&self) -> String;
}

/// Records drafts unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct TemplateComposer;

impl NoteComposer for TemplateComposer {
    fn compose(&self, _stage: NoteStage, draft: &str, _memory: &ShortTermMemory) -> String {
        draft.to_string()
    }

    fn identity(&self) -> String {
        "templates".into()
    }
}

pub const INNER_PROMPT: &str = "You are the private reasoning voice of a dietary assistant. Given your recent notes and a draft note for the current step, write the note in one short first-person sentence. Keep all names and numbers from the draft.";

/// Rewrites drafts with a language model; falls back to the draft on any
/// failure or when the reply drops a number.
#[derive(Clone)]
pub struct RemoteComposer {
    model: RemoteModel,
    temperature: f64,
}

impl RemoteComposer {
    pub fn new(model: RemoteModel, temperature: f64) -> Self {
        RemoteComposer { model, temperature }
    }
}

impl NoteComposer for RemoteComposer {
    fn compose(&self, stage: NoteStage, draft: &str, memory: &ShortTermMemory) -> String {
        let prompt = format!("Recent notes:\n{}\nStep: {stage}\nDraft: {draft}", memory.prompt_context());
        match self.model.ask(self.temperature, vec![ChatMessage::system(INNER_PROMPT), ChatMessage::user(prompt)]) {
            Ok(text) if !text.trim().is_empty() && crate::explainer::number_fidelity(draft, &text) => {
                text.trim().replace('\n', " ")
            }
            _ => draft.to_string(),
        }
    }

    fn identity(&self) -> String {
        format!("remote:{}@{}", self.model.model, self.temperature)
    }
}
