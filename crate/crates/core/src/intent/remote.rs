//! Language-model recognizer: few-shot prompt, strict JSON reply.

use serde::Deserialize;
use serde_json::Value;

use super::{BackendIdentity, DialogueContext, Intent, IntentKind, ParamName, Params, RecognizerBackend};
use crate::llm::{BackendError, ChatMessage, RemoteModel};

pub const INTENT_PROMPT: &str = include_str!("../../assets/prompts/intent.v1.txt");
pub const INTENT_PROMPT_VERSION: &str = "intent.v1";

#[derive(Clone)]
pub struct RemoteRecognizer {
    model: RemoteModel,
    temperature: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Reply {
    intent: String,
    #[serde(default)]
    params: serde_json::Map<String, Value>,
}

impl RemoteRecognizer {
    pub fn new(model: RemoteModel, temperature: f64) -> Self {
        Self { model, temperature }
    }

    fn messages(&self, utterance: &str, context: &DialogueContext<'_>) -> Vec<ChatMessage> {
        let mut ctx = String::new();
        if let Some(p) = context.pending {
            let bound: Vec<String> = p.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            ctx.push_str(&format!(
                "Pending request: {} with {{{}}}, missing {}\n",
                p.kind,
                bound.join(", "),
                context.missing().iter().map(|m| m.key()).collect::<Vec<_>>().join(", ")
            ));
        }
        let recent = context.memory.prompt_context();
        if !recent.is_empty() {
            ctx.push_str("Recent notes:\n");
            ctx.push_str(&recent);
            ctx.push('\n');
        }
        vec![
            ChatMessage::system(INTENT_PROMPT),
            ChatMessage::user(format!("{ctx}Request: {utterance}")),
        ]
    }
}

/// Parses a reply, tolerating a fenced code block around the object.
pub(crate) fn parse_reply(text: &str) -> Result<Intent, BackendError> {
    let trimmed = text.trim();
    let body = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(trimmed)
        .trim();
    let reply: Reply = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let kind: IntentKind = reply.intent.parse().map_err(BackendError::Malformed)?;
    let mut params = Params::new();
    for (k, v) in reply.params {
        let name: ParamName = k.parse().map_err(BackendError::Malformed)?;
        let value = match v {
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|i| i.as_str().map(str::to_owned).ok_or_else(|| BackendError::Malformed(format!("{k}: non-string item"))))
                .collect::<Result<Vec<_>, _>>()?
                .join(", "),
            Value::Null => continue,
            other => return Err(BackendError::Malformed(format!("{k}: unexpected {other}"))),
        };
        if !value.trim().is_empty() {
            params.insert(name, value);
        }
    }
    Ok(Intent::new(kind, params, "model"))
}

impl RecognizerBackend for RemoteRecognizer {
    fn classify(&self, utterance: &str, context: &DialogueContext<'_>) -> Result<Intent, BackendError> {
        let messages = self.messages(utterance, context);
        let mut last = String::new();
        for attempt in 0..2 {
            let text = self.model.ask(self.temperature, messages.clone())?;
            match parse_reply(&text) {
                Ok(mut intent) => {
                    intent.confidence_note = format!("model:{}:attempt{}", self.model.model, attempt + 1);
                    return Ok(intent);
                }
                Err(e) => last = e.to_string(),
            }
        }
        Ok(Intent::out_of_scope(format!("model: unparseable reply twice ({last})")))
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            name: "remote".into(),
            fingerprint: format!("{}@{};{}", self.model.model, self.temperature, INTENT_PROMPT_VERSION),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner_speech::ShortTermMemory;
    use crate::llm::{ChatRequest, ChatTransport};
    use parking_lot::Mutex;
    use std::sync::Arc;

    struct Scripted {
        replies: Mutex<Vec<Result<String, BackendError>>>,
        seen: Mutex<Vec<ChatRequest>>,
    }

    impl ChatTransport for Scripted {
        fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
            self.seen.lock().push(request.clone());
            self.replies.lock().remove(0)
        }
    }

    fn recognizer(replies: Vec<Result<String, BackendError>>) -> (RemoteRecognizer, Arc<Scripted>) {
        let t = Arc::new(Scripted { replies: Mutex::new(replies), seen: Mutex::new(vec![]) });
        (RemoteRecognizer::new(RemoteModel::new(t.clone(), "m"), 0.0), t)
    }

    #[test]
    fn parses_strict_json() {
        let (r, t) = recognizer(vec![Ok(r#"{"intent":"meal_preparation","params":{"user_name":"anna"}}"#.into())]);
        let m = ShortTermMemory::default();
        let i = r.classify("plan lunch for anna", &DialogueContext::new(&m, None)).unwrap();
        assert_eq!(i.kind, IntentKind::MealPreparation);
        assert_eq!(i.get(ParamName::UserName), Some("anna"));
        assert_eq!(t.seen.lock()[0].temperature, 0.0);
    }

    #[test]
    fn retries_once_then_demotes() {
        let (r, t) = recognizer(vec![Ok("sure!".into()), Ok("{\"intent\":\"cook\"}".into())]);
        let m = ShortTermMemory::default();
        let i = r.classify("x", &DialogueContext::new(&m, None)).unwrap();
        assert_eq!(i.kind, IntentKind::OutOfScope);
        assert_eq!(t.seen.lock().len(), 2);
    }

    #[test]
    fn retry_can_recover() {
        let (r, _) = recognizer(vec![Ok("oops".into()), Ok("```json\n{\"intent\":\"dish_info\",\"params\":{\"dish_name\":\"rice\"}}\n```".into())]);
        let m = ShortTermMemory::default();
        let i = r.classify("tell me about rice", &DialogueContext::new(&m, None)).unwrap();
        assert_eq!(i.get(ParamName::DishName), Some("rice"));
    }

    #[test]
    fn transport_failure_surfaces() {
        let (r, _) = recognizer(vec![Err(BackendError::Unavailable("down".into()))]);
        let m = ShortTermMemory::default();
        assert!(matches!(
            r.classify("x", &DialogueContext::new(&m, None)),
            Err(BackendError::Unavailable(_))
        ));
    }

    #[test]
    fn numeric_values_become_strings() {
        let i = parse_reply(r#"{"intent":"user_insertion","params":{"calories":2000,"allergies":["nuts","eggs"]}}"#).unwrap();
        assert_eq!(i.get(ParamName::Calories), Some("2000"));
        assert_eq!(i.get(ParamName::Allergies), Some("nuts, eggs"));
    }
}
