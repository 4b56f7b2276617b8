//! Deterministic recognizer: an ordered trigger table plus slot grammars.
//!
//! The trigger that matches earliest in the utterance decides the kind (ties
//! go to table order). With no trigger, a pending clarification supplies the
//! kind so that bare answers ("2000 kcal, 250 carbs...") attach to it.

use std::sync::LazyLock;

use regex::Regex;

use super::{
    normalize, BackendIdentity, DialogueContext, Intent, IntentKind, ParamName, Params,
    RecognizerBackend,
};
use crate::llm::BackendError;

pub const RULE_TABLE_VERSION: &str = "rules-en-1";

fn re(pattern: &str) -> Regex {
    Regex::new(pattern).expect("static rule pattern")
}

struct Trigger {
    kind: IntentKind,
    pattern: Regex,
}

static TRIGGERS: LazyLock<Vec<Trigger>> = LazyLock::new(|| {
    vec![
        Trigger {
            kind: IntentKind::UserInsertion,
            pattern: re(r"\b(add|insert|register|create|enroll|enrol|sign up|save|record)\b[^.?!]*?\b(users?|profiles?|person|patient|member|client)\b|\bnew (user|profile|patient|member)\b"),
        },
        Trigger {
            kind: IntentKind::MealPreparation,
            pattern: re(r"\b(prepare|plan|suggest|recommend|make|compose|cook|put together|organi[sz]e|build|design|propose|find|give|need|want)\b[^.?!]*?\b(meals?|menus?|lunch|dinner|breakfast|supper)\b|\bmeal (plan|for)\b|\bwhat should [a-z']+ eat\b"),
        },
        Trigger {
            kind: IntentKind::DishInfo,
            pattern: re(r"\b(tell me (more )?about|info(rmation)? (on|about|for)|details (on|about|of|for)|nutritional (values?|info(rmation)?|facts|data|content|profile)|nutrients (of|in)|macros (of|for|in)|what('s| is) in|describe|how many calories|is [a-z' -]+ safe for|does [a-z' -]+ contain|dish info)\b"),
        },
    ]
});

static DISH_PHRASES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    let tail = r"(?P<dish>[a-z][a-z' -]*?)(?:\s+(?:for|to)\s+(?:user\s+|the user\s+)?(?P<user>[a-z][a-z'-]*))?\s*(?:please)?\s*[?.!]*$";
    vec![
        re(r"\bis (?:the |a |an )?(?P<dish>[a-z][a-z' -]*?) safe for (?:user\s+)?(?P<user>[a-z][a-z'-]*)\s*[?.!]*$"),
        re(r"\bdoes (?:the |a |an )?(?P<dish>[a-z][a-z' -]*?) contain\b"),
        re(&format!(r"\bhow many calories (?:are |does )?(?:there )?(?:in )?(?:the |a |an |one )?{tail}")),
        re(&format!(r"\b(?:tell me (?:more )?about|info(?:rmation)? (?:on|about|for)|details (?:on|about|of|for)|nutritional (?:values?|info(?:rmation)?|facts|data|content|profile) (?:of|for|on)|nutrients (?:of|in)|macros (?:of|for|in)|what(?:'s| is) in|describe) (?:the |a |an |some )?{tail}")),
    ]
});

/// Words that never name a dish on their own.
const GENERIC_DISH: &[&str] = &["dish", "a dish", "this dish", "that dish", "it", "something", "some dish", "food", "dishes"];

static NAME_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    vec![
        re(r"\b(?:called|named|name is|name's|name:)\s+(?P<n>[a-z][a-z'-]*)"),
        re(r"\badd (?P<n>[a-z][a-z'-]*) as (?:a )?(?:new )?(?:user|profile|patient|member)\b"),
        re(r"\b(?:user|profile|patient|member|person|client)\s+(?:for\s+)?(?P<n>[a-z][a-z'-]*)"),
    ]
});

const NOT_A_NAME: &[&str] = &[
    "a", "an", "the", "with", "who", "that", "for", "called", "named", "profile", "user",
    "and", "is", "to", "please", "me", "my", "new", "needs", "has", "of", "insertion",
];

static MEAL_USER_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    vec![
        re(r"\b(?P<u>[a-z][a-z-]*)'s (?:meals?|lunch|dinner|breakfast|menu|supper)\b"),
        re(r"\bwhat should (?P<u>[a-z][a-z'-]*) eat\b"),
        re(r"\bfor (?:user |the user |patient )?(?P<u>[a-z][a-z'-]*)"),
    ]
});

const NOT_A_USER: &[&str] = &[
    "me", "myself", "us", "him", "her", "them", "a", "an", "the", "my", "our", "lunch", "dinner",
    "breakfast", "supper", "today", "tonight", "tomorrow", "someone", "somebody", "user", "meal",
    "meals", "it", "this", "that", "everyone", "people", "one", "two",
];

static AMOUNT_TOKENS: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\d+(?:\.\d+)?|\b(?:kcal|kilocalories|calories|calorie|cals?|carbohydrates?|carbs?|proteins?|fats?)\b")
});

static ALLERGY_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:allergic to|allergies(?: to)?:?|allergy to|intolerant to|intolerance to)\s+(?P<a>[a-z][a-z ,&'-]*)")
});

const ALLERGY_STOP: &[&str] = &[
    "needs", "need", "wants", "want", "has", "have", "with", "requires", "and needs", "he", "she",
    "they", "who", "please", "but", "target", "targets", "daily",
];

static BARE_NAME: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^(?:(?:it'?s|it is|for|the user is|user|name is|his name is|her name is|their name is)\s+)?(?P<n>[a-z][a-z'-]*)\s*[.!]?$")
});

static BARE_DISH: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^(?:(?:the|it'?s|it is|i mean)\s+)?(?:the\s+)?(?P<d>[a-z][a-z' -]*?)\s*[.!?]?$")
});

/// Replies that decline to answer a clarification question.
static NON_ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^(no idea|i don'?t know|i do not know|not sure|dunno|hmm+|um+|maybe later|later|never mind|nevermind|whatever|nothing|no)\b")
});

#[derive(Debug, Default, Clone, Copy)]
pub struct RuleRecognizer;

impl RuleRecognizer {
    pub fn new() -> Self {
        RuleRecognizer
    }
}

fn nutrient_param(label: &str) -> ParamName {
    if label.starts_with("carb") {
        ParamName::Carbs
    } else if label.starts_with("protein") {
        ParamName::Proteins
    } else if label.starts_with("fat") {
        ParamName::Fats
    } else {
        ParamName::Calories
    }
}

/// Pairs numbers with nutrient labels. Whichever comes first in the
/// utterance (number or label) sets the reading direction.
fn extract_amounts(text: &str, params: &mut Params) {
    let tokens: Vec<&str> = AMOUNT_TOKENS.find_iter(text).map(|m| m.as_str()).collect();
    let is_num = |t: &str| t.as_bytes()[0].is_ascii_digit();
    let Some(first) = tokens.first() else { return };
    let number_first = is_num(first);
    let mut i = 0;
    while i + 1 < tokens.len() {
        let (a, b) = (tokens[i], tokens[i + 1]);
        let pair = match (number_first, is_num(a), is_num(b)) {
            (true, true, false) => Some((a, b)),
            (false, false, true) => Some((b, a)),
            _ => None,
        };
        match pair {
            Some((value, label)) => {
                params.entry(nutrient_param(label)).or_insert_with(|| value.to_string());
                i += 2;
            }
            None => i += 1,
        }
    }
}

fn extract_allergies(text: &str, params: &mut Params) {
    let Some(caps) = ALLERGY_PATTERN.captures(text) else { return };
    let mut raw = caps["a"].to_string();
    for stop in ALLERGY_STOP {
        if let Some(pos) = find_word(&raw, stop) {
            raw.truncate(pos);
        }
    }
    let items: Vec<String> = raw
        .split([',', '&'])
        .flat_map(|s| s.split(" and "))
        .flat_map(|s| s.split(" or "))
        .map(|s| s.trim().trim_start_matches("and ").trim().to_string())
        .filter(|s| !s.is_empty() && s != "and")
        .collect();
    if !items.is_empty() {
        params.insert(ParamName::Allergies, items.join(", "));
    }
}

fn find_word(haystack: &str, word: &str) -> Option<usize> {
    let padded = format!(" {haystack} ");
    padded.find(&format!(" {word} ")).map(|p| p.min(haystack.len()))
}

fn extract_name(text: &str, params: &mut Params) {
    for p in NAME_PATTERNS.iter() {
        for caps in p.captures_iter(text) {
            let n = &caps["n"];
            if !NOT_A_NAME.contains(&n) {
                params.insert(ParamName::Name, n.to_string());
                return;
            }
        }
    }
}

fn extract_meal_user(text: &str, params: &mut Params) {
    for p in MEAL_USER_PATTERNS.iter() {
        for caps in p.captures_iter(text) {
            let u = &caps["u"];
            if !NOT_A_USER.contains(&u) {
                params.insert(ParamName::UserName, u.to_string());
                return;
            }
        }
    }
}

fn clean_dish(raw: &str) -> Option<String> {
    let d = raw
        .trim()
        .trim_end_matches(" please")
        .trim_end_matches(['?', '.', '!', ' '])
        .trim();
    let d = d
        .strip_prefix("the ")
        .or_else(|| d.strip_prefix("a "))
        .or_else(|| d.strip_prefix("an "))
        .unwrap_or(d)
        .trim();
    (!d.is_empty() && !GENERIC_DISH.contains(&d)).then(|| d.to_string())
}

fn extract_dish(text: &str, params: &mut Params) {
    for p in DISH_PHRASES.iter() {
        if let Some(caps) = p.captures(text) {
            if let Some(d) = caps.name("dish").and_then(|m| clean_dish(m.as_str())) {
                params.insert(ParamName::DishName, d);
            }
            if let Some(u) = caps.name("user") {
                if !NOT_A_USER.contains(&u.as_str()) {
                    params.insert(ParamName::UserName, u.as_str().to_string());
                }
            }
            return;
        }
    }
}

fn extract(kind: IntentKind, text: &str, context: &DialogueContext<'_>, answering: bool) -> Params {
    let mut params = Params::new();
    match kind {
        IntentKind::UserInsertion => {
            extract_name(text, &mut params);
            extract_amounts(text, &mut params);
            extract_allergies(text, &mut params);
        }
        IntentKind::DishInfo => extract_dish(text, &mut params),
        IntentKind::MealPreparation => extract_meal_user(text, &mut params),
        IntentKind::OutOfScope => {}
    }
    if answering && !NON_ANSWER.is_match(text) {
        let missing = context.missing();
        if missing.contains(&ParamName::Name) && !params.contains_key(&ParamName::Name) {
            // "sara, 1800 kcal, ..." answers with the name first.
            let head = text.split(',').next().unwrap_or_default().trim();
            if let Some(c) = BARE_NAME.captures(text).or_else(|| BARE_NAME.captures(head)) {
                if !NOT_A_NAME.contains(&&c["n"]) {
                    params.insert(ParamName::Name, c["n"].to_string());
                }
            }
        }
        if missing.contains(&ParamName::UserName) && !params.contains_key(&ParamName::UserName) {
            if let Some(c) = BARE_NAME.captures(text) {
                if !NOT_A_USER.contains(&&c["n"]) {
                    params.insert(ParamName::UserName, c["n"].to_string());
                }
            }
        }
        if missing.contains(&ParamName::DishName) && !params.contains_key(&ParamName::DishName) {
            if let Some(d) = BARE_DISH.captures(text).and_then(|c| clean_dish(&c["d"])) {
                params.insert(ParamName::DishName, d);
            }
        }
    }
    params
}

impl RecognizerBackend for RuleRecognizer {
    fn classify(&self, utterance: &str, context: &DialogueContext<'_>) -> Result<Intent, BackendError> {
        let text = normalize(utterance);
        let hit = TRIGGERS
            .iter()
            .enumerate()
            .filter_map(|(order, t)| t.pattern.find(&text).map(|m| (m.start(), order, t.kind)))
            .min();
        let pending_kind = context.pending.map(|p| p.kind);
        let (kind, note, answering) = match (hit, pending_kind) {
            (Some((at, _, kind)), pending) => {
                (kind, format!("rule:{kind}@{at}"), pending == Some(kind))
            }
            (None, Some(kind)) => (kind, format!("rule:answer-to-{kind}"), true),
            (None, None) => return Ok(Intent::out_of_scope("rule:no-trigger")),
        };
        let params = extract(kind, &text, context, answering);
        Ok(Intent::new(kind, params, note))
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            name: "rules".into(),
            fingerprint: RULE_TABLE_VERSION.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner_speech::ShortTermMemory;

    fn run(u: &str) -> Intent {
        let m = ShortTermMemory::default();
        RuleRecognizer.classify(u, &DialogueContext::new(&m, None)).unwrap()
    }

    #[test]
    fn full_user_insertion() {
        let i = run("add a new user called Marco, 2000 kcal, 250 carbs, 80 proteins, 70 fats, allergic to nuts");
        assert_eq!(i.kind, IntentKind::UserInsertion);
        assert_eq!(i.get(ParamName::Name), Some("marco"));
        assert_eq!(i.get(ParamName::Calories), Some("2000"));
        assert_eq!(i.get(ParamName::Carbs), Some("250"));
        assert_eq!(i.get(ParamName::Proteins), Some("80"));
        assert_eq!(i.get(ParamName::Fats), Some("70"));
        assert_eq!(i.get(ParamName::Allergies), Some("nuts"));
    }

    #[test]
    fn label_first_amounts() {
        let mut p = Params::new();
        extract_amounts("calories 2000 carbs 250 proteins: 80, fats 70", &mut p);
        assert_eq!(p[&ParamName::Calories], "2000");
        assert_eq!(p[&ParamName::Carbs], "250");
        assert_eq!(p[&ParamName::Proteins], "80");
        assert_eq!(p[&ParamName::Fats], "70");
    }

    #[test]
    fn multiple_allergies() {
        let mut p = Params::new();
        extract_allergies("allergic to nuts, gluten and eggs", &mut p);
        assert_eq!(p[&ParamName::Allergies], "nuts, gluten, eggs");
    }

    #[test]
    fn meal_and_dish() {
        let i = run("prepare a meal for Anna");
        assert_eq!((i.kind, i.get(ParamName::UserName)), (IntentKind::MealPreparation, Some("anna")));
        let i = run("Tell me about the pasta al pesto for Luca?");
        assert_eq!(i.kind, IntentKind::DishInfo);
        assert_eq!(i.get(ParamName::DishName), Some("pasta al pesto"));
        assert_eq!(i.get(ParamName::UserName), Some("luca"));
        assert_eq!(run("what's the weather like?").kind, IntentKind::OutOfScope);
    }

    #[test]
    fn earliest_trigger_wins() {
        let i = run("tell me about rice and then prepare a meal for anna");
        assert_eq!(i.kind, IntentKind::DishInfo);
    }

    #[test]
    fn name_can_lead_a_longer_answer() {
        let m = ShortTermMemory::default();
        let pending = Intent::new(IntentKind::UserInsertion, Params::new(), "");
        let ctx = DialogueContext::new(&m, Some(&pending));
        let i = RuleRecognizer.classify("Sara, 1800 kcal, 200 carbs, 90 proteins and 60 fats", &ctx).unwrap();
        assert_eq!(i.params.get(&ParamName::Name).map(String::as_str), Some("sara"));
        assert_eq!(i.params.get(&ParamName::Fats).map(String::as_str), Some("60"));
    }

    #[test]
    fn non_answers_bind_nothing() {
        let m = ShortTermMemory::default();
        let pending = Intent::new(IntentKind::UserInsertion, Params::new(), "");
        let ctx = DialogueContext::new(&m, Some(&pending));
        for u in ["hmm", "no idea", "I don't know"] {
            let i = RuleRecognizer.classify(u, &ctx).unwrap();
            assert_eq!(i.kind, IntentKind::UserInsertion);
            assert!(i.params.is_empty(), "{u}: {:?}", i.params);
        }
    }

    #[test]
    fn fragment_attaches_to_pending() {
        let m = ShortTermMemory::default();
        let pending = Intent::new(
            IntentKind::UserInsertion,
            [(ParamName::Name, "marco".to_string())].into_iter().collect(),
            "",
        );
        let ctx = DialogueContext::new(&m, Some(&pending));
        let i = RuleRecognizer.classify("2000 kcal, 250 carbs, 80 proteins and 70 fats", &ctx).unwrap();
        assert_eq!(i.kind, IntentKind::UserInsertion);
        assert_eq!(i.params.len(), 4);
    }
}
