//! User-facing wording: query results, meal rankings, clarification
//! questions and refusals. Drafts come from templates; an optional remote
//! backend may rephrase them as long as every number survives.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::domain::Nutrients;
use crate::intent::{IntentKind, ParamName};
use crate::llm::{ChatMessage, RemoteModel};
use crate::query::{display_name, DishView, QueryOutput, QueryResult, UserView};
use crate::solver::{SolverConfig, SolverReport};
use crate::templates::{TemplateError, Templates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationKind {
    Dish,
    UserCreated,
    Meal,
    NoMeal,
    NotFound,
    Rejected,
    Clarification,
    Refusal,
    Notice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub kind: ExplanationKind,
    pub text: String,
    pub structured: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("solver report has no solutions to explain")]
    EmptyReport,
    #[error("internal template error: {0}")]
    Internal(#[from] TemplateError),
    #[error("nothing to explain")]
    NoResults,
}

/// "+10.0%", "0.0%", "-3.5%".
pub fn format_percent(tenths: i64) -> String {
    let sign = match tenths.signum() {
        1 => "+",
        -1 => "-",
        _ => "",
    };
    let a = tenths.unsigned_abs();
    format!("{sign}{}.{}%", a / 10, a % 10)
}

/// Threshold in basis points as a plain percentage: 1000 -> "10", 1050 -> "10.5".
pub fn format_threshold(bp: u32) -> String {
    let s = format!("{}.{:02}", bp / 100, bp % 100);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn nutrient_values(n: &Nutrients) -> [String; 4] {
    [
        n.calories.to_string(),
        n.carbs.to_string(),
        n.proteins.to_string(),
        n.fats.to_string(),
    ]
}

#[derive(Debug, Clone, Default)]
pub struct Explainer {
    templates: Templates,
}

impl Explainer {
    pub fn new(templates: Templates) -> Self {
        Explainer { templates }
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    fn list_or_none(&self, items: &[String]) -> Result<String, TemplateError> {
        if items.is_empty() {
            Ok(self.templates.raw("explain.none")?.to_string())
        } else {
            Ok(self.templates.join_list(items))
        }
    }

    pub fn param_label(&self, p: ParamName) -> Result<String, ExplainError> {
        Ok(self.templates.raw(&format!("param.{}", p.key()))?.to_string())
    }

    pub fn explain_dish(&self, dish: &DishView, user: Option<&UserView>) -> Result<Explanation, ExplainError> {
        let [cal, carbs, prot, fats] = nutrient_values(&dish.nutrients);
        let mut text = self.templates.render(
            "explain.dish",
            &[
                ("name", &dish.name),
                ("calories", &cal),
                ("carbs", &carbs),
                ("proteins", &prot),
                ("fats", &fats),
                ("allergens", &self.list_or_none(&dish.allergens)?),
            ],
        )?;
        let mut safe = Value::Null;
        if let Some(u) = user {
            let clash: Vec<String> = dish
                .allergens
                .iter()
                .filter(|a| u.allergies.contains(a))
                .cloned()
                .collect();
            text.push(' ');
            text.push_str(&if clash.is_empty() {
                self.templates.render("explain.dish_safe", &[("user", &u.name)])?
            } else {
                self.templates.render(
                    "explain.dish_unsafe",
                    &[("user", &u.name), ("allergens", &self.templates.join_list(&clash))],
                )?
            });
            safe = json!({ "user": u.name, "safe": clash.is_empty(), "conflicts": clash });
        }
        Ok(Explanation {
            kind: ExplanationKind::Dish,
            text,
            structured: json!({ "dish": dish, "safety": safe }),
        })
    }

    pub fn explain_created(&self, user: &UserView) -> Result<Explanation, ExplainError> {
        let [cal, carbs, prot, fats] = nutrient_values(&user.needs);
        let text = self.templates.render(
            "explain.user_created",
            &[
                ("name", &user.name),
                ("calories", &cal),
                ("carbs", &carbs),
                ("proteins", &prot),
                ("fats", &fats),
                ("allergies", &self.list_or_none(&user.allergies)?),
            ],
        )?;
        Ok(Explanation { kind: ExplanationKind::UserCreated, text, structured: json!({ "user": user }) })
    }

    /// Explains an incomplete result (unknown entity or refused write).
    pub fn explain_failure(&self, result: &QueryResult) -> Result<Explanation, ExplainError> {
        let (kind, text) = match &result.output {
            QueryOutput::NotFound { param, value } => {
                let (key, value) = if *param == ParamName::DishName {
                    ("speech.not_found_dish", value.clone())
                } else {
                    ("speech.not_found_user", display_name(value))
                };
                (ExplanationKind::NotFound, self.templates.render(key, &[("value", &value)])?)
            }
            QueryOutput::Rejected { reason, .. } if reason == "duplicate_user" => {
                let name = display_name(result.bindings.get(&ParamName::Name).map(String::as_str).unwrap_or_default());
                (ExplanationKind::Rejected, self.templates.render("speech.duplicate_user", &[("value", &name)])?)
            }
            QueryOutput::Rejected { offending, .. } => {
                let labels = offending.iter().map(|p| self.param_label(*p)).collect::<Result<Vec<_>, _>>()?;
                (
                    ExplanationKind::Rejected,
                    self.templates.render("speech.invalid_values", &[("params", &self.templates.join_list(&labels))])?,
                )
            }
            _ => return Err(ExplainError::NoResults),
        };
        Ok(Explanation { kind, text, structured: json!({ "result": result.output }) })
    }

    /// Explains the results of a dish-info or user-insertion plan.
    pub fn explain_query(&self, results: &[QueryResult]) -> Result<Explanation, ExplainError> {
        if let Some(bad) = results.iter().find(|r| !r.is_complete()) {
            return self.explain_failure(bad);
        }
        let user = results.iter().find_map(|r| match &r.output {
            QueryOutput::User { user } => Some(user),
            _ => None,
        });
        for r in results {
            match &r.output {
                QueryOutput::Dish { dish } => return self.explain_dish(dish, user),
                QueryOutput::Created { user } => return self.explain_created(user),
                _ => {}
            }
        }
        Err(ExplainError::NoResults)
    }

    /// Ranked meal blocks with signed per-nutrient deviations.
    pub fn explain_solution(
        &self,
        user: &UserView,
        safe: usize,
        examined: usize,
        excluded_allergens: &[String],
        report: &SolverReport,
    ) -> Result<Explanation, ExplainError> {
        if report.solutions.is_empty() {
            return Err(ExplainError::EmptyReport);
        }
        let [cal, carbs, prot, fats] = nutrient_values(&user.needs);
        let excluded = if excluded_allergens.is_empty() {
            String::new()
        } else {
            self.templates.render(
                "explain.meal_excluded",
                &[("allergens", &self.templates.join_list(excluded_allergens))],
            )?
        };
        let mut lines = vec![self.templates.render(
            "explain.meal_header",
            &[
                ("user", &user.name),
                ("calories", &cal),
                ("carbs", &carbs),
                ("proteins", &prot),
                ("fats", &fats),
                ("safe", &safe.to_string()),
                ("examined", &examined.to_string()),
                ("excluded", &excluded),
            ],
        )?];
        let mut ranks = Vec::new();
        for (i, s) in report.solutions.iter().enumerate() {
            let [c, cb, p, f] = nutrient_values(&s.totals);
            let d = s.deviations.map(|d| format_percent(d.signed_percent_tenths()));
            lines.push(self.templates.render(
                "explain.meal_rank",
                &[
                    ("rank", &(i + 1).to_string()),
                    ("dishes", &self.templates.join_list(&s.dish_names)),
                    ("calories", &c),
                    ("carbs", &cb),
                    ("proteins", &p),
                    ("fats", &f),
                    ("d_calories", &d[0]),
                    ("d_carbs", &d[1]),
                    ("d_proteins", &d[2]),
                    ("d_fats", &d[3]),
                ],
            )?);
            ranks.push(json!({ "rank": i + 1, "dishes": s.dish_names, "totals": s.totals, "deviations_percent": d, "score": s.score.as_f64() }));
        }
        Ok(Explanation {
            kind: ExplanationKind::Meal,
            text: lines.join("\n"),
            structured: json!({ "user": user.name, "safe": safe, "examined": examined, "ranks": ranks }),
        })
    }

    pub fn explain_no_meal(
        &self,
        user: &UserView,
        safe: usize,
        examined: usize,
        config: &SolverConfig,
    ) -> Result<Explanation, ExplainError> {
        let text = if safe == 0 {
            self.templates.render(
                "speech.no_safe_dishes",
                &[("examined", &examined.to_string()), ("user", &user.name)],
            )?
        } else {
            self.templates.render(
                "speech.no_solution",
                &[
                    ("k", &config.max_dishes.to_string()),
                    ("threshold", &format_threshold(config.threshold_bp)),
                    ("user", &user.name),
                    ("safe", &safe.to_string()),
                ],
            )?
        };
        Ok(Explanation {
            kind: ExplanationKind::NoMeal,
            text,
            structured: json!({ "user": user.name, "safe": safe, "examined": examined }),
        })
    }

    /// One question naming every missing parameter.
    pub fn ask_clarification(&self, kind: IntentKind, missing: &[ParamName]) -> Result<Explanation, ExplainError> {
        let labels = missing.iter().map(|p| self.param_label(*p)).collect::<Result<Vec<_>, _>>()?;
        let action = self.templates.raw(&format!("action.{}", kind.key()))?;
        let text = self.templates.render(
            "speech.clarify",
            &[("action", action), ("missing", &self.templates.join_list(&labels))],
        )?;
        Ok(Explanation {
            kind: ExplanationKind::Clarification,
            text,
            structured: json!({ "intent": kind, "missing": missing }),
        })
    }

    pub fn refuse_out_of_scope(&self) -> Result<Explanation, ExplainError> {
        Ok(Explanation {
            kind: ExplanationKind::Refusal,
            text: self.templates.raw("speech.out_of_scope")?.to_string(),
            structured: json!({ "supported": [IntentKind::UserInsertion, IntentKind::DishInfo, IntentKind::MealPreparation] }),
        })
    }

    pub fn notice(&self, key: &str, values: &[(&str, &str)]) -> Result<Explanation, ExplainError> {
        Ok(Explanation {
            kind: ExplanationKind::Notice,
            text: self.templates.render(key, values)?,
            structured: json!({ "notice": key }),
        })
    }
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").expect("pattern"));

/// The numbers of a text, in order of appearance.
pub fn numbers_in(text: &str) -> Vec<String> {
    NUMBER.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

/// True when `candidate` carries exactly the same numbers as `draft`
/// (as a multiset).
pub fn number_fidelity(draft: &str, candidate: &str) -> bool {
    let mut a = numbers_in(draft);
    let mut b = numbers_in(candidate);
    a.sort();
    b.sort();
    a == b
}

/// Final wording of an explanation for the user.
pub trait SpeechBackend: Send + Sync {
    fn phrase(&self, draft: &Explanation) -> String;
    fn identity(&self) -> String;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct TemplateSpeech;

impl SpeechBackend for TemplateSpeech {
    fn phrase(&self, draft: &Explanation) -> String {
        draft.text.clone()
    }

    fn identity(&self) -> String {
        "templates".into()
    }
}

pub const SPEECH_PROMPT: &str = "Rewrite the assistant message below so it sounds natural and friendly. Keep every number exactly as written, add no new numbers, and keep the same facts. Reply with the rewritten message only.";

#[derive(Clone)]
pub struct RemoteSpeech {
    model: RemoteModel,
    temperature: f64,
}

impl RemoteSpeech {
    pub fn new(model: RemoteModel, temperature: f64) -> Self {
        RemoteSpeech { model, temperature }
    }
}

impl SpeechBackend for RemoteSpeech {
    fn phrase(&self, draft: &Explanation) -> String {
        let reply = self.model.ask(
            self.temperature,
            vec![ChatMessage::system(SPEECH_PROMPT), ChatMessage::user(draft.text.clone())],
        );
        match reply {
            Ok(text) if !text.trim().is_empty() && number_fidelity(&draft.text, &text) => text.trim().to_string(),
            _ => draft.text.clone(),
        }
    }

    fn identity(&self) -> String {
        format!("remote:{}@{}", self.model.model, self.temperature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{BackendError, ChatRequest, ChatTransport};
    use std::sync::Arc;

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(100), "+10.0%");
        assert_eq!(format_percent(0), "0.0%");
        assert_eq!(format_percent(-35), "-3.5%");
        assert_eq!(format_percent(-4), "-0.4%");
        assert_eq!(format_threshold(1000), "10");
        assert_eq!(format_threshold(1050), "10.5");
        assert_eq!(format_threshold(125), "1.25");
    }

    #[test]
    fn clarification_names_all_missing() {
        let e = Explainer::default();
        let q = e
            .ask_clarification(IntentKind::UserInsertion, &[ParamName::Carbs, ParamName::Fats])
            .unwrap();
        assert_eq!(q.text, "To add the user, I still need carbohydrates (g) and fats (g). Could you tell me?");
        assert_eq!(q.text.matches('?').count(), 1);
    }

    #[test]
    fn missing_label_is_internal_error() {
        let broken = crate::templates::ENGLISH.replace("fats = \"fats (g)\"\n", "");
        let e = Explainer::new(Templates::from_toml(&broken).unwrap());
        assert!(matches!(
            e.ask_clarification(IntentKind::UserInsertion, &[ParamName::Fats]),
            Err(ExplainError::Internal(TemplateError::MissingKey(_)))
        ));
    }

    #[test]
    fn refusal_names_the_three_operations() {
        let t = Explainer::default().refuse_out_of_scope().unwrap().text;
        for op in ["adding a user", "describing a dish", "preparing a meal"] {
            assert!(t.contains(op));
        }
    }

    #[test]
    fn empty_report_is_an_error() {
        let report = SolverReport {
            outcome: crate::solver::SolveOutcome::NoFeasibleSolution,
            solutions: vec![],
            explored_nodes: 0,
            pruned_nodes: 0,
            elapsed: Default::default(),
        };
        let user = UserView { id: 1, name: "anna".into(), needs: Nutrients::new(1.0, 1.0, 1.0, 1.0).unwrap(), allergies: vec![] };
        assert_eq!(Explainer::default().explain_solution(&user, 0, 0, &[], &report), Err(ExplainError::EmptyReport));
    }

    struct Canned(String);
    impl ChatTransport for Canned {
        fn complete(&self, r: &ChatRequest) -> Result<String, BackendError> {
            assert_eq!(r.temperature, 0.25);
            Ok(self.0.clone())
        }
    }

    fn draft(text: &str) -> Explanation {
        Explanation { kind: ExplanationKind::Notice, text: text.into(), structured: Value::Null }
    }

    #[test]
    fn remote_rephrasing_must_keep_numbers() {
        let d = draft("Rice: 200.0 kcal, 44.0 g carbohydrates (+10.0%).");
        let faithful = RemoteSpeech::new(RemoteModel::new(Arc::new(Canned("Steamed rice has 200.0 kcal and 44.0 g of carbs, +10.0% over.".into())), "m"), 0.25);
        assert!(faithful.phrase(&d).starts_with("Steamed rice"));
        let sloppy = RemoteSpeech::new(RemoteModel::new(Arc::new(Canned("Rice has about 200 kcal.".into())), "m"), 0.25);
        assert_eq!(sloppy.phrase(&d), d.text);
    }

    #[test]
    fn rendered_numbers_reparse_exactly() {
        let e = Explainer::default();
        let dish = DishView {
            id: 1,
            name: "Soup".into(),
            nutrients: Nutrients::new(310.0, 45.5, 18.0, 6.25).unwrap(),
            allergens: vec!["celery".into()],
        };
        let text = e.explain_dish(&dish, None).unwrap().text;
        let nums: Vec<f64> = numbers_in(&text).iter().map(|n| n.parse().unwrap()).collect();
        let expect: Vec<f64> = dish.nutrients.to_tenths().iter().map(|t| *t as f64 / 10.0).collect();
        assert_eq!(nums, expect);
    }
}
