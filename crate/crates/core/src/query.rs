//! Query plans compiled from complete intents, executed against the store.
//!
//! A plan is a short list of [`QueryIR`] values. Each renders to a graph
//! query text for transcripts; execution goes straight to the in-process
//! store.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    allergen_set, canonical_name, Allergen, Dish, NutrientKind, Nutrients, UserId, UserProfile,
    Violation,
};
use crate::intent::{parse_amount, split_list, Intent, IntentKind, ParamName, Params};
use crate::store::{SharedStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    FetchDish,
    FetchUserNeeds,
    FilterSafeDishes,
    CreateUser,
}

impl QueryKind {
    fn required(self) -> &'static [ParamName] {
        match self {
            QueryKind::FetchDish => &[ParamName::DishName],
            QueryKind::FetchUserNeeds | QueryKind::FilterSafeDishes => &[ParamName::UserName],
            QueryKind::CreateUser => &[
                ParamName::Name,
                ParamName::Calories,
                ParamName::Carbs,
                ParamName::Proteins,
                ParamName::Fats,
            ],
        }
    }

    fn optional(self) -> &'static [ParamName] {
        match self {
            QueryKind::CreateUser => &[ParamName::Allergies],
            _ => &[],
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::FetchDish => "fetch_dish",
            QueryKind::FetchUserNeeds => "fetch_user_needs",
            QueryKind::FilterSafeDishes => "filter_safe_dishes",
            QueryKind::CreateUser => "create_user",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("intent '{0}' has no query plan")]
    UnsupportedIntent(IntentKind),
    #[error("intent is missing {0:?}")]
    IncompleteIntent(Vec<ParamName>),
    #[error("binding {param} = {value:?} is not usable")]
    InvalidBinding { param: ParamName, value: String },
}

/// One query with validated bindings. Values are stored verbatim (already
/// normalized by the recognizer).
#[derive(Debug, Clone)]
pub struct QueryIR {
    kind: QueryKind,
    bindings: Params,
    rendered: OnceLock<String>,
}

impl PartialEq for QueryIR {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.bindings == other.bindings
    }
}

impl Eq for QueryIR {}

impl QueryIR {
    pub fn new(kind: QueryKind, params: &Params) -> Result<Self, QueryError> {
        let missing: Vec<ParamName> = kind
            .required()
            .iter()
            .filter(|p| !params.contains_key(p))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(QueryError::IncompleteIntent(missing));
        }
        let mut bindings = Params::new();
        for p in kind.required().iter().chain(kind.optional()) {
            let Some(value) = params.get(p) else { continue };
            let usable = if p.is_numeric() {
                parse_amount(value).is_some()
            } else if *p == ParamName::Allergies {
                allergen_set(split_list(value)).is_ok()
            } else {
                !canonical_name(value).is_empty()
            };
            if !usable {
                return Err(QueryError::InvalidBinding { param: *p, value: value.clone() });
            }
            bindings.insert(*p, value.clone());
        }
        Ok(QueryIR { kind, bindings, rendered: OnceLock::new() })
    }

    pub fn kind(&self) -> QueryKind {
        self.kind
    }

    pub fn bindings(&self) -> &Params {
        &self.bindings
    }

    fn binding(&self, p: ParamName) -> &str {
        self.bindings.get(&p).map(String::as_str).unwrap_or_default()
    }

    /// Graph query text, rendered once.
    pub fn text(&self) -> &str {
        self.rendered.get_or_init(|| render_query_text(self))
    }
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

pub fn render_query_text(q: &QueryIR) -> String {
    match q.kind {
        QueryKind::FetchDish => format!(
            "MATCH (d:Dish {{name: {}}}) OPTIONAL MATCH (d)-[:has_allergen]->(a:Allergen) RETURN d, collect(a.name) AS allergens",
            quoted(q.binding(ParamName::DishName))
        ),
        QueryKind::FetchUserNeeds => format!(
            "MATCH (u:User {{name: {}}})-[:has_nutritional_needs]->(n:Needs) OPTIONAL MATCH (u)-[:is_allergic_to]->(a:Allergen) RETURN u, n, collect(a.name) AS allergies",
            quoted(q.binding(ParamName::UserName))
        ),
        QueryKind::FilterSafeDishes => format!(
            "MATCH (u:User {{name: {}}}) MATCH (d:Dish) WHERE NOT EXISTS {{ (d)-[:has_allergen]->(:Allergen)<-[:is_allergic_to]-(u) }} RETURN d ORDER BY d.name",
            quoted(q.binding(ParamName::UserName))
        ),
        QueryKind::CreateUser => {
            let allergies: Vec<String> = q
                .bindings
                .get(&ParamName::Allergies)
                .map(|a| split_list(a).iter().map(|s| quoted(s)).collect())
                .unwrap_or_default();
            format!(
                "CREATE (u:User {{name: {}}})-[:has_nutritional_needs]->(:Needs {{calories: {}, carbs: {}, proteins: {}, fats: {}}}) WITH u UNWIND [{}] AS name MERGE (a:Allergen {{name: name}}) CREATE (u)-[:is_allergic_to]->(a)",
                quoted(q.binding(ParamName::Name)),
                q.binding(ParamName::Calories),
                q.binding(ParamName::Carbs),
                q.binding(ParamName::Proteins),
                q.binding(ParamName::Fats),
                allergies.join(", ")
            )
        }
    }
}

/// Builds the query plan for a complete intent.
pub fn compile(intent: &Intent) -> Result<Vec<QueryIR>, QueryError> {
    let missing = intent.missing();
    if !missing.is_empty() {
        return Err(QueryError::IncompleteIntent(missing));
    }
    let p = &intent.params;
    match intent.kind {
        IntentKind::DishInfo => {
            let mut plan = vec![QueryIR::new(QueryKind::FetchDish, p)?];
            if p.contains_key(&ParamName::UserName) {
                plan.push(QueryIR::new(QueryKind::FetchUserNeeds, p)?);
            }
            Ok(plan)
        }
        IntentKind::UserInsertion => Ok(vec![QueryIR::new(QueryKind::CreateUser, p)?]),
        IntentKind::MealPreparation => Ok(vec![
            QueryIR::new(QueryKind::FetchUserNeeds, p)?,
            QueryIR::new(QueryKind::FilterSafeDishes, p)?,
        ]),
        IntentKind::OutOfScope => Err(QueryError::UnsupportedIntent(IntentKind::OutOfScope)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryOutput {
    Dish { dish: DishView },
    User { user: UserView },
    SafeDishes {
        user: UserView,
        dishes: Vec<DishView>,
        examined: usize,
        excluded: usize,
        excluded_allergens: Vec<String>,
    },
    Created { user: UserView },
    /// The named entity does not exist; `param` is the binding to re-ask.
    NotFound { param: ParamName, value: String },
    /// The store refused a write; `offending` lists the bindings to re-ask.
    Rejected { reason: String, offending: Vec<ParamName> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DishView {
    pub id: u32,
    pub name: String,
    pub nutrients: Nutrients,
    pub allergens: Vec<String>,
}

impl DishView {
    pub fn of(d: &Dish) -> Self {
        DishView {
            id: d.id.0,
            name: d.name.clone(),
            nutrients: d.nutrients,
            allergens: d.allergens.iter().map(|a| a.as_str().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserView {
    pub id: u32,
    pub name: String,
    pub needs: Nutrients,
    pub allergies: Vec<String>,
}

impl UserView {
    pub fn of(u: &UserProfile) -> Self {
        UserView {
            id: u.id.0,
            name: u.name.clone(),
            needs: u.needs,
            allergies: u.allergies.iter().map(|a| a.as_str().to_string()).collect(),
        }
    }

    pub fn allergy_set(&self) -> BTreeSet<Allergen> {
        allergen_set(&self.allergies).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub query: String,
    pub bindings: Params,
    pub output: QueryOutput,
}

impl QueryResult {
    /// False when the result lacks the entity the plan needs.
    pub fn is_complete(&self) -> bool {
        !matches!(self.output, QueryOutput::NotFound { .. } | QueryOutput::Rejected { .. })
    }

    /// Bindings that should be asked again when the result is incomplete.
    pub fn offending(&self) -> Vec<ParamName> {
        match &self.output {
            QueryOutput::NotFound { param, .. } => vec![*param],
            QueryOutput::Rejected { offending, .. } => offending.clone(),
            _ => vec![],
        }
    }
}

fn violation_param(v: &Violation) -> ParamName {
    let of_kind = |k: &NutrientKind| match k {
        NutrientKind::Calories => ParamName::Calories,
        NutrientKind::Carbs => ParamName::Carbs,
        NutrientKind::Proteins => ParamName::Proteins,
        NutrientKind::Fats => ParamName::Fats,
    };
    match v {
        Violation::EmptyName => ParamName::Name,
        Violation::NonPositiveTarget(k) | Violation::NegativeNutrient(k) => of_kind(k),
    }
}

fn amount(q: &QueryIR, p: ParamName) -> f64 {
    parse_amount(q.binding(p)).expect("validated binding")
}

pub fn execute(q: &QueryIR, store: &SharedStore) -> QueryResult {
    let output = match q.kind {
        QueryKind::FetchDish => {
            let name = q.binding(ParamName::DishName);
            match store.read().get_dish(name) {
                Ok(d) => QueryOutput::Dish { dish: DishView::of(d) },
                Err(_) => QueryOutput::NotFound { param: ParamName::DishName, value: name.to_string() },
            }
        }
        QueryKind::FetchUserNeeds => {
            let name = q.binding(ParamName::UserName);
            match store.read().get_user(name) {
                Ok(u) => QueryOutput::User { user: UserView::of(u) },
                Err(_) => QueryOutput::NotFound { param: ParamName::UserName, value: name.to_string() },
            }
        }
        QueryKind::FilterSafeDishes => {
            let name = q.binding(ParamName::UserName);
            let guard = store.read();
            match guard.get_user(name) {
                Ok(u) => {
                    let safe = guard.dishes_safe_for(u);
                    let examined = guard.dish_count();
                    let mut hit = BTreeSet::new();
                    for d in guard.dishes() {
                        hit.extend(d.allergens.intersection(&u.allergies).map(|a| a.as_str().to_string()));
                    }
                    QueryOutput::SafeDishes {
                        user: UserView::of(u),
                        excluded: examined - safe.len(),
                        dishes: safe.iter().map(DishView::of).collect(),
                        examined,
                        excluded_allergens: hit.into_iter().collect(),
                    }
                }
                Err(_) => QueryOutput::NotFound { param: ParamName::UserName, value: name.to_string() },
            }
        }
        QueryKind::CreateUser => create_user(q, store),
    };
    QueryResult { kind: q.kind, query: q.text().to_string(), bindings: q.bindings.clone(), output }
}

fn create_user(q: &QueryIR, store: &SharedStore) -> QueryOutput {
    let needs = Nutrients::new(
        amount(q, ParamName::Calories),
        amount(q, ParamName::Carbs),
        amount(q, ParamName::Proteins),
        amount(q, ParamName::Fats),
    )
    .expect("finite amounts");
    let allergies = q
        .bindings
        .get(&ParamName::Allergies)
        .map(|a| allergen_set(split_list(a)).expect("validated binding"))
        .unwrap_or_default();
    let profile = UserProfile::new(display_name(q.binding(ParamName::Name)), needs, allergies);
    let mut guard = store.write();
    match guard.insert_user(profile) {
        Ok(id) => {
            let created = guard.get_user(q.binding(ParamName::Name)).expect("just inserted");
            debug_assert_eq!(created.id, id);
            QueryOutput::Created { user: UserView::of(created) }
        }
        Err(StoreError::InvalidProfile(violations)) => {
            let mut offending: Vec<ParamName> = violations.iter().map(violation_param).collect();
            offending.dedup();
            QueryOutput::Rejected {
                reason: "invalid_profile".into(),
                offending,
            }
        }
        Err(StoreError::DuplicateUser(_)) => QueryOutput::Rejected {
            reason: "duplicate_user".into(),
            offending: vec![ParamName::Name],
        },
        Err(e) => QueryOutput::Rejected { reason: e.to_string(), offending: vec![] },
    }
}

/// "maria rosa" -> "Maria Rosa". Recognizers hand over lowercase names.
pub fn display_name(name: &str) -> String {
    canonical_name(name)
        .split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        })
        .collect::<Vec<String>>()
        .join(" ")
}

/// Id of the user created by a result, if any.
pub fn created_user(result: &QueryResult) -> Option<UserId> {
    match &result.output {
        QueryOutput::Created { user } => Some(UserId(user.id)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::demo_store;

    fn intent(kind: IntentKind, pairs: &[(ParamName, &str)]) -> Intent {
        Intent::new(kind, pairs.iter().map(|(k, v)| (*k, v.to_string())).collect(), "")
    }

    #[test]
    fn plans_per_kind() {
        let kinds = |i: &Intent| compile(i).unwrap().iter().map(QueryIR::kind).collect::<Vec<_>>();
        assert_eq!(
            kinds(&intent(IntentKind::MealPreparation, &[(ParamName::UserName, "anna")])),
            vec![QueryKind::FetchUserNeeds, QueryKind::FilterSafeDishes]
        );
        assert_eq!(
            kinds(&intent(IntentKind::DishInfo, &[(ParamName::DishName, "omelette"), (ParamName::UserName, "anna")])),
            vec![QueryKind::FetchDish, QueryKind::FetchUserNeeds]
        );
        assert_eq!(
            compile(&Intent::out_of_scope("")),
            Err(QueryError::UnsupportedIntent(IntentKind::OutOfScope))
        );
        assert!(matches!(
            compile(&intent(IntentKind::DishInfo, &[])),
            Err(QueryError::IncompleteIntent(_))
        ));
    }

    #[test]
    fn rendered_text_contains_bindings_verbatim() {
        let i = intent(IntentKind::DishInfo, &[(ParamName::DishName, "pasta al pesto")]);
        let q = &compile(&i).unwrap()[0];
        assert!(q.text().contains("\"pasta al pesto\""));
        assert!(q.text().contains("has_allergen"));
        let c = QueryIR::new(
            QueryKind::CreateUser,
            &intent(IntentKind::UserInsertion, &[
                (ParamName::Name, "marco"),
                (ParamName::Calories, "2000"),
                (ParamName::Carbs, "250.5"),
                (ParamName::Proteins, "80"),
                (ParamName::Fats, "70"),
                (ParamName::Allergies, "nuts, eggs"),
            ])
            .params,
        )
        .unwrap();
        for needle in ["\"marco\"", "2000", "250.5", "has_nutritional_needs", "is_allergic_to", "\"nuts\", \"eggs\""] {
            assert!(c.text().contains(needle), "{needle} in {}", c.text());
        }
    }

    #[test]
    fn invalid_binding_is_refused() {
        let mut p = Params::new();
        p.insert(ParamName::DishName, "  ".into());
        assert!(matches!(QueryIR::new(QueryKind::FetchDish, &p), Err(QueryError::InvalidBinding { .. })));
    }

    #[test]
    fn missing_entities_are_incomplete() {
        let store = demo_store().into_shared();
        let i = intent(IntentKind::DishInfo, &[(ParamName::DishName, "unicorn stew")]);
        let r = execute(&compile(&i).unwrap()[0], &store);
        assert!(!r.is_complete());
        assert_eq!(r.offending(), vec![ParamName::DishName]);
    }

    #[test]
    fn safe_dish_filter_reports_exclusions() {
        let store = demo_store().into_shared();
        let i = intent(IntentKind::MealPreparation, &[(ParamName::UserName, "anna")]);
        let plan = compile(&i).unwrap();
        let r = execute(&plan[1], &store);
        let QueryOutput::SafeDishes { dishes, examined, excluded, excluded_allergens, .. } = r.output else {
            panic!("unexpected {:?}", r.output)
        };
        assert_eq!(examined, 20);
        assert_eq!(excluded, 2);
        assert_eq!(dishes.len(), 18);
        assert_eq!(excluded_allergens, vec!["nuts".to_string()]);
        assert!(dishes.iter().all(|d| !d.allergens.contains(&"nuts".to_string())));
    }

    #[test]
    fn create_user_then_rejects_duplicate_and_bad_targets() {
        let store = demo_store().into_shared();
        let p = |cal: &str| {
            intent(IntentKind::UserInsertion, &[
                (ParamName::Name, "marco"),
                (ParamName::Calories, cal),
                (ParamName::Carbs, "250"),
                (ParamName::Proteins, "80"),
                (ParamName::Fats, "70"),
            ])
        };
        let bad = execute(&compile(&p("0")).unwrap()[0], &store);
        assert_eq!(bad.offending(), vec![ParamName::Calories]);
        let ok = execute(&compile(&p("2000")).unwrap()[0], &store);
        assert!(created_user(&ok).is_some());
        assert_eq!(store.read().get_user("marco").unwrap().name, "Marco");
        assert!(store.read().get_user("Marco").is_ok());
        let dup = execute(&compile(&p("2000")).unwrap()[0], &store);
        assert_eq!(dup.offending(), vec![ParamName::Name]);
    }
}
