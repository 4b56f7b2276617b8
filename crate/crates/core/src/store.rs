//! In-process property graph of users, dishes and allergens.
//!
//! Relations are implicit in the records: a dish `has_allergen` each entry of
//! its allergen set, a user `is_allergic_to` each entry of their allergies and
//! `has_nutritional_needs` their target vector.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::domain::{
    canonical_name, validate_dish, validate_profile, Allergen, Dish, DishId, Nutrients, Tenths,
    UserId, UserProfile, Violation,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("a user named '{0}' already exists")]
    DuplicateUser(String),
    #[error("a dish named '{0}' already exists")]
    DuplicateDish(String),
    #[error("invalid profile: {}", join_violations(.0))]
    InvalidProfile(Vec<Violation>),
    #[error("invalid dish: {}", join_violations(.0))]
    InvalidDish(Vec<Violation>),
    #[error("'{0}' not found")]
    NotFound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersionMismatch { found: i64, expected: u32 },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// On-disk and ingestion shape of a dish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DishRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<DishId>,
    pub name: String,
    pub calories: Tenths,
    pub carbs: Tenths,
    pub proteins: Tenths,
    pub fats: Tenths,
    #[serde(default)]
    pub allergens: Vec<Allergen>,
}

impl DishRecord {
    pub fn into_dish(self) -> Dish {
        let mut dish = Dish::new(
            self.name,
            Nutrients {
                calories: self.calories,
                carbs: self.carbs,
                proteins: self.proteins,
                fats: self.fats,
            },
            self.allergens.into_iter().collect(),
        );
        dish.id = self.id.unwrap_or_default();
        dish
    }

    pub fn from_dish(dish: &Dish) -> Self {
        DishRecord {
            id: Some(dish.id),
            name: dish.name.clone(),
            calories: dish.nutrients.calories,
            carbs: dish.nutrients.carbs,
            proteins: dish.nutrients.proteins,
            fats: dish.nutrients.fats,
            allergens: dish.allergens.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRecord {
    pub id: UserId,
    pub name: String,
    pub needs: Nutrients,
    #[serde(default)]
    pub allergies: Vec<Allergen>,
}

impl UserRecord {
    fn into_profile(self) -> UserProfile {
        let mut p = UserProfile::new(self.name, self.needs, self.allergies.into_iter().collect());
        p.id = self.id;
        p
    }

    fn from_profile(p: &UserProfile) -> Self {
        UserRecord {
            id: p.id,
            name: p.name.clone(),
            needs: p.needs,
            allergies: p.allergies.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    pub schema_version: u32,
    pub users: Vec<UserProfile>,
    pub dishes: Vec<Dish>,
}

#[derive(Serialize)]
struct SnapshotDoc {
    schema_version: u32,
    users: Vec<UserRecord>,
    dishes: Vec<DishRecord>,
}

impl GraphSnapshot {
    pub fn to_json(&self) -> String {
        let doc = SnapshotDoc {
            schema_version: self.schema_version,
            users: self.users.iter().map(UserRecord::from_profile).collect(),
            dishes: self.dishes.iter().map(DishRecord::from_dish).collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| StoreError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let obj = doc.as_object().ok_or_else(|| StoreError::Parse {
            location: "document".into(),
            message: "expected an object".into(),
        })?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "schema_version" | "users" | "dishes") {
                return Err(StoreError::Parse {
                    location: "document".into(),
                    message: format!("unknown field '{key}'"),
                });
            }
        }
        let version = obj
            .get("schema_version")
            .and_then(Value::as_i64)
            .ok_or_else(|| StoreError::Parse {
                location: "schema_version".into(),
                message: "missing or not an integer".into(),
            })?;
        if version != SCHEMA_VERSION as i64 {
            return Err(StoreError::SchemaVersionMismatch {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let users = parse_records::<UserRecord>(obj.get("users"), "users")?
            .into_iter()
            .map(UserRecord::into_profile)
            .collect();
        let dishes = parse_records::<DishRecord>(obj.get("dishes"), "dishes")?
            .into_iter()
            .map(DishRecord::into_dish)
            .collect();
        Ok(GraphSnapshot {
            schema_version: SCHEMA_VERSION,
            users,
            dishes,
        })
    }
}

fn parse_records<T: for<'de> Deserialize<'de>>(
    value: Option<&Value>,
    section: &str,
) -> Result<Vec<T>, StoreError> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    let items = value.as_array().ok_or_else(|| StoreError::Parse {
        location: section.to_string(),
        message: "expected an array".into(),
    })?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            T::deserialize(item).map_err(|e| StoreError::Parse {
                location: format!("{section}[{i}]"),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    users: BTreeMap<String, UserProfile>,
    dishes: BTreeMap<String, Dish>,
    next_user: u32,
    next_dish: u32,
}

pub type SharedStore = Arc<RwLock<KnowledgeStore>>;

impl KnowledgeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_shared(self) -> SharedStore {
        Arc::new(RwLock::new(self))
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn dish_count(&self) -> usize {
        self.dishes.len()
    }

    /// Inserts a profile and assigns it a fresh id.
    pub fn insert_user(&mut self, mut profile: UserProfile) -> Result<UserId, StoreError> {
        let violations = validate_profile(&profile);
        if !violations.is_empty() {
            return Err(StoreError::InvalidProfile(violations));
        }
        let key = profile.canonical_name();
        if self.users.contains_key(&key) {
            return Err(StoreError::DuplicateUser(key));
        }
        self.next_user += 1;
        profile.id = UserId(self.next_user);
        self.users.insert(key, profile);
        Ok(UserId(self.next_user))
    }

    pub fn insert_dish(&mut self, mut dish: Dish) -> Result<DishId, StoreError> {
        let violations = validate_dish(&dish);
        if !violations.is_empty() {
            return Err(StoreError::InvalidDish(violations));
        }
        let key = dish.canonical_name();
        if self.dishes.contains_key(&key) {
            return Err(StoreError::DuplicateDish(key));
        }
        self.next_dish += 1;
        dish.id = DishId(self.next_dish);
        self.dishes.insert(key, dish);
        Ok(DishId(self.next_dish))
    }

    pub fn get_dish(&self, name: &str) -> Result<&Dish, StoreError> {
        let key = canonical_name(name);
        self.dishes.get(&key).ok_or(StoreError::NotFound(key))
    }

    pub fn get_user(&self, name: &str) -> Result<&UserProfile, StoreError> {
        let key = canonical_name(name);
        self.users.get(&key).ok_or(StoreError::NotFound(key))
    }

    /// Dishes in canonical name order.
    pub fn dishes(&self) -> impl Iterator<Item = &Dish> {
        self.dishes.values()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserProfile> {
        self.users.values()
    }

    /// Dishes sharing no allergen with the user, in canonical name order.
    pub fn dishes_safe_for(&self, user: &UserProfile) -> Vec<Dish> {
        self.dishes_safe_for_allergies(&user.allergies)
    }

    pub fn dishes_safe_for_allergies(&self, allergies: &BTreeSet<Allergen>) -> Vec<Dish> {
        self.dishes
            .values()
            .filter(|d| d.is_safe_for(allergies))
            .cloned()
            .collect()
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        let mut users: Vec<UserProfile> = self.users.values().cloned().collect();
        let mut dishes: Vec<Dish> = self.dishes.values().cloned().collect();
        users.sort_by_key(|u| u.id);
        dishes.sort_by_key(|d| d.id);
        GraphSnapshot {
            schema_version: SCHEMA_VERSION,
            users,
            dishes,
        }
    }

    /// Rebuilds a store, keeping the ids recorded in the snapshot.
    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<Self, StoreError> {
        let mut store = KnowledgeStore::new();
        for user in snapshot.users {
            let violations = validate_profile(&user);
            if !violations.is_empty() {
                return Err(StoreError::InvalidProfile(violations));
            }
            let key = user.canonical_name();
            if store.users.contains_key(&key) {
                return Err(StoreError::DuplicateUser(key));
            }
            store.next_user = store.next_user.max(user.id.0);
            store.users.insert(key, user);
        }
        for dish in snapshot.dishes {
            let violations = validate_dish(&dish);
            if !violations.is_empty() {
                return Err(StoreError::InvalidDish(violations));
            }
            let key = dish.canonical_name();
            if store.dishes.contains_key(&key) {
                return Err(StoreError::DuplicateDish(key));
            }
            store.next_dish = store.next_dish.max(dish.id.0);
            store.dishes.insert(key, dish);
        }
        Ok(store)
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        fs::write(path, self.snapshot().to_json())?;
        Ok(())
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let text = fs::read_to_string(path)?;
        Self::from_snapshot(GraphSnapshot::from_json(&text)?)
    }

    /// Content hash of the serialized snapshot.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.snapshot().to_json().hash(&mut h);
        h.finish()
    }
}

/// One rejected record from a bulk dish load.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestIssue {
    /// 1-based line for line-delimited input, 0-based index for documents.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub inserted: Vec<DishId>,
    pub issues: Vec<IngestIssue>,
}

/// Parses a dish file: either a single JSON document (an array of records or
/// an object with a `dishes` array) or one JSON record per line.
pub fn parse_dish_file(text: &str) -> (Vec<(String, DishRecord)>, Vec<IngestIssue>) {
    let mut records = Vec::new();
    let mut issues = Vec::new();
    if let Ok(doc) = serde_json::from_str::<Value>(text) {
        let items: Option<Vec<Value>> = match &doc {
            Value::Array(items) => Some(items.clone()),
            Value::Object(obj) if obj.contains_key("dishes") => {
                obj.get("dishes").and_then(Value::as_array).cloned()
            }
            Value::Object(_) => Some(vec![doc.clone()]),
            _ => None,
        };
        match items {
            Some(items) => {
                for (i, item) in items.into_iter().enumerate() {
                    let location = format!("record {i}");
                    match DishRecord::deserialize(item) {
                        Ok(r) => records.push((location, r)),
                        Err(e) => issues.push(IngestIssue {
                            location,
                            message: e.to_string(),
                        }),
                    }
                }
            }
            None => issues.push(IngestIssue {
                location: "document".into(),
                message: "expected an array of dish records or an object with 'dishes'".into(),
            }),
        }
        return (records, issues);
    }
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let location = format!("line {}", i + 1);
        match serde_json::from_str::<DishRecord>(trimmed) {
            Ok(r) => records.push((location, r)),
            Err(e) => issues.push(IngestIssue {
                location,
                message: e.to_string(),
            }),
        }
    }
    (records, issues)
}

/// Inserts every well-formed record; bad ones are reported, not fatal.
pub fn ingest_dishes(store: &mut KnowledgeStore, text: &str) -> IngestReport {
    let (records, mut issues) = parse_dish_file(text);
    let mut inserted = Vec::new();
    for (location, mut record) in records {
        record.id = None;
        match store.insert_dish(record.into_dish()) {
            Ok(id) => inserted.push(id),
            Err(e) => issues.push(IngestIssue {
                location,
                message: e.to_string(),
            }),
        }
    }
    IngestReport { inserted, issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::allergen_set;

    fn n(c: f64, cb: f64, p: f64, f: f64) -> Nutrients {
        Nutrients::new(c, cb, p, f).unwrap()
    }

    fn dish(name: &str, v: [f64; 4], allergens: &[&str]) -> Dish {
        Dish::new(name, n(v[0], v[1], v[2], v[3]), allergen_set(allergens).unwrap())
    }

    fn user(name: &str, allergies: &[&str]) -> UserProfile {
        UserProfile::new(name, n(600.0, 60.0, 40.0, 20.0), allergen_set(allergies).unwrap())
    }

    #[test]
    fn insert_then_get_user() {
        let mut s = KnowledgeStore::new();
        let id = s.insert_user(user("Anna", &["lactose"])).unwrap();
        let got = s.get_user("anna").unwrap();
        assert_eq!(got.id, id);
        assert_eq!(got.name, "Anna");
        assert_eq!(s.get_user("  ANNA ").unwrap().id, id);
        assert!(matches!(s.insert_user(user("anna", &[])), Err(StoreError::DuplicateUser(_))));
        assert!(matches!(s.get_user("bob"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn invalid_profile_rejected() {
        let mut s = KnowledgeStore::new();
        let mut p = user("Anna", &[]);
        p.needs.fats = Tenths::from_f64(-1.0).unwrap();
        assert!(matches!(s.insert_user(p), Err(StoreError::InvalidProfile(_))));
        assert_eq!(s.user_count(), 0);
    }

    #[test]
    fn dishes_insert_and_lookup() {
        let mut s = KnowledgeStore::new();
        s.insert_dish(dish("Pasta al pesto", [450.0, 55.0, 12.0, 20.0], &["gluten"])).unwrap();
        s.insert_dish(dish("Rice", [300.0, 60.0, 6.0, 1.0], &[])).unwrap();
        assert_eq!(s.get_dish("PASTA AL PESTO").unwrap().name, "Pasta al pesto");
        assert_eq!(s.get_dish("rice  ").unwrap().name, "Rice");
        assert!(matches!(s.get_dish("soup"), Err(StoreError::NotFound(_))));
        assert!(matches!(
            s.insert_dish(dish("rice", [1.0, 1.0, 1.0, 1.0], &[])),
            Err(StoreError::DuplicateDish(_))
        ));
    }

    #[test]
    fn safe_dish_filter() {
        let mut s = KnowledgeStore::new();
        s.insert_dish(dish("pasta", [450.0, 55.0, 12.0, 20.0], &["gluten"])).unwrap();
        s.insert_dish(dish("rice", [300.0, 60.0, 6.0, 1.0], &[])).unwrap();
        let names = |v: Vec<Dish>| v.into_iter().map(|d| d.name).collect::<Vec<_>>();
        assert_eq!(names(s.dishes_safe_for(&user("a", &["gluten"]))), vec!["rice"]);
        assert_eq!(names(s.dishes_safe_for(&user("b", &[]))), vec!["pasta", "rice"]);
        assert!(s.dishes_safe_for(&user("c", &["gluten", "fish"])).len() == 1);
    }

    #[test]
    fn retrieval_is_read_only() {
        let mut s = KnowledgeStore::new();
        s.insert_user(user("Anna", &[])).unwrap();
        let before = s.fingerprint();
        let _ = s.get_user("anna");
        let _ = s.get_user("nobody");
        let _ = s.dishes_safe_for(&user("x", &[]));
        assert_eq!(before, s.fingerprint());
    }

    #[test]
    fn snapshot_errors() {
        let bad_version = r#"{"schema_version": 7, "users": [], "dishes": []}"#;
        assert!(matches!(
            GraphSnapshot::from_json(bad_version),
            Err(StoreError::SchemaVersionMismatch { found: 7, .. })
        ));
        let bad_record = r#"{"schema_version": 1, "users": [],
            "dishes": [{"name":"a","calories":1,"carbs":1,"proteins":1,"fats":1},
                       {"name":"b","calories":"lots","carbs":1,"proteins":1,"fats":1}]}"#;
        match GraphSnapshot::from_json(bad_record) {
            Err(StoreError::Parse { location, .. }) => assert_eq!(location, "dishes[1]"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            GraphSnapshot::from_json("{ nope"),
            Err(StoreError::Parse { .. })
        ));
    }

    #[test]
    fn ingest_mixed_file() {
        let text = r#"{"name":"Rice","calories":300,"carbs":60,"proteins":6,"fats":1,"allergens":[]}
{"name":"Broken","calories":"x"}
{"name":"Soup","calories":120,"carbs":10,"proteins":5,"fats":4,"allergens":["Celery"]}
"#;
        let mut s = KnowledgeStore::new();
        let report = ingest_dishes(&mut s, text);
        assert_eq!(report.inserted.len(), 2);
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].location, "line 2");
        assert!(s.get_dish("soup").unwrap().allergens.contains(&allergen_set(["celery"]).unwrap().into_iter().next().unwrap()));
    }

    #[test]
    fn ingest_document_form() {
        let text = r#"{"dishes":[{"name":"Rice","calories":300,"carbs":60,"proteins":6,"fats":1}]}"#;
        let mut s = KnowledgeStore::new();
        let report = ingest_dishes(&mut s, text);
        assert_eq!(report.inserted.len(), 1);
        assert!(report.issues.is_empty());
    }
}
