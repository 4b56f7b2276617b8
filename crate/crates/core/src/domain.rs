//! Shared value types: nutrient vectors, allergens, dishes and user profiles.
//!
//! Nutrient quantities are held as integer tenths (decikcal / decigram) so
//! that sums, deviations and rankings are exact and platform independent.
//! External formats carry ordinary decimal numbers with one decimal place.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("token is empty after trimming")]
    EmptyToken,
    #[error("value {0} is not a finite number")]
    NonFinite(f64),
}

/// A quantity in tenths of its unit (0.1 kcal or 0.1 g).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tenths(pub i64);

impl Tenths {
    pub const ZERO: Tenths = Tenths(0);

    /// Rounds a decimal value to the nearest tenth (half away from zero).
    pub fn from_f64(value: f64) -> Result<Self, DomainError> {
        if !value.is_finite() {
            return Err(DomainError::NonFinite(value));
        }
        Ok(Tenths((value * 10.0).round() as i64))
    }

    pub fn from_units(units: i64) -> Self {
        Tenths(units * 10)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn raw(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

impl Add for Tenths {
    type Output = Tenths;
    fn add(self, rhs: Tenths) -> Tenths {
        Tenths(self.0 + rhs.0)
    }
}

impl Serialize for Tenths {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Tenths {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Tenths::from_f64(value).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NutrientKind {
    Calories,
    Carbs,
    Proteins,
    Fats,
}

impl NutrientKind {
    pub const ALL: [NutrientKind; 4] = [
        NutrientKind::Calories,
        NutrientKind::Carbs,
        NutrientKind::Proteins,
        NutrientKind::Fats,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NutrientKind::Calories => "calories",
            NutrientKind::Carbs => "carbs",
            NutrientKind::Proteins => "proteins",
            NutrientKind::Fats => "fats",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            NutrientKind::Calories => "kcal",
            _ => "g",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NutrientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Calories (kcal) and the three macronutrients (g).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nutrients {
    pub calories: Tenths,
    pub carbs: Tenths,
    pub proteins: Tenths,
    pub fats: Tenths,
}

impl Nutrients {
    pub const ZERO: Nutrients = Nutrients {
        calories: Tenths::ZERO,
        carbs: Tenths::ZERO,
        proteins: Tenths::ZERO,
        fats: Tenths::ZERO,
    };

    /// Builds a vector from decimal values, rounding each to one decimal place.
    pub fn new(calories: f64, carbs: f64, proteins: f64, fats: f64) -> Result<Self, DomainError> {
        Ok(Nutrients {
            calories: Tenths::from_f64(calories)?,
            carbs: Tenths::from_f64(carbs)?,
            proteins: Tenths::from_f64(proteins)?,
            fats: Tenths::from_f64(fats)?,
        })
    }

    pub fn from_tenths(values: [i64; 4]) -> Self {
        Nutrients {
            calories: Tenths(values[0]),
            carbs: Tenths(values[1]),
            proteins: Tenths(values[2]),
            fats: Tenths(values[3]),
        }
    }

    pub fn to_tenths(self) -> [i64; 4] {
        [self.calories.0, self.carbs.0, self.proteins.0, self.fats.0]
    }

    pub fn get(&self, kind: NutrientKind) -> Tenths {
        self[kind]
    }

    pub fn iter(&self) -> impl Iterator<Item = (NutrientKind, Tenths)> + '_ {
        NutrientKind::ALL.into_iter().map(move |k| (k, self[k]))
    }

    /// Components that are negative.
    pub fn negative_components(&self) -> Vec<NutrientKind> {
        self.iter().filter(|(_, v)| v.0 < 0).map(|(k, _)| k).collect()
    }

    /// Components that are zero or negative.
    pub fn non_positive_components(&self) -> Vec<NutrientKind> {
        self.iter().filter(|(_, v)| v.0 <= 0).map(|(k, _)| k).collect()
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a Nutrients>>(items: I) -> Nutrients {
        items.into_iter().fold(Nutrients::ZERO, |acc, n| acc + *n)
    }
}

impl Index<NutrientKind> for Nutrients {
    type Output = Tenths;
    fn index(&self, kind: NutrientKind) -> &Tenths {
        match kind {
            NutrientKind::Calories => &self.calories,
            NutrientKind::Carbs => &self.carbs,
            NutrientKind::Proteins => &self.proteins,
            NutrientKind::Fats => &self.fats,
        }
    }
}

impl IndexMut<NutrientKind> for Nutrients {
    fn index_mut(&mut self, kind: NutrientKind) -> &mut Tenths {
        match kind {
            NutrientKind::Calories => &mut self.calories,
            NutrientKind::Carbs => &mut self.carbs,
            NutrientKind::Proteins => &mut self.proteins,
            NutrientKind::Fats => &mut self.fats,
        }
    }
}

impl Add for Nutrients {
    type Output = Nutrients;
    fn add(self, rhs: Nutrients) -> Nutrients {
        Nutrients {
            calories: self.calories + rhs.calories,
            carbs: self.carbs + rhs.carbs,
            proteins: self.proteins + rhs.proteins,
            fats: self.fats + rhs.fats,
        }
    }
}

impl AddAssign for Nutrients {
    fn add_assign(&mut self, rhs: Nutrients) {
        *self = *self + rhs;
    }
}

impl fmt::Display for Nutrients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} kcal, {} g carbs, {} g proteins, {} g fats",
            self.calories, self.carbs, self.proteins, self.fats
        )
    }
}

/// Lowercases, trims and collapses inner whitespace runs to a single space.
pub fn canonical_name(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A canonical allergen token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allergen(String);

impl Allergen {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Allergen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Allergen {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Allergen {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        canonicalize_allergen(&raw).map_err(serde::de::Error::custom)
    }
}

pub fn canonicalize_allergen(raw: &str) -> Result<Allergen, DomainError> {
    let token = canonical_name(raw);
    if token.is_empty() {
        return Err(DomainError::EmptyToken);
    }
    Ok(Allergen(token))
}

/// Canonicalizes every token, dropping duplicates.
pub fn allergen_set<I, S>(raw: I) -> Result<BTreeSet<Allergen>, DomainError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    raw.into_iter()
        .map(|s| canonicalize_allergen(s.as_ref()))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DishId(pub u32);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for DishId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dish-{}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "user-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dish {
    /// Assigned by the knowledge store on insertion.
    pub id: DishId,
    pub name: String,
    pub nutrients: Nutrients,
    pub allergens: BTreeSet<Allergen>,
}

impl Dish {
    pub fn new(name: impl Into<String>, nutrients: Nutrients, allergens: BTreeSet<Allergen>) -> Self {
        Dish {
            id: DishId::default(),
            name: name.into(),
            nutrients,
            allergens,
        }
    }

    pub fn canonical_name(&self) -> String {
        canonical_name(&self.name)
    }

    pub fn is_safe_for(&self, allergies: &BTreeSet<Allergen>) -> bool {
        self.allergens.is_disjoint(allergies)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    /// Assigned by the knowledge store on insertion.
    pub id: UserId,
    pub name: String,
    pub needs: Nutrients,
    pub allergies: BTreeSet<Allergen>,
}

impl UserProfile {
    pub fn new(name: impl Into<String>, needs: Nutrients, allergies: BTreeSet<Allergen>) -> Self {
        UserProfile {
            id: UserId::default(),
            name: name.into(),
            needs,
            allergies,
        }
    }

    pub fn canonical_name(&self) -> String {
        canonical_name(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "violation", content = "nutrient", rename_all = "snake_case")]
pub enum Violation {
    EmptyName,
    NonPositiveTarget(NutrientKind),
    NegativeNutrient(NutrientKind),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyName => f.write_str("name is empty"),
            Violation::NonPositiveTarget(k) => write!(f, "target {k} must be greater than zero"),
            Violation::NegativeNutrient(k) => write!(f, "{k} must not be negative"),
        }
    }
}

pub fn validate_profile(profile: &UserProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    if canonical_name(&profile.name).is_empty() {
        out.push(Violation::EmptyName);
    }
    out.extend(
        profile
            .needs
            .non_positive_components()
            .into_iter()
            .map(Violation::NonPositiveTarget),
    );
    out
}

pub fn validate_dish(dish: &Dish) -> Vec<Violation> {
    let mut out = Vec::new();
    if canonical_name(&dish.name).is_empty() {
        out.push(Violation::EmptyName);
    }
    out.extend(
        dish.nutrients
            .negative_components()
            .into_iter()
            .map(Violation::NegativeNutrient),
    );
    out
}
