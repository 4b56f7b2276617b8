//! Seeded random dishes and profiles for benchmarks, verification and tests.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Allergen, Dish, DishId, Nutrients, Tenths, UserProfile};

pub const ALLERGENS: [&str; 8] = [
    "gluten", "lactose", "nuts", "eggs", "fish", "soy", "celery", "sesame",
];

/// Targets used by the scaling benchmark: 700 kcal split 50/20/30 between
/// carbs, proteins and fats.
pub fn bench_targets() -> Nutrients {
    Nutrients::new(700.0, 87.5, 35.0, 23.3).expect("finite")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A plausible dish: calories drawn first, then split between macronutrients
/// with 4/4/9 kcal per gram.
pub fn random_dish(rng: &mut impl Rng, index: usize) -> Dish {
    let calories: f64 = rng.random_range(120.0..900.0);
    let carb_share: f64 = rng.random_range(0.15..0.7);
    let protein_share: f64 = rng.random_range(0.08..(0.95 - carb_share).min(0.45));
    let fat_share = (1.0 - carb_share - protein_share).max(0.02);
    let round = |x: f64| Tenths::from_f64(x).expect("finite");
    let nutrients = Nutrients {
        calories: round(calories),
        carbs: round(calories * carb_share / 4.0),
        proteins: round(calories * protein_share / 4.0),
        fats: round(calories * fat_share / 9.0),
    };
    let allergens: BTreeSet<Allergen> = ALLERGENS
        .iter()
        .filter(|_| rng.random_bool(0.15))
        .map(|a| crate::domain::canonicalize_allergen(a).expect("non-empty"))
        .collect();
    let mut dish = Dish::new(format!("dish {index:03}"), nutrients, allergens);
    dish.id = DishId(index as u32 + 1);
    dish
}

pub fn random_dishes(seed: u64, n: usize) -> Vec<Dish> {
    let mut rng = rng(seed);
    (0..n).map(|i| random_dish(&mut rng, i)).collect()
}

/// Targets that are usually reachable with one to three random dishes.
pub fn random_targets(rng: &mut impl Rng) -> Nutrients {
    let calories: f64 = rng.random_range(400.0..1400.0);
    let carb_share: f64 = rng.random_range(0.3..0.6);
    let protein_share: f64 = rng.random_range(0.15..0.3);
    let fat_share = 1.0 - carb_share - protein_share;
    Nutrients::new(
        calories,
        calories * carb_share / 4.0,
        calories * protein_share / 4.0,
        calories * fat_share / 9.0,
    )
    .expect("finite")
}

pub fn random_user(rng: &mut impl Rng, name: &str) -> UserProfile {
    let allergies = ALLERGENS
        .iter()
        .filter(|_| rng.random_bool(0.25))
        .map(|a| crate::domain::canonicalize_allergen(a).expect("non-empty"))
        .collect();
    UserProfile::new(name, random_targets(rng), allergies)
}

/// A seeded (dishes, targets) instance for oracle comparisons.
pub fn instance(seed: u64, n: usize) -> (Vec<Dish>, Nutrients) {
    let mut rng = rng(seed);
    let dishes = (0..n).map(|i| random_dish(&mut rng, i)).collect();
    let targets = random_targets(&mut rng);
    (dishes, targets)
}

/// Like [`instance`], but targets sit within a few percent of the totals of a
/// random 1..=3 dish combination, so most instances have feasible meals.
pub fn reachable_instance(seed: u64, n: usize) -> (Vec<Dish>, Nutrients) {
    let mut rng = rng(seed ^ 0x5eed);
    let dishes: Vec<Dish> = (0..n).map(|i| random_dish(&mut rng, i)).collect();
    if dishes.is_empty() {
        return (dishes, random_targets(&mut rng));
    }
    let k = rng.random_range(1..=3.min(n));
    let picks = rand::seq::index::sample(&mut rng, n, k);
    let totals = Nutrients::sum(picks.iter().map(|i| &dishes[i].nutrients));
    let jitter = totals.to_tenths().map(|v| {
        let factor: f64 = rng.random_range(0.94..1.06);
        ((v as f64 * factor).round() as i64).max(1)
    });
    (dishes, Nutrients::from_tenths(jitter))
}
