//! Exact meal-combination search.
//!
//! A meal is a subset of 1..=`max_dishes` distinct dishes. Its score is the sum
//! over the four nutrients of `|total - target| / target`, and a meal is
//! feasible only when every one of those relative deviations is within the
//! configured threshold (boundary inclusive).
//!
//! Scores are kept as exact rationals over the common denominator
//! `calories * carbs * proteins * fats` (targets in tenths), so rankings never
//! depend on floating point rounding. Ties are broken by the ascending tuple of
//! canonical dish names.
//!
//! [`solve`] is a depth-first branch-and-bound over dishes grouped by
//! quantized nutrient vectors (see [`prune_groups`]); [`brute_force_oracle`]
//! enumerates every subset and exists to check it.

use std::cmp::Ordering;
use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::domain::{Dish, DishId, NutrientKind, Nutrients, Tenths};

/// Basis points per unit ratio.
const BP: i128 = 10_000;

/// Largest dish list the exhaustive oracle accepts.
pub const ORACLE_LIMIT: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("target {0} must be greater than zero")]
    NonPositiveTarget(NutrientKind),
    #[error("dish '{0}' has a negative nutrient value")]
    NegativeNutrient(String),
    #[error("{n} dishes exceeds the oracle limit of {limit}")]
    TooLarge { n: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolverConfig {
    pub max_dishes: usize,
    /// Relative deviation bound in basis points (1000 = 10%).
    pub threshold_bp: u32,
    pub max_solutions: usize,
    /// Quantization widths (tenths) used to group similar dishes.
    pub group_bins: Nutrients,
    /// Prune subtrees whose lower bound is worse than the current top list.
    pub incumbent_bound: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_dishes: 3,
            threshold_bp: 1000,
            max_solutions: 5,
            group_bins: Nutrients::from_tenths([250, 50, 50, 50]),
            incumbent_bound: true,
        }
    }
}

impl SolverConfig {
    /// Sets the threshold from a ratio, rounded to whole basis points.
    pub fn with_threshold(mut self, ratio: f64) -> Result<Self, SolverError> {
        if !ratio.is_finite() || ratio <= 0.0 || ratio >= 1.0 {
            return Err(SolverError::InvalidConfig(format!(
                "threshold must be in (0, 1), got {ratio}"
            )));
        }
        self.threshold_bp = (ratio * BP as f64).round() as u32;
        self.validate()?;
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold_bp as f64 / BP as f64
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_dishes == 0 {
            return Err(SolverError::InvalidConfig("max_dishes must be at least 1".into()));
        }
        if self.threshold_bp == 0 || self.threshold_bp as i128 >= BP {
            return Err(SolverError::InvalidConfig("threshold must be in (0, 1)".into()));
        }
        if self.max_solutions == 0 {
            return Err(SolverError::InvalidConfig("max_solutions must be at least 1".into()));
        }
        if self.group_bins.to_tenths().iter().any(|&b| b <= 0) {
            return Err(SolverError::InvalidConfig("group bins must be positive".into()));
        }
        Ok(())
    }
}

/// Validated, strictly positive nutritional targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Targets {
    values: [i64; 4],
    /// `denominator / target_i` for each nutrient.
    weights: [u128; 4],
    denominator: u128,
}

impl Targets {
    pub fn new(targets: Nutrients) -> Result<Self, SolverError> {
        if let Some(kind) = targets.non_positive_components().first() {
            return Err(SolverError::NonPositiveTarget(*kind));
        }
        let values = targets.to_tenths();
        let denominator: u128 = values.iter().map(|&v| v as u128).product();
        let weights = values.map(|v| denominator / v as u128);
        Ok(Targets {
            values,
            weights,
            denominator,
        })
    }

    pub fn nutrients(&self) -> Nutrients {
        Nutrients::from_tenths(self.values)
    }

    fn lower_bound_numer(&self, sums: &[i64; 4]) -> u128 {
        (0..4)
            .map(|i| (sums[i] - self.values[i]).max(0) as u128 * self.weights[i])
            .sum()
    }

    fn score_numer(&self, sums: &[i64; 4]) -> u128 {
        (0..4)
            .map(|i| (sums[i] - self.values[i]).unsigned_abs() as u128 * self.weights[i])
            .sum()
    }

    fn overshoots(&self, sums: &[i64; 4], threshold_bp: u32) -> bool {
        (0..4).any(|i| {
            (sums[i] as i128 - self.values[i] as i128) * BP > threshold_bp as i128 * self.values[i] as i128
        })
    }

    fn lower_limit_reachable(&self, i: usize, max_total: i128, threshold_bp: u32) -> bool {
        (self.values[i] as i128 - max_total) * BP <= threshold_bp as i128 * self.values[i] as i128
    }
}

/// Signed difference between a total and its target, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Deviation {
    /// `total - target`, in tenths.
    pub difference: Tenths,
    pub target: Tenths,
}

impl Deviation {
    /// `|total - target| / target`.
    pub fn ratio(&self) -> f64 {
        self.difference.0.unsigned_abs() as f64 / self.target.0 as f64
    }

    /// Signed percentage in tenths of a percent, rounded half away from zero.
    pub fn signed_percent_tenths(&self) -> i64 {
        let num = self.difference.0 as i128 * 1000;
        let den = self.target.0 as i128;
        let q = (2 * num.abs() + den) / (2 * den);
        (if num < 0 { -q } else { q }) as i64
    }

    pub fn within(&self, threshold_bp: u32) -> bool {
        self.difference.0.unsigned_abs() as i128 * BP <= threshold_bp as i128 * self.target.0 as i128
    }
}

/// An exact score: `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Score {
    pub numerator: u128,
    pub denominator: u128,
}

impl Score {
    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.denominator == other.denominator {
            return self.numerator.cmp(&other.numerator);
        }
        match (
            self.numerator.checked_mul(other.denominator),
            other.numerator.checked_mul(self.denominator),
        ) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.as_f64())
    }
}

/// Per-nutrient deviations and the total score of a combination.
pub fn score(totals: &Nutrients, targets: &Targets) -> ([Deviation; 4], Score) {
    let sums = totals.to_tenths();
    let deviations = std::array::from_fn(|i| Deviation {
        difference: Tenths(sums[i] - targets.values[i]),
        target: Tenths(targets.values[i]),
    });
    (
        deviations,
        Score {
            numerator: targets.score_numer(&sums),
            denominator: targets.denominator,
        },
    )
}

/// Every per-nutrient deviation within the threshold.
pub fn feasible(totals: &Nutrients, targets: &Targets, config: &SolverConfig) -> bool {
    score(totals, targets).0.iter().all(|d| d.within(config.threshold_bp))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MealSolution {
    /// Sorted ascending.
    pub dish_ids: Vec<DishId>,
    /// Display names, ordered by canonical name.
    pub dish_names: Vec<String>,
    pub totals: Nutrients,
    pub deviations: [Deviation; 4],
    pub score: Score,
    /// Canonical names, ascending; the tie-break key.
    #[serde(skip)]
    pub tie_key: Vec<String>,
}

impl MealSolution {
    fn build(chosen: &[&Dish], targets: &Targets) -> Self {
        let totals = Nutrients::sum(chosen.iter().map(|d| &d.nutrients));
        let (deviations, score) = score(&totals, targets);
        let mut named: Vec<(String, &Dish)> =
            chosen.iter().map(|d| (d.canonical_name(), *d)).collect();
        named.sort_by(|a, b| a.0.cmp(&b.0));
        let mut dish_ids: Vec<DishId> = chosen.iter().map(|d| d.id).collect();
        dish_ids.sort();
        MealSolution {
            dish_ids,
            dish_names: named.iter().map(|(_, d)| d.name.clone()).collect(),
            totals,
            deviations,
            score,
            tie_key: named.into_iter().map(|(k, _)| k).collect(),
        }
    }

    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.score
            .cmp(&other.score)
            .then_with(|| self.tie_key.cmp(&other.tie_key))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveOutcome {
    Solved,
    NoFeasibleSolution,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub outcome: SolveOutcome,
    /// Ascending by (score, tie key).
    pub solutions: Vec<MealSolution>,
    pub explored_nodes: u64,
    pub pruned_nodes: u64,
    #[serde(serialize_with = "ser_secs")]
    pub elapsed: Duration,
}

fn ser_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl SolverReport {
    pub fn is_infeasible(&self) -> bool {
        self.outcome == SolveOutcome::NoFeasibleSolution
    }

    pub fn best(&self) -> Option<&MealSolution> {
        self.solutions.first()
    }

    fn finish(solutions: Vec<MealSolution>, explored: u64, pruned: u64, started: Instant) -> Self {
        SolverReport {
            outcome: if solutions.is_empty() {
                SolveOutcome::NoFeasibleSolution
            } else {
                SolveOutcome::Solved
            },
            solutions,
            explored_nodes: explored,
            pruned_nodes: pruned,
            elapsed: started.elapsed(),
        }
    }
}

/// Dishes whose quantized nutrient vectors coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DishClass {
    /// `floor(value / bin)` per nutrient.
    pub key: [i64; 4],
    /// Indices into the input list, ordered by calories descending then name.
    pub members: Vec<usize>,
    /// Component-wise minimum over members (tenths).
    pub min: [i64; 4],
    pub max: [i64; 4],
    /// Member with the lexicographically first canonical name.
    pub representative: usize,
}

impl DishClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Partitions dishes by quantized nutrient vector. Classes come out in
/// descending key order (calorie bin first).
pub fn prune_groups(dishes: &[Dish], config: &SolverConfig) -> Vec<DishClass> {
    let bins = config.group_bins.to_tenths();
    let names: Vec<String> = dishes.iter().map(Dish::canonical_name).collect();
    let mut classes: std::collections::BTreeMap<[i64; 4], Vec<usize>> = Default::default();
    for (i, d) in dishes.iter().enumerate() {
        let v = d.nutrients.to_tenths();
        let key = std::array::from_fn(|k| v[k].div_euclid(bins[k]));
        classes.entry(key).or_default().push(i);
    }
    classes
        .into_iter()
        .rev()
        .map(|(key, mut members)| {
            members.sort_by(|&a, &b| {
                dishes[b]
                    .nutrients
                    .calories
                    .cmp(&dishes[a].nutrients.calories)
                    .then_with(|| names[a].cmp(&names[b]))
            });
            let vals = |i: usize| dishes[i].nutrients.to_tenths();
            let min = std::array::from_fn(|k| members.iter().map(|&i| vals(i)[k]).min().unwrap());
            let max = std::array::from_fn(|k| members.iter().map(|&i| vals(i)[k]).max().unwrap());
            let representative = *members.iter().min_by(|&&a, &&b| names[a].cmp(&names[b])).unwrap();
            DishClass {
                key,
                members,
                min,
                max,
                representative,
            }
        })
        .collect()
}

fn check_inputs(dishes: &[Dish], targets: &Nutrients, config: &SolverConfig) -> Result<Targets, SolverError> {
    config.validate()?;
    let targets = Targets::new(*targets)?;
    if let Some(d) = dishes.iter().find(|d| !d.nutrients.negative_components().is_empty()) {
        return Err(SolverError::NegativeNutrient(d.name.clone()));
    }
    Ok(targets)
}

/// Bounded list of the best solutions seen so far.
struct TopList {
    capacity: usize,
    items: Vec<MealSolution>,
}

impl TopList {
    fn worst_numer(&self) -> Option<u128> {
        (self.items.len() == self.capacity).then(|| self.items.last().unwrap().score.numerator)
    }

    fn offer(&mut self, candidate: MealSolution) {
        let pos = self
            .items
            .partition_point(|s| s.rank_cmp(&candidate) == Ordering::Less);
        if pos >= self.capacity {
            return;
        }
        self.items.insert(pos, candidate);
        self.items.truncate(self.capacity);
    }
}

struct Search<'a> {
    dishes: &'a [Dish],
    targets: Targets,
    config: &'a SolverConfig,
    /// Dish indices in search order.
    order: Vec<usize>,
    values: Vec<[i64; 4]>,
    /// For each position, the class covering it as (start, end, min).
    class_span: Vec<(usize, usize, [i64; 4])>,
    /// Suffix maxima of each nutrient over `order`.
    suffix_max: Vec<[i64; 4]>,
    top: TopList,
    chosen: Vec<usize>,
    explored: u64,
    pruned: u64,
}

impl Search<'_> {
    fn unreachable(&self, sums: &[i64; 4], pos: usize, slots: usize) -> bool {
        (0..4).any(|i| {
            let best = sums[i] as i128 + slots as i128 * self.suffix_max[pos][i] as i128;
            !self.targets.lower_limit_reachable(i, best, self.config.threshold_bp)
        })
    }

    fn bound_exceeded(&self, sums: &[i64; 4]) -> bool {
        self.config.incumbent_bound
            && self
                .top
                .worst_numer()
                .is_some_and(|worst| self.targets.lower_bound_numer(sums) > worst)
    }

    fn visit(&mut self, start: usize, sums: [i64; 4], parent_bound: u128) {
        let slots = self.config.max_dishes - self.chosen.len();
        let n = self.order.len();
        let mut pos = start;
        while pos < n {
            if self.unreachable(&sums, pos, slots) {
                self.pruned += (n - pos) as u64;
                break;
            }
            let (class_start, class_end, class_min) = self.class_span[pos];
            if pos == start || pos == class_start {
                let floor: [i64; 4] = std::array::from_fn(|i| sums[i] + class_min[i]);
                if self.targets.overshoots(&floor, self.config.threshold_bp) || self.bound_exceeded(&floor) {
                    self.pruned += (class_end - pos) as u64;
                    pos = class_end;
                    continue;
                }
            }
            let v = self.values[pos];
            let next: [i64; 4] = std::array::from_fn(|i| sums[i] + v[i]);
            if self.targets.overshoots(&next, self.config.threshold_bp) || self.bound_exceeded(&next) {
                self.pruned += 1;
                pos += 1;
                continue;
            }
            self.explored += 1;
            let bound = self.targets.lower_bound_numer(&next);
            debug_assert!(bound >= parent_bound, "lower bound must not decrease along a branch");
            self.chosen.push(self.order[pos]);
            let in_range = (0..4).all(|i| {
                (self.targets.values[i] as i128 - next[i] as i128).abs() * BP
                    <= self.config.threshold_bp as i128 * self.targets.values[i] as i128
            });
            if in_range {
                let picked: Vec<&Dish> = self.chosen.iter().map(|&i| &self.dishes[i]).collect();
                let solution = MealSolution::build(&picked, &self.targets);
                debug_assert!(solution.score.numerator >= bound, "inadmissible lower bound");
                self.top.offer(solution);
            }
            if slots > 1 {
                self.visit(pos + 1, next, bound);
            }
            self.chosen.pop();
            pos += 1;
        }
    }
}

/// Best `max_solutions` feasible subsets of size 1..=`max_dishes`.
///
/// `dishes` must already exclude anything unsafe for the user.
pub fn solve(dishes: &[Dish], targets: &Nutrients, config: &SolverConfig) -> Result<SolverReport, SolverError> {
    let started = Instant::now();
    let targets = check_inputs(dishes, targets, config)?;
    let classes = prune_groups(dishes, config);

    let mut order = Vec::with_capacity(dishes.len());
    let mut class_span = Vec::with_capacity(dishes.len());
    for class in &classes {
        let start = order.len();
        let end = start + class.len();
        for &m in &class.members {
            order.push(m);
            class_span.push((start, end, class.min));
        }
    }
    let values: Vec<[i64; 4]> = order.iter().map(|&i| dishes[i].nutrients.to_tenths()).collect();
    let mut suffix_max = vec![[i64::MIN; 4]; values.len() + 1];
    for pos in (0..values.len()).rev() {
        suffix_max[pos] = std::array::from_fn(|i| suffix_max[pos + 1][i].max(values[pos][i]));
    }

    let mut search = Search {
        dishes,
        targets,
        config,
        order,
        values,
        class_span,
        suffix_max,
        top: TopList {
            capacity: config.max_solutions,
            items: Vec::new(),
        },
        chosen: Vec::with_capacity(config.max_dishes),
        explored: 0,
        pruned: 0,
    };
    search.visit(0, [0; 4], 0);
    Ok(SolverReport::finish(search.top.items, search.explored, search.pruned, started))
}

/// Exhaustive reference: scores every subset of size 1..=`max_dishes`.
pub fn brute_force_oracle(
    dishes: &[Dish],
    targets: &Nutrients,
    config: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    let started = Instant::now();
    if dishes.len() > ORACLE_LIMIT {
        return Err(SolverError::TooLarge {
            n: dishes.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let targets = check_inputs(dishes, targets, config)?;
    let mut all = Vec::new();
    let mut explored = 0u64;
    let mut stack: Vec<usize> = Vec::new();
    enumerate(dishes.len(), config.max_dishes, 0, &mut stack, &mut |subset| {
        explored += 1;
        let picked: Vec<&Dish> = subset.iter().map(|&i| &dishes[i]).collect();
        let totals = Nutrients::sum(picked.iter().map(|d| &d.nutrients));
        if feasible(&totals, &targets, config) {
            all.push(MealSolution::build(&picked, &targets));
        }
    });
    all.sort_by(MealSolution::rank_cmp);
    all.truncate(config.max_solutions);
    Ok(SolverReport::finish(all, explored, 0, started))
}

fn enumerate(n: usize, k: usize, start: usize, stack: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    for i in start..n {
        stack.push(i);
        f(stack);
        if stack.len() < k {
            enumerate(n, k, i + 1, stack, f);
        }
        stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn dish(id: u32, name: &str, v: [f64; 4]) -> Dish {
        let mut d = Dish::new(name, Nutrients::new(v[0], v[1], v[2], v[3]).unwrap(), BTreeSet::new());
        d.id = DishId(id);
        d
    }

    fn targets() -> Nutrients {
        Nutrients::new(600.0, 60.0, 40.0, 20.0).unwrap()
    }

    fn t() -> Targets {
        Targets::new(targets()).unwrap()
    }

    #[test]
    fn score_examples() {
        let a = Nutrients::new(300.0, 30.0, 20.0, 10.0).unwrap();
        let (dev, s) = score(&(a + a), &t());
        assert!(dev.iter().all(|d| d.ratio() == 0.0));
        assert_eq!(s.numerator, 0);

        let (dev, s) = score(&Nutrients::ZERO, &t());
        assert!(dev.iter().all(|d| d.ratio() == 1.0));
        assert_eq!(s.as_f64(), 4.0);
        assert_eq!(s.numerator, 4 * s.denominator);

        let single = Nutrients::new(660.0, 60.0, 40.0, 20.0).unwrap();
        let (dev, s) = score(&single, &t());
        assert_eq!(dev[0].ratio(), 0.1);
        assert_eq!(s.numerator * 10, s.denominator);
        assert_eq!(dev[0].signed_percent_tenths(), 100);
    }

    #[test]
    fn feasibility_boundary_is_inclusive() {
        let cfg = SolverConfig::default();
        let a = Nutrients::new(300.0, 30.0, 20.0, 10.0).unwrap();
        assert!(feasible(&(a + a), &t(), &cfg));
        assert!(feasible(&Nutrients::new(660.0, 60.0, 40.0, 20.0).unwrap(), &t(), &cfg));
        assert!(!feasible(&Nutrients::new(666.0, 60.0, 40.0, 20.0).unwrap(), &t(), &cfg));
        assert!(feasible(&Nutrients::new(540.0, 54.0, 36.0, 18.0).unwrap(), &t(), &cfg));
        assert!(!feasible(&Nutrients::new(539.9, 54.0, 36.0, 18.0).unwrap(), &t(), &cfg));
    }

    #[test]
    fn exact_pair_ranks_first() {
        let dishes = vec![
            dish(1, "a", [300.0, 30.0, 20.0, 10.0]),
            dish(2, "b", [300.0, 30.0, 20.0, 10.0]),
            dish(3, "c", [610.0, 61.0, 40.0, 20.0]),
            dish(4, "d", [100.0, 5.0, 5.0, 2.0]),
        ];
        let r = solve(&dishes, &targets(), &SolverConfig::default()).unwrap();
        let best = r.best().unwrap();
        assert_eq!(best.score.numerator, 0);
        assert_eq!(best.dish_ids, vec![DishId(1), DishId(2)]);
    }

    #[test]
    fn infeasible_by_construction() {
        let dishes: Vec<Dish> = (0..6)
            .map(|i| dish(i, &format!("big{i}"), [700.0 + i as f64, 60.0, 40.0, 20.0]))
            .collect();
        for k in 1..=3 {
            let cfg = SolverConfig { max_dishes: k, ..SolverConfig::default() };
            let r = solve(&dishes, &targets(), &cfg).unwrap();
            assert!(r.is_infeasible());
            assert!(r.solutions.is_empty());
        }
    }

    #[test]
    fn oracle_guards() {
        let many: Vec<Dish> = (0..31).map(|i| dish(i, &format!("d{i}"), [10.0, 1.0, 1.0, 1.0])).collect();
        assert_eq!(
            brute_force_oracle(&many, &targets(), &SolverConfig::default()).unwrap_err(),
            SolverError::TooLarge { n: 31, limit: 30 }
        );
        let r = brute_force_oracle(&[], &targets(), &SolverConfig::default()).unwrap();
        assert!(r.is_infeasible());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().with_threshold(0.0).is_err());
        assert!(SolverConfig::default().with_threshold(1.0).is_err());
        assert_eq!(SolverConfig::default().with_threshold(0.15).unwrap().threshold_bp, 1500);
        let bad = SolverConfig { max_dishes: 0, ..SolverConfig::default() };
        assert!(solve(&[], &targets(), &bad).is_err());
        let zero = Nutrients::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            solve(&[], &zero, &SolverConfig::default()).unwrap_err(),
            SolverError::NonPositiveTarget(NutrientKind::Calories)
        );
    }

    #[test]
    fn grouping_examples() {
        let cfg = SolverConfig::default();
        let twins = vec![dish(1, "x", [300.0, 30.0, 20.0, 10.0]), dish(2, "y", [300.0, 30.0, 20.0, 10.0])];
        let classes = prune_groups(&twins, &cfg);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].len(), 2);
        assert_eq!(classes[0].representative, 0);

        let near = vec![dish(1, "p", [450.0, 55.0, 12.0, 20.0]), dish(2, "q", [460.0, 57.0, 13.0, 21.0])];
        // floor(x / bin) per component, computed independently
        let bins = [25.0, 5.0, 5.0, 5.0];
        let q = |v: [f64; 4]| -> [i64; 4] { std::array::from_fn(|i| (v[i] / bins[i]).floor() as i64) };
        assert_eq!(q([450.0, 55.0, 12.0, 20.0]), q([460.0, 57.0, 13.0, 21.0]));
        assert_eq!(prune_groups(&near, &cfg).len(), 1);
        assert_eq!(prune_groups(&near, &cfg)[0].key, q([450.0, 55.0, 12.0, 20.0]));

        let unit = SolverConfig { group_bins: Nutrients::from_tenths([1, 1, 1, 1]), ..cfg };
        assert_eq!(prune_groups(&near, &unit).len(), 2);
    }

    #[test]
    fn deviation_percent_rounding() {
        let d = |diff: i64, target: i64| Deviation { difference: Tenths(diff), target: Tenths(target) };
        assert_eq!(d(-600, 6000).signed_percent_tenths(), -100);
        assert_eq!(d(1, 6000).signed_percent_tenths(), 0);
        assert_eq!(d(3, 600).signed_percent_tenths(), 5);
        assert_eq!(d(-3, 600).signed_percent_tenths(), -5);
    }
}
