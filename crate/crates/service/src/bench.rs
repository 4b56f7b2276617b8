//! Solver scaling benchmark and oracle cross-check.

use std::time::Instant;

use advisor_core::solver::{brute_force_oracle, solve, SolverConfig, SolverError};
use advisor_core::synth;
use advisor_core::timing::BenchRow;

/// Published single-solve times (seconds) for N = 50..250, K = 3. Kept only
/// to compare curve shape; the hardware and implementation differ.
pub const REFERENCE_SECONDS: [(usize, f64); 5] = [(50, 0.25), (100, 1.46), (150, 3.54), (200, 6.37), (250, 8.63)];

/// Times one solve per (size, repetition). Repetition `r` draws its dish
/// pool from seed `seed + r`; every size uses a prefix of that pool, so a
/// larger N always contains the smaller instance.
pub fn run_bench(sizes: &[usize], k: usize, reps: usize, seed: u64) -> Result<Vec<BenchRow>, SolverError> {
    let config = SolverConfig { max_dishes: k, ..SolverConfig::default() };
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let targets = synth::bench_targets();
    let pools: Vec<_> = (0..reps as u64).map(|r| synth::random_dishes(seed + r, largest)).collect();
    let mut rows = Vec::new();
    for &n in sizes {
        for pool in &pools {
            let start = Instant::now();
            let report = solve(&pool[..n], &targets, &config)?;
            let elapsed = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                n,
                k,
                elapsed_seconds: elapsed,
                explored_nodes: report.explored_nodes,
                pruned_nodes: report.pruned_nodes,
                best_score: report.best().map(|s| s.score.as_f64()),
            });
        }
    }
    Ok(rows)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty(), "median of nothing");
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Median elapsed seconds per size, in the order sizes first appear.
pub fn medians(rows: &[BenchRow]) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    sizes
        .into_iter()
        .map(|n| (n, median(rows.iter().filter(|r| r.n == n).map(|r| r.elapsed_seconds).collect())))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySummary {
    pub instances: usize,
    pub solved: usize,
    pub mismatches: Vec<u64>,
}

/// Compares the solver's full ranked list with the exhaustive oracle on
/// seeded instances of 1..=max_n dishes.
pub fn verify(instances: usize, max_n: usize, k: usize, seed: u64) -> Result<VerifySummary, SolverError> {
    let config = SolverConfig { max_dishes: k, max_solutions: usize::MAX, ..SolverConfig::default() };
    let mut summary = VerifySummary { instances, solved: 0, mismatches: vec![] };
    for i in 0..instances as u64 {
        let s = seed.wrapping_add(i);
        let n = 1 + (s as usize % max_n);
        let (dishes, targets) = synth::reachable_instance(s, n);
        let fast = solve(&dishes, &targets, &config)?;
        let slow = brute_force_oracle(&dishes, &targets, &config)?;
        if !fast.solutions.is_empty() {
            summary.solved += 1;
        }
        if fast.solutions != slow.solutions {
            summary.mismatches.push(s);
        }
    }
    Ok(summary)
}
