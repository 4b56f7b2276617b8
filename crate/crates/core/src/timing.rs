//! Per-stage turn timings and the solver benchmark CSV format.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    IntentRecognition,
    /// Parameter supervision and note composition.
    InnerSpeech,
    QueryGeneration,
    QueryExecution,
    Solver,
    QueryExplanation,
    SolverExplanation,
    OuterSpeech,
    TotalTurn,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("string"))
    }
}

fn seconds<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageTiming {
    pub stage: Stage,
    #[serde(rename = "elapsed_seconds", serialize_with = "seconds")]
    pub elapsed: Duration,
}

/// Shortest reported duration. Coarse clocks can read zero for a stage that
/// did run; a stage that ran is never reported as taking no time.
pub const TIMING_FLOOR: Duration = Duration::from_nanos(1);

/// Accumulates time per stage over one turn.
#[derive(Debug)]
pub struct TurnClock {
    start: Instant,
    stages: BTreeMap<Stage, Duration>,
}

impl Default for TurnClock {
    fn default() -> Self {
        Self::start()
    }
}

impl TurnClock {
    pub fn start() -> Self {
        TurnClock { start: Instant::now(), stages: BTreeMap::new() }
    }

    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.stages.entry(stage).or_default() += t.elapsed();
        out
    }

    /// One entry per executed stage, then `TotalTurn`.
    pub fn finish(self) -> Vec<StageTiming> {
        let total = self.start.elapsed();
        let mut out: Vec<StageTiming> = self
            .stages
            .into_iter()
            .map(|(stage, d)| StageTiming { stage, elapsed: d.max(TIMING_FLOOR) })
            .collect();
        let longest = out.iter().map(|t| t.elapsed).max().unwrap_or(TIMING_FLOOR);
        out.push(StageTiming { stage: Stage::TotalTurn, elapsed: total.max(longest) });
        out
    }
}

pub const BENCH_CSV_HEADER: &str = "N,K,elapsed_seconds,explored_nodes,pruned_nodes,best_score";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub elapsed_seconds: f64,
    pub explored_nodes: u64,
    pub pruned_nodes: u64,
    /// Empty when no meal was feasible.
    pub best_score: Option<f64>,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.6},{},{},{}",
            self.n,
            self.k,
            self.elapsed_seconds,
            self.explored_nodes,
            self.pruned_nodes,
            self.best_score.map(|s| format!("{s:.6}")).unwrap_or_default()
        )
    }
}

/// Parses and checks a benchmark CSV: exact header, six columns, typed
/// non-negative fields.
pub fn validate_bench_csv(text: &str) -> Result<Vec<BenchRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == BENCH_CSV_HEADER => {}
        other => return Err(format!("bad header {other:?}")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let at = |m: &str| format!("row {}: {m}", i + 1);
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(at(&format!("expected 6 columns, found {}", cols.len())));
        }
        let int = |s: &str, name: &str| s.parse::<u64>().map_err(|_| at(&format!("{name} is not an integer")));
        let elapsed: f64 = cols[2].parse().map_err(|_| at("elapsed_seconds is not a number"))?;
        if !(elapsed.is_finite() && elapsed >= 0.0) {
            return Err(at("elapsed_seconds out of range"));
        }
        let best_score = match cols[5] {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| at("best_score is not a non-negative number"))?,
            ),
        };
        rows.push(BenchRow {
            n: int(cols[0], "N")? as usize,
            k: int(cols[1], "K")? as usize,
            elapsed_seconds: elapsed,
            explored_nodes: int(cols[3], "explored_nodes")?,
            pruned_nodes: int(cols[4], "pruned_nodes")?,
            best_score,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_floors_and_totals() {
        let mut c = TurnClock::start();
        c.time(Stage::IntentRecognition, || ());
        c.time(Stage::Solver, || std::thread::sleep(Duration::from_millis(2)));
        c.time(Stage::IntentRecognition, || ());
        let t = c.finish();
        assert_eq!(t.iter().map(|s| s.stage).collect::<Vec<_>>(), vec![Stage::IntentRecognition, Stage::Solver, Stage::TotalTurn]);
        assert!(t.iter().all(|s| s.elapsed >= TIMING_FLOOR));
        assert!(t[2].elapsed >= t[1].elapsed);
    }

    #[test]
    fn csv_round_trip_and_rejections() {
        let row = BenchRow { n: 50, k: 3, elapsed_seconds: 0.25, explored_nodes: 10, pruned_nodes: 2, best_score: None };
        let text = format!("{BENCH_CSV_HEADER}\n{}\n", row.to_csv());
        assert_eq!(validate_bench_csv(&text).unwrap(), vec![row]);
        assert!(validate_bench_csv("N,K\n").is_err());
        assert!(validate_bench_csv(&format!("{BENCH_CSV_HEADER}\n1,3,x,1,1,\n")).is_err());
        assert!(validate_bench_csv(&format!("{BENCH_CSV_HEADER}\n1,3,0.1,1,1\n")).is_err());
    }

    #[test]
    fn stage_names() {
        assert_eq!(Stage::TotalTurn.to_string(), "total_turn");
    }
}
