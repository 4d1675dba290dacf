use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LatencyStats {
    pub count: usize,
    pub min: u64,
    pub median: u64,
    pub p99: u64,
    pub max: u64,
}

impl LatencyStats {
    /// Nearest-rank statistics; all zero for no samples.
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_unstable();
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self { count: v.len(), min: v[0], median: rank(0.5), p99: rank(0.99), max: v[v.len() - 1] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub collision_count: usize,
    pub freezing_count: usize,
    pub flight_time: f64,
    pub reached_goal: bool,
    /// Smallest body-to-obstacle distance seen (-1 without obstacles).
    pub min_clearance: f64,
    pub latency: Option<LatencyStats>,
}

impl RunMetrics {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "collision_count = {}", self.collision_count);
        let _ = writeln!(s, "freezing_count = {}", self.freezing_count);
        let _ = writeln!(s, "flight_time = {:.3}", self.flight_time);
        let _ = writeln!(s, "reached_goal = {}", self.reached_goal);
        let _ = writeln!(s, "min_clearance = {:.6}", self.min_clearance);
        if let Some(l) = &self.latency {
            let _ = writeln!(s, "latency_cycles = {}", l.count);
            let _ = writeln!(s, "latency_min_us = {}", l.min);
            let _ = writeln!(s, "latency_median_us = {}", l.median);
            let _ = writeln!(s, "latency_p99_us = {}", l.p99);
            let _ = writeln!(s, "latency_max_us = {}", l.max);
        }
        s
    }
}

/// Totals of one method over a seed set, one row of a comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub collisions: usize,
    pub freezes: usize,
    pub reached: usize,
    pub mean_flight_time: f64,
}

impl MethodSummary {
    pub fn from_runs(method: &str, runs: &[RunMetrics]) -> Self {
        let n = runs.len();
        let total: f64 = runs.iter().map(|m| m.flight_time).sum();
        Self {
            method: method.to_string(),
            runs: n,
            collisions: runs.iter().map(|m| m.collision_count).sum(),
            freezes: runs.iter().map(|m| m.freezing_count).sum(),
            reached: runs.iter().filter(|m| m.reached_goal).count(),
            mean_flight_time: if n == 0 { 0.0 } else { total / n as f64 },
        }
    }
}

/// Aligned text table with collision, freezing and flight-time columns.
pub fn comparison_table(scenario: &str, rows: &[MethodSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {scenario}");
    let _ = writeln!(
        s,
        "{:<16} {:>5} {:>10} {:>9} {:>8} {:>16}",
        "method", "runs", "collisions", "freezes", "reached", "avg_flight_time"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>5} {:>10} {:>9} {:>8} {:>16.3}",
            r.method, r.runs, r.collisions, r.freezes, r.reached, r.mean_flight_time
        );
    }
    s
}
