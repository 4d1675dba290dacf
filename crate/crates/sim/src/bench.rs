//! Planner latency benchmark on synthetic particle fields.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ras_core::{
    Aabb, Direction, GoalMode, LocalPlanner, ParticleField, PlanRequest, QuadState, Vec3, WeightedParticle,
};

use crate::error::{SimError, SimResult};
use crate::metrics::LatencyStats;
use crate::scenario::Scenario;

type V = Vec3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub particles: usize,
    pub cycles: usize,
    /// Distinct field snapshots the cycles rotate through.
    pub snapshots: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { particles: 5000, cycles: 200, snapshots: 4, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub stats: LatencyStats,
    /// Grid index of the first chosen piece per cycle (`None` when frozen).
    pub selections: Vec<Option<usize>>,
    pub particles: usize,
    pub fan: (usize, usize),
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let frozen = self.selections.iter().filter(|s| s.is_none()).count();
        format!(
            "particles = {}\nfan = {}x{}\ncycles = {}\nfrozen_cycles = {}\nmin_us = {}\nmedian_us = {}\np99_us = {}\nmax_us = {}\n",
            self.particles,
            self.fan.0,
            self.fan.1,
            self.stats.count,
            frozen,
            self.stats.min,
            self.stats.median,
            self.stats.p99,
            self.stats.max
        )
    }
}

/// Clustered field of `n` particles ahead of the origin; half the clusters
/// move. Cluster gaps leave the planner free corridors.
pub fn synthetic_field(n: usize, seed: u64) -> SimResult<ParticleField<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = 10;
    let bounds = Aabb::new(V::new(-7.0, -7.0, -2.0), V::new(7.0, 7.0, 4.0));
    let centers: Vec<(V, V, f64)> = (0..clusters)
        .map(|k| {
            let c = V::new(rng.random_range(1.5..7.0), rng.random_range(-5.0..5.0), rng.random_range(0.3..2.2));
            let v = if k % 2 == 0 {
                V::zeros()
            } else {
                V::new(rng.random_range(-1.0..1.0), rng.random_range(-1.5..1.5), 0.0)
            };
            (c, v, rng.random_range(0.25..0.5))
        })
        .collect();
    let w = 0.25;
    let particles = (0..n)
        .map(|i| {
            let (c, v, r) = centers[i % clusters];
            let off = V::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
            if v == V::zeros() {
                WeightedParticle::new_static(c + off, w)
            } else {
                WeightedParticle::new_dynamic(c + off, v, w)
            }
        })
        .collect();
    Ok(ParticleField::from_particles(particles, bounds, ParticleField::<f64>::DEFAULT_BIN_SIZE, 0.0)?)
}

/// Times `cfg.cycles` full plans from a moving start state over fixed
/// snapshots, using the scenario's planner, sampler and risk settings.
pub fn bench(s: &Scenario, cfg: &BenchConfig) -> SimResult<BenchReport> {
    if cfg.cycles == 0 || cfg.snapshots == 0 {
        return Err(SimError::Config("bench needs cycles >= 1 and snapshots >= 1".into()));
    }
    let mut planner_cfg = s.planner.clone();
    planner_cfg.goal_mode = GoalMode::GoalPosition;
    let planner = LocalPlanner::new(planner_cfg, s.sampler.clone(), s.risk)?;
    let fields = (0..cfg.snapshots as u64)
        .map(|k| synthetic_field(cfg.particles, cfg.seed.wrapping_add(k)))
        .collect::<SimResult<Vec<_>>>()?;
    let start = QuadState::new(V::new(0.0, 0.0, 1.0), V::new(2.0, 0.0, 0.0), V::zeros());
    let req =
        PlanRequest { start, start_time: 0.0, goal: V::new(10.0, 0.0, 1.0), theta_last: Direction::new(0.0, 0.0) };
    let mut samples = Vec::with_capacity(cfg.cycles);
    let mut selections = Vec::with_capacity(cfg.cycles);
    for i in 0..cfg.cycles {
        let field = &fields[i % fields.len()];
        let clock = Instant::now();
        let res = planner.plan(field, &req, None);
        samples.push(clock.elapsed().as_micros() as u64);
        selections.push(res.pieces.first().map(|c| c.primitive.grid_index));
    }
    Ok(BenchReport {
        stats: LatencyStats::from_samples(&samples),
        selections,
        particles: cfg.particles,
        fan: (s.sampler.n_azimuth, s.sampler.n_elevation),
    })
}
