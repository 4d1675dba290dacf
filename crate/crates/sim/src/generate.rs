//! Random smooth global trajectories and fusion trials built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ras_core::trajectory::{build_min_jerk, check_feasible_refined};
use ras_core::{GlobalPoint, GlobalTrajectory, QuadState, Vec3};

use crate::error::{SimError, SimResult};
use crate::scenario::{ObstacleSpec, Scenario, ShapeKind};

type V = Vec3<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    /// Waypoints including both ends.
    pub waypoints: usize,
    /// Nominal speed through interior waypoints (m/s).
    pub speed: f64,
    /// Sample spacing of the output (s).
    pub step: f64,
    pub x_range: (f64, f64),
    /// Waypoint `y` is drawn from `[-lateral, lateral]`.
    pub lateral: f64,
    pub z_range: (f64, f64),
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            waypoints: 5,
            speed: 1.5,
            step: 0.05,
            x_range: (-6.0, 6.0),
            lateral: 2.0,
            z_range: (0.8, 1.6),
            v_max: 3.0,
            a_max: 4.0,
        }
    }
}

/// Min-jerk pieces through random waypoints spread along `x`, at rest at
/// both ends and at `speed` through interior waypoints. Piece durations are
/// stretched until every piece respects the limits.
pub fn random_global(seed: u64, cfg: &PathConfig) -> SimResult<GlobalTrajectory<f64>> {
    if cfg.waypoints < 2 || !(cfg.speed > 0.0 && cfg.step > 0.0) {
        return Err(SimError::Config("path needs >= 2 waypoints and positive speed and step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.waypoints;
    let wps: Vec<V> = (0..n)
        .map(|i| {
            let x = cfg.x_range.0 + (cfg.x_range.1 - cfg.x_range.0) * i as f64 / (n - 1) as f64;
            V::new(x, rng.random_range(-cfg.lateral..=cfg.lateral), rng.random_range(cfg.z_range.0..=cfg.z_range.1))
        })
        .collect();
    let states: Vec<QuadState<f64>> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return QuadState::at_rest(wps[i]);
            }
            let tangent = (wps[i + 1] - wps[i - 1]).try_normalize(1e-9).unwrap_or_else(V::unit_x);
            QuadState::new(wps[i], tangent * cfg.speed, V::zeros())
        })
        .collect();

    let mut points = Vec::new();
    let mut t0 = 0.0;
    for i in 0..n - 1 {
        let mut duration = 1.5 * wps[i].distance(&wps[i + 1]) / cfg.speed;
        let seg = loop {
            let seg = build_min_jerk(&states[i], &states[i + 1], duration)?;
            if check_feasible_refined(&seg, cfg.v_max, cfg.a_max) {
                break seg;
            }
            duration *= 1.2;
        };
        let steps = (duration / cfg.step).ceil() as usize;
        for k in 0..steps {
            let tau = (k as f64 * cfg.step).min(duration);
            points.push(point(t0 + tau, &seg.state_at(tau)));
        }
        t0 += duration;
    }
    points.push(point(t0, &states[n - 1]));
    Ok(GlobalTrajectory::new(points)?)
}

fn point(time: f64, s: &QuadState<f64>) -> GlobalPoint<f64> {
    GlobalPoint { time, position: s.position, velocity: s.velocity, acceleration: s.acceleration }
}

/// A fusion scenario over `random_global(seed)` with a static sphere of
/// `radius` sitting on the path at its temporal midpoint.
pub fn fusion_trial(seed: u64, radius: f64, cfg: &PathConfig) -> SimResult<Scenario> {
    let g = random_global(seed, cfg)?;
    let mid = g.state_at(0.5 * (g.start_time() + g.end_time())).position;
    let mut s = Scenario {
        name: format!("fusion_trial_{seed}"),
        duration: 4.0 * (g.end_time() - g.start_time()),
        seeds: vec![seed],
        ..Scenario::default()
    };
    s.vehicle.goal = None;
    s.vehicle.start = g.points()[0].position;
    s.obstacles.push(ObstacleSpec {
        shape: ShapeKind::Sphere,
        center: mid,
        radius: Some(radius),
        size: None,
        velocity: None,
        waypoints: Vec::new(),
        speed: 0.0,
        repeat: false,
        start_delay: 0.0,
        delay_jitter: 0.0,
    });
    s.global = Some(g);
    s.validate()?;
    Ok(s)
}
