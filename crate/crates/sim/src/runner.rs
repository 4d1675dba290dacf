//! Closed-loop runs: sense, ingest, plan, follow.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ras_core::planner::braking_segment;
use ras_core::{
    Aabb, Command, Direction, GoalMode, LocalPlanner, Mode, ParticleField, PiecewiseTrajectory, PlanRequest,
    PlanResult, PredictionCache, QuadState, Supervisor, Vec3,
};

use crate::error::{SimError, SimResult};
use crate::metrics::{LatencyStats, RunMetrics};
use crate::scenario::{GoalSpec, Scenario};
use crate::sensor::Sensor;
use crate::world::World;

type V = Vec3<f64>;

/// Planner variant under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Both phases, predicted particle positions.
    Ras,
    /// Phase 1 risk only.
    OnePhase,
    /// Both phases, every particle queried at its snapshot position.
    NoPrediction,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ras, Method::OnePhase, Method::NoPrediction];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ras => "ras",
            Method::OnePhase => "one_phase",
            Method::NoPrediction => "no_prediction",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SimError;
    fn from_str(s: &str) -> SimResult<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown method '{s}' (expected ras, one_phase or no_prediction)")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Write wall-clock planner latency into the trace and metrics. Off by
    /// default so outputs are byte-deterministic.
    pub record_latency: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub position: V,
    pub velocity: V,
    pub mode: &'static str,
    pub risk1: f64,
    pub cost: f64,
    pub collision: bool,
    pub latency_us: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeEvent {
    pub time: f64,
    pub distance: f64,
    pub point: V,
    pub global_index: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub rows: Vec<TraceRow>,
    /// Supervisor mode switches, starting with the initial mode.
    pub transitions: Vec<(f64, Mode)>,
    pub merges: Vec<MergeEvent>,
    /// Largest commanded speed and acceleration magnitude over all ticks.
    pub max_speed: f64,
    pub max_accel: f64,
    /// Largest G² junction mismatch over all found plans.
    pub max_junction_residual: f64,
    pub erase_events: usize,
    pub final_position: V,
}

pub const TRACE_HEADER: &str = "t,x,y,z,vx,vy,vz,mode,risk1,cost,collision_flag,latency_us";

impl RunOutput {
    pub fn trace_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 96);
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{},{}",
                r.t,
                r.position.x,
                r.position.y,
                r.position.z,
                r.velocity.x,
                r.velocity.y,
                r.velocity.z,
                r.mode,
                r.risk1,
                r.cost,
                u8::from(r.collision),
                r.latency_us
            );
        }
        s
    }
}

#[allow(clippy::large_enum_variant)]
enum Controller {
    Local { planner: LocalPlanner<f64>, plan: Option<PlanResult<f64>>, goal: V, theta_last: Direction<f64> },
    Fused(Box<Supervisor<f64>>),
}

/// What the vehicle currently flies.
enum Active {
    Hold(QuadState<f64>),
    Cmd(Command<f64>),
}

struct StepOutcome {
    mode: &'static str,
    risk1: f64,
    cost: f64,
    frozen: bool,
    junction_residual: f64,
    erase_events: usize,
    merge: Option<MergeEvent>,
}

/// `true` on ticks where `floor(i * rate / physics_rate)` increments.
fn is_rate_tick(i: u64, rate: f64, physics_rate: f64) -> bool {
    let k = |j: u64| (j as f64 * rate / physics_rate + 1e-9).floor();
    i == 0 || k(i) > k(i - 1)
}

fn local_map(center: &V, half: &V) -> Aabb<f64> {
    Aabb::new(*center - *half, *center + *half)
}

fn first_heading(goal: &GoalSpec, start: &V, s: &Scenario) -> V {
    let raw = match goal {
        GoalSpec::Position(p) => *p - *start,
        GoalSpec::Direction { direction, .. } => *direction,
        GoalSpec::Global => s
            .global
            .as_ref()
            .and_then(|g| g.points().iter().map(|p| p.position - *start).find(|d| d.norm() > 1e-6))
            .unwrap_or_else(V::unit_x),
    };
    raw.try_normalize(1e-9).unwrap_or_else(V::unit_x)
}

/// Runs one scenario with one method and seed.
pub fn run(s: &Scenario, method: Method, seed: u64, opts: RunOptions) -> SimResult<RunOutput> {
    s.validate()?;
    let goal = s.goal()?;
    if goal == GoalSpec::Global && s.global.is_none() {
        return Err(SimError::Config("global trajectory referenced but not loaded".into()));
    }
    let mut planner_cfg = s.planner.clone();
    match method {
        Method::Ras => {}
        Method::OnePhase => planner_cfg.use_phase2_risk = false,
        Method::NoPrediction => planner_cfg.predict = false,
    }
    planner_cfg.goal_mode =
        if matches!(goal, GoalSpec::Direction { .. }) { GoalMode::GoalDirection } else { GoalMode::GoalPosition };
    let planner = LocalPlanner::new(planner_cfg, s.sampler.clone(), s.risk)?;

    let mut state = match &s.global {
        Some(g) => g.points()[0].state(),
        None => QuadState::new(s.vehicle.start, s.vehicle.start_velocity, V::zeros()),
    };
    let start = state.position;
    let mut forward = first_heading(&goal, &start, s);
    let mut controller = match &s.global {
        Some(g) => Controller::Fused(Box::new(Supervisor::new(planner, s.fusion.clone(), g.clone(), 0.0)?)),
        None => {
            let planner_goal = match goal {
                GoalSpec::Position(p) => p,
                GoalSpec::Direction { direction, .. } => direction,
                GoalSpec::Global => unreachable!("checked above"),
            };
            Controller::Local { planner, plan: None, goal: planner_goal, theta_last: Direction::from_vector(&forward) }
        }
    };
    let mut active = match controller {
        Controller::Fused(_) => Active::Cmd(Command::Global { offset: 0.0 }),
        Controller::Local { .. } => Active::Hold(state),
    };

    let mut world = World::from_scenario(s, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensor = Sensor::new(&s.sensor);
    let mut field = ParticleField::empty(local_map(&start, &s.map.half_extent), s.map.bin_size, 0.0)?;

    let dt = 1.0 / s.physics_rate;
    let n_ticks = (s.duration * s.physics_rate).ceil() as u64;
    let mut rows = Vec::with_capacity(n_ticks as usize + 1);
    let mut merges = Vec::new();
    let mut latencies = Vec::new();
    let (mut collisions, mut freezes) = (0usize, 0usize);
    let (mut prev_collided, mut frozen, mut frozen_since) = (false, false, 0.0);
    let (mut mode, mut risk1, mut cost) = (Mode::FollowLocal.as_str(), 0.0, 0.0);
    if matches!(controller, Controller::Fused(_)) {
        mode = Mode::FollowGlobal.as_str();
    }
    let (mut max_speed, mut max_accel, mut max_res, mut erases) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let mut min_clearance = f64::INFINITY;
    let mut reached = false;
    let mut t = 0.0;

    for i in 0..=n_ticks {
        t = i as f64 * dt;
        world.step_to(t);
        state = match &active {
            Active::Hold(h) => *h,
            Active::Cmd(Command::Trajectory(tr)) => tr.eval_clamped(t).unwrap_or(state),
            Active::Cmd(Command::Global { offset }) => global_of(&controller).state_at(t - offset),
        };

        let collided = world.collision(&state.position, &s.vehicle.body);
        min_clearance = min_clearance.min(world.clearance(&state.position, &s.vehicle.body));
        let row_state = state;
        if let Some(k) = collided {
            if !prev_collided {
                collisions += 1;
            }
            let pushed = state.position + world.obstacles[k].escape_direction(&state.position);
            let b = &world.bounds;
            let clamped = V::new(
                pushed.x.clamp(b.min.x, b.max.x),
                pushed.y.clamp(b.min.y, b.max.y),
                pushed.z.clamp(b.min.z, b.max.z),
            );
            state = QuadState::at_rest(clamped);
            active = Active::Hold(state);
            match &mut controller {
                Controller::Local { plan, .. } => *plan = None,
                Controller::Fused(sup) => sup.interrupt(t),
            }
        }
        prev_collided = collided.is_some();

        if is_rate_tick(i, s.sensor.rate, s.physics_rate) {
            if let Some(v) = state.velocity.try_normalize(0.1) {
                forward = v;
            }
            let (pts, vels) = sensor.sense(&world, &state.position, &forward);
            field = field
                .advance(t, local_map(&state.position, &s.map.half_extent))?
                .decay_and_cull(s.map.decay, s.map.min_weight)?
                .ingest_point_cloud(&pts, &vels, &s.prediction, &mut rng)?;
        }

        let mut latency_us = 0;
        if is_rate_tick(i, s.planner.replan_rate, s.physics_rate) {
            let clock = Instant::now();
            let (out, next) = control_step(&mut controller, &field, t, &state);
            let elapsed = clock.elapsed().as_micros() as u64;
            if opts.record_latency {
                latency_us = elapsed;
                latencies.push(elapsed);
            }
            active = next;
            if out.frozen && !frozen {
                freezes += 1;
                frozen_since = t;
            }
            frozen = out.frozen;
            mode = out.mode;
            risk1 = out.risk1;
            cost = out.cost;
            max_res = max_res.max(out.junction_residual);
            erases += out.erase_events;
            merges.extend(out.merge);
        }

        max_speed = max_speed.max(row_state.velocity.norm());
        max_accel = max_accel.max(row_state.acceleration.norm());
        rows.push(TraceRow {
            t,
            position: row_state.position,
            velocity: row_state.velocity,
            mode,
            risk1,
            cost,
            collision: collided.is_some(),
            latency_us,
        });

        reached = match &goal {
            GoalSpec::Position(p) => state.position.distance(p) <= s.vehicle.goal_tolerance,
            GoalSpec::Direction { direction, distance } => (state.position - start).dot(direction) >= *distance,
            GoalSpec::Global => match &controller {
                Controller::Fused(sup) => {
                    let g = sup.global();
                    sup.mode() == Mode::FollowGlobal
                        && state.position.distance(&g.points()[g.len() - 1].position) <= s.vehicle.goal_tolerance
                }
                Controller::Local { .. } => false,
            },
        };
        if reached || (frozen && t - frozen_since >= s.vehicle.freeze_timeout) {
            break;
        }
    }

    let transitions = match &controller {
        Controller::Fused(sup) => sup.transitions().to_vec(),
        Controller::Local { .. } => Vec::new(),
    };
    let metrics = RunMetrics {
        collision_count: collisions,
        freezing_count: freezes,
        flight_time: t,
        reached_goal: reached,
        min_clearance: if min_clearance.is_finite() { min_clearance } else { -1.0 },
        latency: opts.record_latency.then(|| LatencyStats::from_samples(&latencies)),
    };
    Ok(RunOutput {
        metrics,
        rows,
        transitions,
        merges,
        max_speed,
        max_accel,
        max_junction_residual: max_res,
        erase_events: erases,
        final_position: state.position,
    })
}

fn global_of(c: &Controller) -> &ras_core::GlobalTrajectory<f64> {
    match c {
        Controller::Fused(sup) => sup.global(),
        Controller::Local { .. } => unreachable!("local control never issues global commands"),
    }
}

fn control_step(
    c: &mut Controller,
    field: &ParticleField<f64>,
    t: f64,
    state: &QuadState<f64>,
) -> (StepOutcome, Active) {
    match c {
        Controller::Local { planner, plan, goal, theta_last } => {
            let cache = PredictionCache::new(field);
            let res = match plan.as_ref().filter(|p| p.is_found()) {
                Some(prev) => planner.replan_tick_cached(prev, &cache, t, goal, None),
                None => {
                    let req = PlanRequest { start: *state, start_time: t, goal: *goal, theta_last: *theta_last };
                    planner.plan_cached(&cache, &req, None)
                }
            };
            let erase_events = res.diagnostics.erase_events;
            if res.is_found() {
                *theta_last = res.last_direction().unwrap_or(*theta_last);
                let out = StepOutcome {
                    mode: Mode::FollowLocal.as_str(),
                    risk1: res.pieces[0].risk1,
                    cost: res.pieces[0].cost.total,
                    frozen: false,
                    junction_residual: res.trajectory.max_junction_residual(),
                    erase_events,
                    merge: None,
                };
                let next = Active::Cmd(Command::Trajectory(res.trajectory.clone()));
                *plan = Some(res);
                (out, next)
            } else {
                *plan = None;
                let brake = braking_segment(state, planner.sampler.v_max, planner.sampler.a_max);
                let out = StepOutcome {
                    mode: "frozen",
                    risk1: 0.0,
                    cost: 0.0,
                    frozen: true,
                    junction_residual: 0.0,
                    erase_events,
                    merge: None,
                };
                (out, Active::Cmd(Command::Trajectory(PiecewiseTrajectory::new(vec![brake], t))))
            }
        }
        Controller::Fused(sup) => {
            let out = sup.step(t, state, field);
            let junction_residual = match &out.command {
                Command::Trajectory(tr) => tr.max_junction_residual(),
                Command::Global { .. } => 0.0,
            };
            let merge = out.merge.as_ref().map(|m| MergeEvent {
                time: t,
                distance: m.distance,
                point: m.point,
                global_index: m.global_index,
            });
            let step = StepOutcome {
                mode: if out.frozen { "frozen" } else { out.mode.as_str() },
                risk1: out.risk,
                cost: out.cost,
                frozen: out.frozen,
                junction_residual,
                erase_events: out.diagnostics.map_or(0, |d| d.erase_events),
                merge,
            };
            (step, Active::Cmd(out.command))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_ticks_hit_the_requested_frequency() {
        let n = (0..500).filter(|i| is_rate_tick(*i, 20.0, 50.0)).count();
        assert_eq!(n, 200);
        let n = (0..500).filter(|i| is_rate_tick(*i, 10.0, 50.0)).count();
        assert_eq!(n, 100);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("fast".parse::<Method>().is_err());
    }
}
