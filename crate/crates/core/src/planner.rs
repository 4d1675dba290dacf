//! K-piece backtracking local planner.
//!
//! For each piece a fan of two-phase primitives is generated from the
//! previous piece's junction state (a coarse fan for the first piece). A
//! primitive is admitted only when its Phase-1 risk is below `delta`; the
//! admitted ones are ranked by
//! `lambda1 (risk1 + risk2) + lambda2 |p(tp) - goal| + lambda3 (d_az^2 + d_el^2)`.
//! When a piece has no admissible candidate the previous piece's choice is
//! erased and the next best one is tried. Phase 1 of every chosen primitive
//! becomes one piece of the output trajectory.

use std::cmp::Ordering;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::particles::{OccupancyQuery, ParticleField, PredictionCache};
use crate::risk::{build_corridor, corridor_risk, is_safe, RiskConfig};
use crate::sampler::{primitive_fan, Direction, MotionPrimitive, SamplerConfig};
use crate::scalar::{wrap_angle, Scalar};
use crate::trajectory::{build_min_jerk, check_feasible_refined, PiecewiseTrajectory, QuadState, QuinticSegment};
use crate::vec3::Vec3;

/// Speed (m/s) above which the fan is centred on the velocity direction.
pub const HEADING_SPEED: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    GoalPosition,
    GoalDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig<T> {
    /// Number of pieces K.
    pub pieces: usize,
    /// Risk threshold; Phase 1 must satisfy `risk < delta`.
    pub delta: T,
    /// Cost weights for risk, goal, turning and global closeness.
    pub lambdas: [T; 4],
    pub replan_rate: T,
    pub goal_mode: GoalMode,
    /// Include the Phase-2 risk in the ranking cost.
    pub use_phase2_risk: bool,
    /// Query particles at their predicted positions; otherwise at the snapshot.
    pub predict: bool,
}

impl<T: Scalar> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            pieces: 2,
            delta: T::lit(0.2),
            lambdas: [T::lit(0.5), T::lit(0.35), T::lit(0.15), T::zero()],
            replan_rate: T::lit(20.0),
            goal_mode: GoalMode::GoalPosition,
            use_phase2_risk: true,
            predict: true,
        }
    }
}

impl<T: Scalar> PlannerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.pieces == 0 {
            return Err(invalid("pieces must be >= 1"));
        }
        if !(self.delta > T::zero()) {
            return Err(invalid("delta must be positive"));
        }
        if self.lambdas.iter().any(|l| !(*l >= T::zero())) {
            return Err(invalid("lambdas must be >= 0"));
        }
        let sum = self.lambdas.iter().fold(T::zero(), |a, b| a + *b);
        if (sum - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(invalid(format!("lambdas must sum to 1, got {sum}")));
        }
        if !(self.replan_rate > T::zero()) {
            return Err(invalid("replan_rate must be positive"));
        }
        Ok(())
    }
}

/// Individual terms of the ranking cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTerms<T> {
    pub risk: T,
    pub goal: T,
    pub turn: T,
    pub closeness: T,
    pub total: T,
}

/// Squared turning angle between two directions, azimuth wrapped.
pub fn turn_cost<T: Scalar>(d: &Direction<T>, last: &Direction<T>) -> T {
    let da = wrap_angle(d.azimuth - last.azimuth);
    let de = d.elevation - last.elevation;
    da * da + de * de
}

fn goal_point<T: Scalar>(m: &MotionPrimitive<T>, goal: &Vec3<T>, mode: GoalMode) -> Vec3<T> {
    match mode {
        GoalMode::GoalPosition => *goal,
        GoalMode::GoalDirection => {
            let start = m.start_state().position;
            let radius = m.end_state.position.distance(&start);
            start + goal.try_normalize(T::epsilon()).unwrap_or_else(Vec3::zeros) * radius
        }
    }
}

/// Cost terms of a primitive; `closeness` is the already evaluated global
/// closeness cost (zero outside fusion).
pub fn cost_terms<T: Scalar>(
    m: &MotionPrimitive<T>,
    risk1: T,
    risk2: T,
    goal: &Vec3<T>,
    theta_last: &Direction<T>,
    cfg: &PlannerConfig<T>,
    closeness: T,
) -> CostTerms<T> {
    let [l1, l2, l3, l4] = cfg.lambdas;
    let risk = risk1 + risk2;
    let g = m.junction_state.position.distance(&goal_point(m, goal, cfg.goal_mode));
    let turn = turn_cost(&m.direction, theta_last);
    CostTerms { risk, goal: g, turn, closeness, total: l1 * risk + l2 * g + l3 * turn + l4 * closeness }
}

/// Ranking cost without the global closeness term.
pub fn rank_cost<T: Scalar>(
    m: &MotionPrimitive<T>,
    risk1: T,
    risk2: T,
    goal: &Vec3<T>,
    theta_last: &Direction<T>,
    cfg: &PlannerConfig<T>,
) -> T {
    let [l1, l2, l3, _] = cfg.lambdas;
    let t = cost_terms(m, risk1, risk2, goal, theta_last, cfg, T::zero());
    l1 * t.risk + l2 * t.goal + l3 * t.turn
}

/// Extra ranking term pulling primitives toward a reference path.
pub trait Guidance<T: Scalar> {
    /// Closeness cost of the sampling line from `a` to `b`.
    fn closeness_cost(&self, a: &Vec3<T>, b: &Vec3<T>) -> T;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<T> {
    pub primitive: MotionPrimitive<T>,
    pub risk1: T,
    pub risk2: T,
    pub cost: CostTerms<T>,
}

fn candidate_order<T: Scalar>(a: &Candidate<T>, b: &Candidate<T>) -> Ordering {
    a.cost
        .total
        .partial_cmp(&b.cost.total)
        .unwrap_or(Ordering::Equal)
        .then(a.cost.turn.partial_cmp(&b.cost.turn).unwrap_or(Ordering::Equal))
        .then(a.primitive.grid_index.cmp(&b.primitive.grid_index))
}

/// Admitted candidates of one piece, ascending by cost.
#[derive(Clone, Debug, Default)]
pub struct CandidateList<T> {
    entries: Vec<Candidate<T>>,
    erased: Vec<usize>,
}

impl<T: Scalar> CandidateList<T> {
    /// Keeps candidates with `risk1 < delta` and sorts them.
    pub fn admit(candidates: Vec<Candidate<T>>, delta: T) -> Self {
        let mut entries: Vec<_> = candidates.into_iter().filter(|c| is_safe(c.risk1, delta)).collect();
        entries.sort_by(candidate_order);
        Self { entries, erased: Vec::new() }
    }

    pub fn best(&self) -> Option<&Candidate<T>> {
        self.entries.iter().find(|c| !self.erased.contains(&c.primitive.grid_index))
    }

    pub fn erase(&mut self, grid_index: usize) {
        if !self.erased.contains(&grid_index) {
            self.erased.push(grid_index);
        }
    }

    pub fn entries(&self) -> &[Candidate<T>] {
        &self.entries
    }

    pub fn remaining(&self) -> usize {
        self.entries.iter().filter(|c| !self.erased.contains(&c.primitive.grid_index)).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Found,
    Frozen,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanDiagnostics {
    pub fans_generated: usize,
    pub candidates_evaluated: usize,
    pub selections: usize,
    pub erase_events: usize,
    /// Piece 1 was replanned because its remaining Phase 1 became unsafe.
    pub intrusion: bool,
    pub latency_us: u64,
}

#[derive(Clone, Debug)]
pub struct PlanResult<T> {
    pub trajectory: PiecewiseTrajectory<T>,
    pub pieces: Vec<Candidate<T>>,
    pub status: PlanStatus,
    pub diagnostics: PlanDiagnostics,
}

impl<T: Scalar> PlanResult<T> {
    fn frozen(start_time: T, diagnostics: PlanDiagnostics) -> Self {
        Self {
            trajectory: PiecewiseTrajectory::new(Vec::new(), start_time),
            pieces: Vec::new(),
            status: PlanStatus::Frozen,
            diagnostics,
        }
    }

    fn found(pieces: Vec<Candidate<T>>, diagnostics: PlanDiagnostics) -> Self {
        let start_time = pieces[0].primitive.t0;
        let segments = pieces.iter().map(|c| c.primitive.phase1_segment()).collect();
        Self {
            trajectory: PiecewiseTrajectory::new(segments, start_time),
            pieces,
            status: PlanStatus::Found,
            diagnostics,
        }
    }

    pub fn is_found(&self) -> bool {
        self.status == PlanStatus::Found
    }

    /// Direction of the last chosen piece.
    pub fn last_direction(&self) -> Option<Direction<T>> {
        self.pieces.last().map(|c| c.primitive.direction)
    }
}

/// One planning request on the planner clock.
#[derive(Clone, Copy, Debug)]
pub struct PlanRequest<T> {
    pub start: QuadState<T>,
    pub start_time: T,
    pub goal: Vec3<T>,
    pub theta_last: Direction<T>,
}

pub struct LocalPlanner<T> {
    pub planner: PlannerConfig<T>,
    pub sampler: SamplerConfig<T>,
    pub risk: RiskConfig<T>,
}

impl<T: Scalar> LocalPlanner<T> {
    pub fn new(planner: PlannerConfig<T>, sampler: SamplerConfig<T>, risk: RiskConfig<T>) -> Result<Self> {
        planner.validate()?;
        sampler.validate()?;
        risk.validate()?;
        Ok(Self { planner, sampler, risk })
    }

    /// Fan centre: toward the goal while it is beyond one primitive radius,
    /// else along the velocity when moving, else toward the goal, else the
    /// last chosen direction.
    pub fn heading(&self, s: &QuadState<T>, goal: &Vec3<T>, theta_last: &Direction<T>) -> Vec3<T> {
        let to_goal = match self.planner.goal_mode {
            GoalMode::GoalPosition => *goal - s.position,
            GoalMode::GoalDirection => *goal * self.sampler.radius * T::lit(2.0),
        };
        let along_velocity = s.velocity.try_normalize(T::lit(HEADING_SPEED));
        let goal_dir = to_goal.try_normalize(T::lit(1e-6));
        if to_goal.norm() > self.sampler.radius {
            if let Some(g) = goal_dir {
                return g;
            }
        }
        along_velocity.or(goal_dir).unwrap_or_else(|| theta_last.unit())
    }

    /// Phase risks of a primitive against the snapshot in `field`.
    pub fn primitive_risks<Q: OccupancyQuery<T> + ?Sized>(
        &self,
        field: &Q,
        snapshot_time: T,
        m: &MotionPrimitive<T>,
        phase2: bool,
    ) -> (T, T) {
        let (w1, w2) = m.local_windows();
        let offset = m.t0 - snapshot_time;
        let axis = Some(m.direction.unit());
        let c1 = build_corridor(&m.segment, w1, &self.risk, axis).expect("phase 1 window is valid");
        let r1 = corridor_risk(field, &c1, offset, self.planner.predict);
        let r2 = if phase2 {
            let fallback = c1.last().map(|s| s.axis).or(axis);
            let c2 = build_corridor(&m.segment, w2, &self.risk, fallback).expect("phase 2 window is valid");
            corridor_risk(field, &c2, offset, self.planner.predict)
        } else {
            T::zero()
        };
        (r1, r2)
    }

    /// Evaluates a fan from `start` and returns it with its admitted list.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate_fan<Q: OccupancyQuery<T> + ?Sized>(
        &self,
        field: &Q,
        snapshot_time: T,
        start: &QuadState<T>,
        t0: T,
        goal: &Vec3<T>,
        theta_last: &Direction<T>,
        coarse: bool,
        guidance: Option<&dyn Guidance<T>>,
    ) -> Vec<Candidate<T>> {
        let heading = self.heading(start, goal, theta_last);
        let phase2 = self.planner.use_phase2_risk;
        primitive_fan(start, t0, &heading, &self.sampler, coarse)
            .into_iter()
            .map(|m| {
                let (risk1, risk2) = self.primitive_risks(field, snapshot_time, &m, phase2);
                let closeness = guidance
                    .map(|g| {
                        g.closeness_cost(&start.position, &(start.position + m.direction.unit() * self.sampler.radius))
                    })
                    .unwrap_or_else(T::zero);
                let cost = cost_terms(&m, risk1, risk2, goal, theta_last, &self.planner, closeness);
                Candidate { primitive: m, risk1, risk2, cost }
            })
            .collect()
    }

    /// Plans all K pieces from `req.start`.
    pub fn plan(
        &self,
        field: &ParticleField<T>,
        req: &PlanRequest<T>,
        guidance: Option<&dyn Guidance<T>>,
    ) -> PlanResult<T> {
        let cache = PredictionCache::new(field);
        self.plan_cached(&cache, req, guidance)
    }

    pub fn plan_cached(
        &self,
        cache: &PredictionCache<'_, T>,
        req: &PlanRequest<T>,
        guidance: Option<&dyn Guidance<T>>,
    ) -> PlanResult<T> {
        let clock = Instant::now();
        let mut diag = PlanDiagnostics::default();
        let result = self.search(cache, req, Vec::new(), guidance, &mut diag);
        diag.latency_us = clock.elapsed().as_micros() as u64;
        match result {
            Some(pieces) => PlanResult::found(pieces, diag),
            None => PlanResult::frozen(req.start_time, diag),
        }
    }

    /// The backtracking search. `fixed` pieces are kept as single-entry lists,
    /// so exhausting the piece after them makes the search fail.
    fn search(
        &self,
        cache: &PredictionCache<'_, T>,
        req: &PlanRequest<T>,
        fixed: Vec<Candidate<T>>,
        guidance: Option<&dyn Guidance<T>>,
        diag: &mut PlanDiagnostics,
    ) -> Option<Vec<Candidate<T>>> {
        let k_total = self.planner.pieces;
        let snapshot = cache.field().snapshot_time();
        let mut lists: Vec<CandidateList<T>> =
            fixed.iter().map(|c| CandidateList { entries: vec![c.clone()], erased: Vec::new() }).collect();
        let mut chosen = fixed;
        let mut k = chosen.len();
        if k >= k_total {
            return Some(chosen);
        }
        'generate: loop {
            let (start, t0, theta_last) = match k {
                0 => (req.start, req.start_time, req.theta_last),
                _ => {
                    let prev = &chosen[k - 1].primitive;
                    (prev.junction_state, prev.tp, prev.direction)
                }
            };
            let fan = self.evaluate_fan(cache, snapshot, &start, t0, &req.goal, &theta_last, k == 0, guidance);
            diag.fans_generated += 1;
            diag.candidates_evaluated += fan.len();
            lists.truncate(k);
            lists.push(CandidateList::admit(fan, self.planner.delta));
            loop {
                if let Some(best) = lists[k].best() {
                    chosen.truncate(k);
                    chosen.push(best.clone());
                    diag.selections += 1;
                    if k + 1 < k_total {
                        k += 1;
                        continue 'generate;
                    }
                    return Some(chosen);
                }
                if k == 0 {
                    return None;
                }
                let erased = chosen[k - 1].primitive.grid_index;
                lists[k - 1].erase(erased);
                diag.erase_events += 1;
                lists.truncate(k);
                k -= 1;
            }
        }
    }

    /// Rolling-horizon update of an existing plan at time `now`.
    ///
    /// Finished leading pieces are shifted out. If the remaining Phase 1 of
    /// piece 1 is no longer safe the whole plan is redone from the current
    /// state; otherwise only pieces `k > 1` are replanned from the fixed
    /// junction.
    pub fn replan_tick(
        &self,
        current: &PlanResult<T>,
        field: &ParticleField<T>,
        now: T,
        goal: &Vec3<T>,
        guidance: Option<&dyn Guidance<T>>,
    ) -> PlanResult<T> {
        let cache = PredictionCache::new(field);
        self.replan_tick_cached(current, &cache, now, goal, guidance)
    }

    pub fn replan_tick_cached(
        &self,
        current: &PlanResult<T>,
        cache: &PredictionCache<'_, T>,
        now: T,
        goal: &Vec3<T>,
        guidance: Option<&dyn Guidance<T>>,
    ) -> PlanResult<T> {
        let clock = Instant::now();
        let mut diag = PlanDiagnostics::default();
        let mut pieces = current.pieces.clone();
        while pieces.len() > 1 && now >= pieces[0].primitive.tp {
            pieces.remove(0);
        }
        let outcome = match pieces.first() {
            None => None,
            Some(first) if now >= first.primitive.tp => {
                // the last piece is used up: restart from its junction
                let req = PlanRequest {
                    start: first.primitive.junction_state,
                    start_time: first.primitive.tp,
                    goal: *goal,
                    theta_last: first.primitive.direction,
                };
                self.search(cache, &req, Vec::new(), guidance, &mut diag)
            }
            Some(first) => {
                let m = &first.primitive;
                let local_now = (now - m.t0).max(T::zero());
                let risk_now = if local_now < m.phase1_duration() {
                    let c = build_corridor(
                        &m.segment,
                        (local_now, m.phase1_duration()),
                        &self.risk,
                        Some(m.direction.unit()),
                    )
                    .expect("remaining phase 1 window is valid");
                    corridor_risk(cache, &c, m.t0 - cache.field().snapshot_time(), self.planner.predict)
                } else {
                    T::zero()
                };
                let restart = PlanRequest {
                    start: m.segment.state_at(local_now),
                    start_time: m.t0 + local_now,
                    goal: *goal,
                    theta_last: m.direction,
                };
                if !is_safe(risk_now, self.planner.delta) {
                    diag.intrusion = true;
                    self.search(cache, &restart, Vec::new(), guidance, &mut diag)
                } else {
                    let req = PlanRequest {
                        start: m.segment.start(),
                        start_time: m.t0,
                        goal: *goal,
                        theta_last: m.direction,
                    };
                    self.search(cache, &req, vec![first.clone()], guidance, &mut diag)
                        .or_else(|| self.search(cache, &restart, Vec::new(), guidance, &mut diag))
                }
            }
        };
        diag.latency_us = clock.elapsed().as_micros() as u64;
        match outcome {
            Some(p) => PlanResult::found(p, diag),
            None => PlanResult::frozen(now, diag),
        }
    }
}

/// Feasible segment bringing the vehicle from `state` to rest, used when the
/// planner is frozen.
pub fn braking_segment<T: Scalar>(state: &QuadState<T>, v_max: T, a_max: T) -> QuinticSegment<T> {
    let speed = state.velocity.norm();
    let base = (speed / a_max).max(T::lit(0.25)) * T::lit(1.5);
    let mut last = None;
    for s in [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0] {
        let d = base * T::lit(s);
        let end = QuadState::at_rest(state.position + state.velocity * (d * T::lit(0.5)));
        if let Ok(seg) = build_min_jerk(state, &end, d) {
            if check_feasible_refined(&seg, v_max, a_max) {
                return seg;
            }
            last = Some(seg);
        }
    }
    last.expect("braking segment construction with finite state")
}
