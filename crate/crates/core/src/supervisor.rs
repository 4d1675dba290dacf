//! Mode switching between the global trajectory and local detours.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fusion::{
    fused_cost, global_risk_check, select_key_points, subgoal, try_merge, FusionConfig, GlobalTrajectory,
    KeyPathGuidance, KeyPolyline, Merge,
};
use crate::particles::{ParticleField, PredictionCache};
use crate::planner::{braking_segment, GoalMode, LocalPlanner, PlanDiagnostics, PlanRequest, PlanResult};
use crate::risk::{build_corridor, corridor_risk, is_safe};
use crate::sampler::{sample_directions, Direction};
use crate::scalar::Scalar;
use crate::trajectory::{PiecewiseTrajectory, QuadState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FollowGlobal,
    FollowLocal,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::FollowGlobal => "follow_global",
            Mode::FollowLocal => "follow_local",
        }
    }
}

/// What the vehicle should fly from now on.
#[derive(Clone, Debug, PartialEq)]
pub enum Command<T> {
    /// Track the global trajectory; planner time `t` maps to global time
    /// `t - offset`.
    Global {
        offset: T,
    },
    Trajectory(PiecewiseTrajectory<T>),
}

impl<T: Scalar> Command<T> {
    pub fn state_at(&self, g: &GlobalTrajectory<T>, t: T) -> Option<QuadState<T>> {
        match self {
            Command::Global { offset } => Some(g.state_at(t - *offset)),
            Command::Trajectory(tr) => tr.eval_clamped(t),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupervisorOutput<T> {
    pub mode: Mode,
    pub command: Command<T>,
    /// Global look-ahead risk while following globally, else Phase 1 risk of
    /// the flown piece.
    pub risk: T,
    pub cost: T,
    pub frozen: bool,
    /// Set on the cycle a merge primitive is adopted.
    pub merge: Option<Merge<T>>,
    pub diagnostics: Option<PlanDiagnostics>,
}

/// Follows the global trajectory while its look-ahead is safe, detours with
/// the local planner otherwise, and merges back onto the key polyline.
pub struct Supervisor<T: Scalar> {
    planner: LocalPlanner<T>,
    fusion: FusionConfig<T>,
    global: GlobalTrajectory<T>,
    key: KeyPolyline<T>,
    mode: Mode,
    offset: T,
    progress: usize,
    plan: Option<PlanResult<T>>,
    merge: Option<Merge<T>>,
    theta_last: Direction<T>,
    transitions: Vec<(T, Mode)>,
}

impl<T: Scalar> Supervisor<T> {
    /// `start_time` is the planner time at which the global trajectory's
    /// first point is due. The planner's weights are replaced by the fusion
    /// weights.
    pub fn new(
        mut planner: LocalPlanner<T>,
        fusion: FusionConfig<T>,
        global: GlobalTrajectory<T>,
        start_time: T,
    ) -> Result<Self> {
        fusion.validate()?;
        if planner.planner.goal_mode != GoalMode::GoalPosition {
            return Err(invalid("fusion requires goal-position mode"));
        }
        planner.planner.lambdas = fusion.lambdas;
        let key = select_key_points(&global, &fusion)?;
        let first = global.points()[0];
        let theta_last = Direction::from_vector(&(global.points()[1].position - first.position));
        Ok(Self {
            planner,
            fusion,
            offset: start_time - first.time,
            global,
            key,
            mode: Mode::FollowGlobal,
            progress: 0,
            plan: None,
            merge: None,
            theta_last,
            transitions: vec![(start_time, Mode::FollowGlobal)],
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn key_points(&self) -> &KeyPolyline<T> {
        &self.key
    }

    pub fn global(&self) -> &GlobalTrajectory<T> {
        &self.global
    }

    pub fn planner(&self) -> &LocalPlanner<T> {
        &self.planner
    }

    /// Mode entered at each switch, starting with the initial mode.
    pub fn transitions(&self) -> &[(T, Mode)] {
        &self.transitions
    }

    /// Index of the furthest global point followed so far.
    pub fn progress(&self) -> usize {
        self.progress
    }

    /// Planner time at which the global trajectory ends, if following it.
    pub fn global_end_time(&self) -> Option<T> {
        (self.mode == Mode::FollowGlobal).then(|| self.global.end_time() + self.offset)
    }

    /// Drops any local plan or merge and continues locally from wherever the
    /// vehicle is, e.g. after it was moved externally.
    pub fn interrupt(&mut self, now: T) {
        self.plan = None;
        self.merge = None;
        self.switch(now, Mode::FollowLocal);
    }

    fn switch(&mut self, now: T, mode: Mode) {
        if self.mode != mode {
            self.mode = mode;
            self.transitions.push((now, mode));
        }
    }

    /// One supervision cycle at planner time `now`. `state` is the vehicle
    /// state at `now`.
    pub fn step(&mut self, now: T, state: &QuadState<T>, field: &ParticleField<T>) -> SupervisorOutput<T> {
        let cache = PredictionCache::new(field);
        if self.mode == Mode::FollowGlobal {
            let tau = now - self.offset;
            let idx = self.global.index_at(tau);
            self.progress = self.progress.max(idx);
            let t_idx = self.global.points()[idx].time + self.offset;
            let risk = global_risk_check(
                &cache,
                &self.global,
                idx,
                &self.fusion,
                &self.planner.risk,
                t_idx - field.snapshot_time(),
                self.planner.planner.predict,
            );
            if is_safe(risk, self.planner.planner.delta) {
                return self.output(Command::Global { offset: self.offset }, risk, T::zero(), None, None);
            }
            self.switch(now, Mode::FollowLocal);
            self.plan = None;
            self.merge = None;
            if let Some(v) = state.velocity.try_normalize(T::lit(1e-6)) {
                self.theta_last = Direction::from_vector(&v);
            }
        }
        self.local_step(now, state, &cache)
    }

    fn local_step(&mut self, now: T, state: &QuadState<T>, cache: &PredictionCache<'_, T>) -> SupervisorOutput<T> {
        let delta = self.planner.planner.delta;
        let snapshot = cache.field().snapshot_time();
        if let Some(m) = self.merge.clone() {
            let p = &m.primitive;
            let local_now = now - p.t0;
            if now >= p.tf || local_now >= p.segment.duration {
                self.offset = p.tf - self.global.points()[m.global_index].time;
                self.progress = self.progress.max(m.global_index);
                self.merge = None;
                self.switch(now, Mode::FollowGlobal);
                return self.output(Command::Global { offset: self.offset }, T::zero(), T::zero(), None, None);
            }
            let c = build_corridor(
                &p.segment,
                (local_now, p.segment.duration),
                &self.planner.risk,
                Some(p.direction.unit()),
            )
            .expect("remaining merge window is valid");
            let risk = corridor_risk(cache, &c, p.t0 - snapshot, self.planner.planner.predict);
            if is_safe(risk, delta) {
                let tr = PiecewiseTrajectory::new(vec![p.segment.clone()], p.t0);
                return self.output(Command::Trajectory(tr), risk, T::zero(), None, None);
            }
            self.merge = None;
        }

        let goal = subgoal(&self.global, self.progress, cache.field().bounds());
        if let Some((merge, risk, cost)) = self.best_merge(now, state, &goal, cache) {
            self.theta_last = merge.primitive.direction;
            self.plan = None;
            self.merge = Some(merge.clone());
            let tr = PiecewiseTrajectory::new(vec![merge.primitive.segment.clone()], now);
            return self.output(Command::Trajectory(tr), risk, cost, Some(merge), None);
        }

        let guidance = KeyPathGuidance {
            key: &self.key,
            merge_distance: self.fusion.merge_distance,
            from_segment: self.key.segment_of(self.progress),
        };
        let plan = match self.plan.as_ref().filter(|p| p.is_found()) {
            Some(prev) => self.planner.replan_tick_cached(prev, cache, now, &goal, Some(&guidance)),
            None => {
                let req = PlanRequest { start: *state, start_time: now, goal, theta_last: self.theta_last };
                self.planner.plan_cached(cache, &req, Some(&guidance))
            }
        };
        let diag = plan.diagnostics.clone();
        if plan.is_found() {
            let first = &plan.pieces[0];
            let (risk, cost) = (first.risk1, first.cost.total);
            self.theta_last = plan.last_direction().unwrap_or(self.theta_last);
            let tr = plan.trajectory.clone();
            self.plan = Some(plan);
            self.output(Command::Trajectory(tr), risk, cost, None, Some(diag))
        } else {
            self.plan = None;
            let brake = braking_segment(state, self.planner.sampler.v_max, self.planner.sampler.a_max);
            let tr = PiecewiseTrajectory::new(vec![brake], now);
            let mut out = self.output(Command::Trajectory(tr), T::zero(), T::zero(), None, Some(diag));
            out.frozen = true;
            out
        }
    }

    /// Merge candidates over the fine fan: both phases and the global
    /// look-ahead from the merge point must be safe. Lowest fused cost wins.
    fn best_merge(
        &self,
        now: T,
        state: &QuadState<T>,
        goal: &crate::vec3::Vec3<T>,
        cache: &PredictionCache<'_, T>,
    ) -> Option<(Merge<T>, T, T)> {
        let delta = self.planner.planner.delta;
        let snapshot = cache.field().snapshot_time();
        let heading = self.planner.heading(state, goal, &self.theta_last);
        let from_segment = self.key.segment_of(self.progress);
        let mut best: Option<(Merge<T>, T, T)> = None;
        for (i, d) in sample_directions(&heading, &self.planner.sampler, false).into_iter().enumerate() {
            let line = (state.position, state.position + d.unit() * self.planner.sampler.radius);
            let Some(m) = try_merge(
                line,
                &self.key,
                &self.global,
                state,
                now,
                i,
                from_segment,
                &self.fusion,
                &self.planner.sampler,
            ) else {
                continue;
            };
            if m.global_index <= self.progress {
                continue;
            }
            let (r1, r2) = self.planner.primitive_risks(cache, snapshot, &m.primitive, true);
            if !is_safe(r1, delta) || !is_safe(r2, delta) {
                continue;
            }
            let ahead = global_risk_check(
                cache,
                &self.global,
                m.global_index,
                &self.fusion,
                &self.planner.risk,
                m.primitive.tf - snapshot,
                self.planner.planner.predict,
            );
            if !is_safe(ahead, delta) {
                continue;
            }
            let cost = fused_cost(
                &m.primitive,
                r1,
                r2,
                goal,
                &self.theta_last,
                m.distance,
                &self.planner.planner,
                &self.fusion,
            );
            if best.as_ref().is_none_or(|(_, _, c)| cost < *c) {
                best = Some((m, r1, cost));
            }
        }
        best
    }

    fn output(
        &self,
        command: Command<T>,
        risk: T,
        cost: T,
        merge: Option<Merge<T>>,
        diagnostics: Option<PlanDiagnostics>,
    ) -> SupervisorOutput<T> {
        SupervisorOutput { mode: self.mode, command, risk, cost, frozen: false, merge, diagnostics }
    }
}
