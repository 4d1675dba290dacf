//! Fusion of the local planner with a preplanned global trajectory.
//!
//! The dense global trajectory is approximated offline by a key-point
//! polyline. While flying the global trajectory, a look-ahead window is
//! risk-checked; when it turns unsafe the local planner takes over, and each
//! sampling direction's line segment is tested against the polyline so a
//! primitive can be bent onto the global path and hand control back.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{closest_points, point_line_distance};
use crate::particles::OccupancyQuery;
use crate::planner::{rank_cost, Guidance, PlannerConfig};
use crate::region::Aabb;
use crate::risk::{corridor_risk, CorridorSegment, RiskConfig};
use crate::sampler::{make_primitive_to, Direction, MotionPrimitive, SamplerConfig};
use crate::scalar::Scalar;
use crate::trajectory::QuadState;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalPoint<T> {
    pub time: T,
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub acceleration: Vec3<T>,
}

impl<T: Scalar> GlobalPoint<T> {
    pub fn state(&self) -> QuadState<T> {
        QuadState::new(self.position, self.velocity, self.acceleration)
    }
}

/// Dense time-stamped reference trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalTrajectory<T> {
    points: Vec<GlobalPoint<T>>,
}

impl<T: Scalar> GlobalTrajectory<T> {
    pub fn new(points: Vec<GlobalPoint<T>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("global trajectory needs at least 2 points"));
        }
        if let Some(i) = points.windows(2).position(|w| !(w[1].time > w[0].time)) {
            return Err(invalid(format!("times must be strictly increasing (point {})", i + 2)));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GlobalPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_time(&self) -> T {
        self.points[0].time
    }

    pub fn end_time(&self) -> T {
        self.points[self.points.len() - 1].time
    }

    /// Last index whose time is `<= t` (0 before the start).
    pub fn index_at(&self, t: T) -> usize {
        self.points.partition_point(|p| p.time <= t).saturating_sub(1)
    }

    /// Linearly interpolated state at global time `t`, clamped to the span.
    pub fn state_at(&self, t: T) -> QuadState<T> {
        let i = self.index_at(t);
        if i + 1 >= self.points.len() || t <= self.points[0].time {
            return self.points[i].state();
        }
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        let u = ((t - a.time) / (b.time - a.time)).max(T::zero()).min(T::one());
        QuadState::new(
            a.position.lerp(&b.position, u),
            a.velocity.lerp(&b.velocity, u),
            a.acceleration.lerp(&b.acceleration, u),
        )
    }

    /// Index in `range` of the point nearest to `p` (first on ties).
    pub fn nearest_index(&self, p: &Vec3<T>, range: std::ops::RangeInclusive<usize>) -> usize {
        let lo = *range.start();
        let hi = (*range.end()).min(self.points.len() - 1);
        let mut best = lo;
        let mut best_d = T::infinity();
        for i in lo..=hi {
            let d = self.points[i].position.distance(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Parses `t x y z vx vy vz ax ay az` lines; `#` starts a comment.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| invalid(format!("line {lineno}: {e}")))?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let vals: Vec<f64> = body
                .split_whitespace()
                .map(|f| f.parse::<f64>().map_err(|_| invalid(format!("line {lineno}: bad number '{f}'"))))
                .collect::<Result<_>>()?;
            if vals.len() != 10 {
                return Err(invalid(format!("line {lineno}: expected 10 fields, found {}", vals.len())));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("line {lineno}: non-finite value")));
            }
            let v = |k: usize| Vec3::new(T::lit(vals[k]), T::lit(vals[k + 1]), T::lit(vals[k + 2]));
            points.push(GlobalPoint { time: T::lit(vals[0]), position: v(1), velocity: v(4), acceleration: v(7) });
        }
        Self::new(points)
    }

    pub fn write<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_points(w, self.points.iter())
    }
}

fn write_points<'a, T: Scalar, W: Write>(
    mut w: W,
    points: impl Iterator<Item = &'a GlobalPoint<T>>,
) -> std::io::Result<()> {
    writeln!(w, "# t x y z vx vy vz ax ay az")?;
    for p in points {
        writeln!(
            w,
            "{} {} {} {} {} {} {} {} {} {}",
            p.time,
            p.position.x,
            p.position.y,
            p.position.z,
            p.velocity.x,
            p.velocity.y,
            p.velocity.z,
            p.acceleration.x,
            p.acceleration.y,
            p.acceleration.z
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig<T> {
    /// Turning-angle threshold for key-point insertion (rad).
    pub delta_theta: T,
    /// Maximum number of trajectory points between two key points.
    pub max_gap: usize,
    /// 1-based index of the second key point.
    pub second_index: usize,
    /// Merge distance threshold `d_c` (m).
    pub merge_distance: T,
    /// Length of the global risk-checking phase (s).
    pub check_horizon: T,
    /// Cost weights used while fusing (risk, goal, turning, closeness).
    pub lambdas: [T; 4],
}

impl<T: Scalar> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            delta_theta: T::lit(15.0).to_radians(),
            max_gap: 20,
            second_index: 5,
            merge_distance: T::lit(0.5),
            check_horizon: T::lit(2.0),
            lambdas: [T::lit(0.4), T::lit(0.25), T::lit(0.1), T::lit(0.25)],
        }
    }
}

impl<T: Scalar> FusionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_theta > T::zero() && self.merge_distance > T::zero() && self.check_horizon > T::zero()) {
            return Err(invalid("fusion thresholds must be positive"));
        }
        if self.max_gap == 0 || self.second_index < 2 {
            return Err(invalid("max_gap must be >= 1 and second_index >= 2"));
        }
        if self.second_index > self.max_gap + 2 {
            return Err(invalid("second_index may not exceed max_gap + 2"));
        }
        PlannerConfig { lambdas: self.lambdas, ..PlannerConfig::default() }.validate()
    }
}

/// Key points approximating the global path, with their source indices.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyPolyline<T> {
    pub points: Vec<Vec3<T>>,
    /// 0-based indices into the global trajectory, strictly increasing.
    pub indices: Vec<usize>,
}

impl<T: Scalar> KeyPolyline<T> {
    pub fn segment_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// Key segment whose source index range contains global index `gi`.
    pub fn segment_of(&self, gi: usize) -> usize {
        let s = self.indices.partition_point(|&k| k <= gi).saturating_sub(1);
        s.min(self.segment_count().saturating_sub(1))
    }

    /// Writes the key points' source records in the global trajectory format.
    pub fn write<W: Write>(&self, g: &GlobalTrajectory<T>, w: W) -> std::io::Result<()> {
        write_points(w, self.indices.iter().map(|&i| &g.points[i]))
    }

    /// Smallest distance from the segment `a`-`b` to key segments
    /// `from_segment..`, with the attaining segment and closest-point
    /// parameter on it.
    pub fn closest_segment(&self, a: &Vec3<T>, b: &Vec3<T>, from_segment: usize) -> Option<(T, usize, T, Vec3<T>)> {
        let mut best: Option<(T, usize, T, Vec3<T>)> = None;
        for s in from_segment..self.segment_count() {
            let c = closest_points(*a, *b, self.points[s], self.points[s + 1]);
            if best.as_ref().is_none_or(|(d, ..)| c.distance < *d) {
                best = Some((c.distance, s, c.t, c.point_on_b));
            }
        }
        best
    }
}

fn turn_angle<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    let cross = a.cross(b).norm();
    let dot = a.dot(b);
    if cross == T::zero() && dot == T::zero() {
        return T::zero();
    }
    cross.atan2(dot)
}

/// Key-point selection over the global path.
///
/// Seeds with the first point and point `second_index`, then scans forward.
/// When the angle between the last key segment and the chord from the last
/// key point to the scanned point exceeds `delta_theta`, the point of the
/// scanned stretch farthest from that chord becomes a key point and the scan
/// restarts from it. Otherwise a key point is forced once more than
/// `max_gap` points have passed. The last point always closes the polyline.
pub fn select_key_points<T: Scalar>(g: &GlobalTrajectory<T>, cfg: &FusionConfig<T>) -> Result<KeyPolyline<T>> {
    cfg.validate()?;
    let pts = g.points();
    let n = pts.len();
    if n < cfg.second_index {
        return Err(invalid(format!("need at least {} points, got {n}", cfg.second_index)));
    }
    let mut keys = vec![0, cfg.second_index - 1];
    let mut j = cfg.second_index - 1;
    let mut c = 0usize;
    while j + 1 < n {
        j += 1;
        c += 1;
        let m = keys[keys.len() - 1];
        let prev = keys[keys.len() - 2];
        let last_dir = pts[m].position - pts[prev].position;
        let chord = pts[j].position - pts[m].position;
        if turn_angle(&last_dir, &chord) > cfg.delta_theta {
            let mut h = m + 1;
            let mut far = T::neg_infinity();
            for i in (m + 1)..=j {
                let d = point_line_distance(pts[i].position, pts[m].position, pts[j].position);
                if d > far {
                    far = d;
                    h = i;
                }
            }
            keys.push(h);
            c = 0;
            j = h;
        } else if c > cfg.max_gap {
            keys.push(j);
            c = 0;
        }
    }
    if *keys.last().expect("seeded") != n - 1 {
        keys.push(n - 1);
    }
    Ok(KeyPolyline { points: keys.iter().map(|&i| pts[i].position).collect(), indices: keys })
}

/// Corridor over consecutive global points from `now_index` through
/// `check_horizon` seconds ahead; each cuboid covers one chord and is queried
/// at its start point's time.
pub fn global_corridor<T: Scalar>(
    g: &GlobalTrajectory<T>,
    now_index: usize,
    horizon: T,
    risk_cfg: &RiskConfig<T>,
) -> Vec<CorridorSegment<T>> {
    let pts = g.points();
    let t_now = pts[now_index].time;
    let mut out = Vec::new();
    let mut prev_axis = None;
    let mut i = now_index;
    while i + 1 < pts.len() && pts[i].time - t_now <= horizon {
        let chord = pts[i + 1].position - pts[i].position;
        let axis = chord
            .try_normalize(T::lit(1e-9))
            .or_else(|| pts[i].velocity.try_normalize(T::lit(1e-6)))
            .or(prev_axis)
            .unwrap_or_else(Vec3::unit_x);
        prev_axis = Some(axis);
        let length = chord.norm().max(risk_cfg.len_min);
        out.push(CorridorSegment::new(
            pts[i].position,
            axis,
            length,
            (risk_cfg.envelope_l, risk_cfg.envelope_w),
            pts[i].time - t_now,
        ));
        i += 1;
    }
    out
}

/// Risk of the global trajectory's look-ahead window. `time_offset` is the
/// time of point `now_index` measured from the field snapshot.
pub fn global_risk_check<T: Scalar, Q: OccupancyQuery<T> + ?Sized>(
    field: &Q,
    g: &GlobalTrajectory<T>,
    now_index: usize,
    cfg: &FusionConfig<T>,
    risk_cfg: &RiskConfig<T>,
    time_offset: T,
    predict: bool,
) -> T {
    let corridor = global_corridor(g, now_index, cfg.check_horizon, risk_cfg);
    corridor_risk(field, &corridor, time_offset, predict)
}

/// `0` within the merge distance, squared excess beyond it.
pub fn closeness_cost<T: Scalar>(d: T, d_c: T) -> T {
    if d <= d_c {
        T::zero()
    } else {
        (d - d_c) * (d - d_c)
    }
}

/// Ranking cost with the global closeness term added.
#[allow(clippy::too_many_arguments)]
pub fn fused_cost<T: Scalar>(
    m: &MotionPrimitive<T>,
    risk1: T,
    risk2: T,
    goal: &Vec3<T>,
    theta_last: &Direction<T>,
    d: T,
    planner: &PlannerConfig<T>,
    fusion: &FusionConfig<T>,
) -> T {
    rank_cost(m, risk1, risk2, goal, theta_last, planner)
        + planner.lambdas[3] * closeness_cost(d, fusion.merge_distance)
}

/// Outcome of a successful merge attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct Merge<T> {
    pub primitive: MotionPrimitive<T>,
    /// Distance between the sampling line and the polyline.
    pub distance: T,
    /// Endpoint actually used (the closest point, or a nearby retry).
    pub point: Vec3<T>,
    pub key_segment: usize,
    /// Global point whose velocity and acceleration the endpoint adopts.
    pub global_index: usize,
}

/// Tries to bend a primitive along the sampling line `line` onto the key
/// polyline (segments from `from_segment` on).
///
/// On failure at the closest point, endpoints are retried at `k * 0.1` of the
/// key segment's length on either side, `k = 1..=5`.
#[allow(clippy::too_many_arguments)]
pub fn try_merge<T: Scalar>(
    line: (Vec3<T>, Vec3<T>),
    key: &KeyPolyline<T>,
    g: &GlobalTrajectory<T>,
    start: &QuadState<T>,
    t0: T,
    grid_index: usize,
    from_segment: usize,
    cfg: &FusionConfig<T>,
    sampler: &SamplerConfig<T>,
) -> Option<Merge<T>> {
    let (distance, seg, u, _) = key.closest_segment(&line.0, &line.1, from_segment)?;
    if distance > cfg.merge_distance {
        return None;
    }
    let (a, b) = (key.points[seg], key.points[seg + 1]);
    let range = key.indices[seg]..=key.indices[seg + 1];
    let step = T::lit(0.1);
    let offsets = std::iter::once(0i32).chain((1..=5).flat_map(|k| [k, -k]));
    for k in offsets {
        let uk = u + step * T::lit(f64::from(k));
        if uk < T::zero() || uk > T::one() {
            continue;
        }
        let point = a.lerp(&b, uk);
        let gi = g.nearest_index(&point, range.clone());
        let gp = &g.points()[gi];
        let end = QuadState::new(point, gp.velocity, gp.acceleration);
        let dir = Direction::from_vector(&(point - start.position));
        if let Some(primitive) = make_primitive_to(start, &end, t0, dir, grid_index, sampler) {
            return Some(Merge { primitive, distance, point, key_segment: seg, global_index: gi });
        }
    }
    None
}

/// Closeness guidance toward the key polyline for the local planner.
pub struct KeyPathGuidance<'a, T> {
    pub key: &'a KeyPolyline<T>,
    pub merge_distance: T,
    pub from_segment: usize,
}

impl<T: Scalar> Guidance<T> for KeyPathGuidance<'_, T> {
    fn closeness_cost(&self, a: &Vec3<T>, b: &Vec3<T>) -> T {
        self.key
            .closest_segment(a, b, self.from_segment)
            .map(|(d, ..)| closeness_cost(d, self.merge_distance))
            .unwrap_or_else(T::zero)
    }
}

/// Last global point, from `from_index` on, before the path first leaves
/// `local_map`; the final point if it never does.
pub fn subgoal<T: Scalar>(g: &GlobalTrajectory<T>, from_index: usize, local_map: &Aabb<T>) -> Vec3<T> {
    let pts = g.points();
    let mut last_inside = pts[from_index.min(pts.len() - 1)].position;
    for p in &pts[from_index.min(pts.len() - 1)..] {
        if !local_map.contains(&p.position) {
            return last_inside;
        }
        last_inside = p.position;
    }
    last_inside
}
