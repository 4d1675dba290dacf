//! Direction fans of two-phase motion primitives.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::trajectory::{build_min_jerk, check_feasible_refined, QuadState, QuinticSegment};
use crate::vec3::{angles_from_direction, direction_from_angles, Vec3};

/// Sampling direction as `(azimuth, elevation)` in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Direction<T> {
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Scalar> Direction<T> {
    pub fn new(azimuth: T, elevation: T) -> Self {
        Self { azimuth, elevation }
    }

    pub fn from_vector(v: &Vec3<T>) -> Self {
        let (azimuth, elevation) = angles_from_direction(v);
        Self { azimuth, elevation }
    }

    pub fn unit(&self) -> Vec3<T> {
        direction_from_angles(self.azimuth, self.elevation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig<T> {
    pub n_azimuth: usize,
    pub n_elevation: usize,
    pub azimuth_span: T,
    pub elevation_span: T,
    /// Explicit coarse fan size; `None` halves the fine counts, rounding up.
    pub coarse_counts: Option<(usize, usize)>,
    /// Distance from the start to each primitive's endpoint (m).
    pub radius: T,
    pub v_max: T,
    pub a_max: T,
    pub phase1_fraction: T,
    /// Multipliers of `radius / v_max` tried in order; the first feasible wins.
    pub duration_scales: Vec<T>,
}

impl<T: Scalar> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            n_azimuth: 15,
            n_elevation: 5,
            azimuth_span: T::lit(150.0).to_radians(),
            elevation_span: T::lit(60.0).to_radians(),
            coarse_counts: Some((7, 3)),
            radius: T::lit(2.0),
            v_max: T::lit(3.0),
            a_max: T::lit(4.0),
            phase1_fraction: T::lit(0.4),
            duration_scales: [1.0, 1.25, 1.5, 2.0, 3.0].iter().map(|s| T::lit(*s)).collect(),
        }
    }
}

impl<T: Scalar> SamplerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_azimuth == 0 || self.n_elevation == 0 {
            return Err(invalid("direction counts must be >= 1"));
        }
        if let Some((a, e)) = self.coarse_counts {
            if a == 0 || e == 0 {
                return Err(invalid("coarse direction counts must be >= 1"));
            }
        }
        if !(self.azimuth_span > T::zero() && self.elevation_span > T::zero()) {
            return Err(invalid("angular spans must be positive"));
        }
        if !(self.radius > T::zero() && self.v_max > T::zero() && self.a_max > T::zero()) {
            return Err(invalid("radius and kinematic limits must be positive"));
        }
        if !(self.phase1_fraction > T::zero() && self.phase1_fraction < T::one()) {
            return Err(invalid("phase1_fraction must lie in (0, 1)"));
        }
        if self.duration_scales.is_empty() || self.duration_scales.iter().any(|s| !(*s > T::zero())) {
            return Err(invalid("duration_scales must be non-empty and positive"));
        }
        Ok(())
    }

    /// `(n_azimuth, n_elevation)` for the requested fan resolution.
    pub fn counts(&self, coarse: bool) -> (usize, usize) {
        if !coarse {
            return (self.n_azimuth, self.n_elevation);
        }
        self.coarse_counts.unwrap_or((self.n_azimuth.div_ceil(2), self.n_elevation.div_ceil(2)))
    }
}

/// A quintic split at `tp` into Phase 1 `[t0, tp]` and Phase 2 `[tp, tf]`.
///
/// Times are on the planner clock; the segment is on its own local clock
/// starting at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionPrimitive<T> {
    pub segment: QuinticSegment<T>,
    pub t0: T,
    pub tp: T,
    pub tf: T,
    pub direction: Direction<T>,
    pub end_state: QuadState<T>,
    pub junction_state: QuadState<T>,
    /// Position of the direction in the fan grid, used for tie-breaking.
    pub grid_index: usize,
}

impl<T: Scalar> MotionPrimitive<T> {
    pub fn start_state(&self) -> QuadState<T> {
        self.segment.start()
    }

    pub fn phase1_duration(&self) -> T {
        (self.tp - self.t0).min(self.segment.duration)
    }

    /// Phase 1 alone as a segment.
    pub fn phase1_segment(&self) -> QuinticSegment<T> {
        self.segment.truncated(self.phase1_duration()).expect("phase 1 lies inside the primitive")
    }

    /// Phase windows on the segment's local clock.
    pub fn local_windows(&self) -> ((T, T), (T, T)) {
        let p = self.phase1_duration();
        ((T::zero(), p), (p, self.segment.duration))
    }
}

/// Phase windows `([t0, tp], [tp, tf])` on the planner clock.
pub fn split_phases<T: Scalar>(m: &MotionPrimitive<T>) -> ((T, T), (T, T)) {
    ((m.t0, m.tp), (m.tp, m.tf))
}

fn uniform_offsets<T: Scalar>(n: usize, span: T) -> impl Iterator<Item = T> {
    (0..n).map(move |i| {
        if n == 1 {
            T::zero()
        } else {
            -span * T::lit(0.5) + span * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)
        }
    })
}

/// Uniform azimuth x elevation grid centred on `heading`, azimuth-major.
pub fn sample_directions<T: Scalar>(heading: &Vec3<T>, cfg: &SamplerConfig<T>, coarse: bool) -> Vec<Direction<T>> {
    let center = Direction::from_vector(heading);
    let (na, ne) = cfg.counts(coarse);
    let half_pi = T::FRAC_PI_2();
    let mut out = Vec::with_capacity(na * ne);
    for da in uniform_offsets(na, cfg.azimuth_span) {
        for de in uniform_offsets(ne, cfg.elevation_span) {
            let el = (center.elevation + de).max(-half_pi).min(half_pi);
            out.push(Direction::new(center.azimuth + da, el));
        }
    }
    out
}

/// Builds the primitive toward `direction` using the duration heuristic.
///
/// Candidate durations are `radius / v_max * s` over `duration_scales`; the
/// end speed is `min(v_max, |v0| + a_max T / 2)` along the direction with zero
/// end acceleration. Returns `None` when every candidate violates the limits.
pub fn make_primitive<T: Scalar>(
    start: &QuadState<T>,
    t0: T,
    direction: Direction<T>,
    grid_index: usize,
    cfg: &SamplerConfig<T>,
) -> Option<MotionPrimitive<T>> {
    let dir = direction.unit();
    let end_pos = start.position + dir * cfg.radius;
    let v0 = start.velocity.norm();
    let base = cfg.radius / cfg.v_max;
    cfg.duration_scales.iter().find_map(|s| {
        let duration = base * *s;
        let v_cruise = (v0 + cfg.a_max * duration * T::lit(0.5)).min(cfg.v_max);
        let end = QuadState::new(end_pos, dir * v_cruise, Vec3::zeros());
        primitive_if_feasible(start, &end, duration, t0, direction, grid_index, cfg)
    })
}

/// Builds a primitive to a fixed end state, searching durations
/// `|p_end - p_start| / v_max * s` over `duration_scales`.
pub fn make_primitive_to<T: Scalar>(
    start: &QuadState<T>,
    end: &QuadState<T>,
    t0: T,
    direction: Direction<T>,
    grid_index: usize,
    cfg: &SamplerConfig<T>,
) -> Option<MotionPrimitive<T>> {
    let dist = start.position.distance(&end.position);
    if dist <= T::epsilon() {
        return None;
    }
    let base = dist / cfg.v_max;
    cfg.duration_scales
        .iter()
        .find_map(|s| primitive_if_feasible(start, end, base * *s, t0, direction, grid_index, cfg))
}

fn primitive_if_feasible<T: Scalar>(
    start: &QuadState<T>,
    end: &QuadState<T>,
    duration: T,
    t0: T,
    direction: Direction<T>,
    grid_index: usize,
    cfg: &SamplerConfig<T>,
) -> Option<MotionPrimitive<T>> {
    let segment = build_min_jerk(start, end, duration).ok()?;
    if !check_feasible_refined(&segment, cfg.v_max, cfg.a_max) {
        return None;
    }
    let p1 = duration * cfg.phase1_fraction;
    let junction_state = segment.state_at(p1);
    Some(MotionPrimitive {
        t0,
        tp: t0 + p1,
        tf: t0 + duration,
        direction,
        end_state: *end,
        junction_state,
        grid_index,
        segment,
    })
}

/// Every feasible primitive of the fan; infeasible directions are dropped.
pub fn primitive_fan<T: Scalar>(
    start: &QuadState<T>,
    t0: T,
    heading: &Vec3<T>,
    cfg: &SamplerConfig<T>,
    coarse: bool,
) -> Vec<MotionPrimitive<T>> {
    sample_directions(heading, cfg, coarse)
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| make_primitive(start, t0, d, i, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn nine_azimuths_over_pi() {
        let cfg = SamplerConfig { n_azimuth: 9, n_elevation: 1, azimuth_span: PI, ..Default::default() };
        let dirs = sample_directions(&Vec3::unit_x(), &cfg, false);
        assert_eq!(dirs.len(), 9);
        for (i, d) in dirs.iter().enumerate() {
            assert!((d.azimuth - (-PI / 2.0 + PI / 8.0 * i as f64)).abs() < 1e-12);
            assert_eq!(d.elevation, 0.0);
        }
    }

    #[test]
    fn single_direction_is_heading() {
        let cfg = SamplerConfig { n_azimuth: 1, n_elevation: 1, ..Default::default() };
        let h = Vec3::new(0.0, 1.0, 0.0);
        let dirs = sample_directions(&h, &cfg, false);
        assert_eq!(dirs.len(), 1);
        assert!((dirs[0].unit() - h).norm() < 1e-12);
    }

    #[test]
    fn coarse_halves_rounding_up() {
        let cfg = SamplerConfig::<f64> { n_azimuth: 9, n_elevation: 3, coarse_counts: None, ..Default::default() };
        assert_eq!(cfg.counts(true), (5, 2));
        assert_eq!(sample_directions(&Vec3::unit_x(), &cfg, true).len(), 10);
        assert_eq!(SamplerConfig::<f64>::default().counts(true), (7, 3));
    }

    #[test]
    fn split_phases_fractions() {
        let cfg = SamplerConfig { phase1_fraction: 0.5, ..Default::default() };
        let start = QuadState::<f64>::at_rest(Vec3::zeros());
        let m = make_primitive(&start, 0.0, Direction::new(0.0, 0.0), 0, &cfg).unwrap();
        let ((a, b), (c, d)) = split_phases(&m);
        assert_eq!(a, 0.0);
        assert_eq!(b, c);
        assert!((b - d / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rest_start_primitive_contract() {
        let cfg = SamplerConfig::<f64>::default();
        let start = QuadState::at_rest(Vec3::zeros());
        let m = make_primitive(&start, 0.0, Direction::new(0.0, 0.0), 0, &cfg).unwrap();
        assert!(m.end_state.position.distance(&Vec3::new(2.0, 0.0, 0.0)) < 1e-12);
        assert!(m.end_state.velocity.x > 0.0 && m.end_state.velocity.y == 0.0);
        assert_eq!(m.end_state.acceleration, Vec3::zeros());
        assert!(crate::trajectory::check_feasible(&m.segment, 3.0, 4.0));
        assert!(m.segment.end().max_abs_diff(&m.end_state) < 1e-9);
        assert!(m.t0 < m.tp && m.tp < m.tf);
        assert!(m.junction_state.max_abs_diff(&m.segment.state_at(m.tp - m.t0)) < 1e-12);
    }

    #[test]
    fn tiny_acceleration_is_infeasible() {
        let cfg = SamplerConfig { a_max: 0.01, ..Default::default() };
        let start = QuadState::<f64>::at_rest(Vec3::zeros());
        assert!(make_primitive(&start, 0.0, Direction::new(0.0, 0.0), 0, &cfg).is_none());
    }

    #[test]
    fn cruising_straight_is_constant_velocity() {
        let cfg = SamplerConfig::<f64>::default();
        let start = QuadState::new(Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0), Vec3::zeros());
        let m = make_primitive(&start, 0.0, Direction::new(0.0, 0.0), 0, &cfg).unwrap();
        assert!((m.segment.coeffs[0][1] - 3.0).abs() < 1e-12);
        assert!(m.segment.coeffs[0][2..].iter().all(|c| c.abs() < 1e-9));
        assert!((m.junction_state.position.x - 0.4 * 2.0).abs() < 1e-9);
    }
}
