//! Risk-checking corridors and the discrete spatio-temporal risk.
//!
//! A trajectory window is cut into steps of `dt`. Step `j` sweeps a cuboid
//! that starts at `p(t_j)`, runs `max(|v(t_j)| dt, len_min)` along the flight
//! direction and has the vehicle envelope as cross-section. The risk is the
//! sum, over steps, of the particle weight predicted to be inside the step's
//! cuboid at the step's own time.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::particles::OccupancyQuery;
use crate::region::{OrientedBox, Region};
use crate::scalar::Scalar;
use crate::trajectory::QuinticSegment;
use crate::vec3::Vec3;

/// Below this speed (m/s) the flight direction is taken from the fallback rule.
pub const HOVER_SPEED: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig<T> {
    /// Time step between corridor segments (s).
    pub dt: T,
    /// Lateral envelope size (m).
    pub envelope_l: T,
    /// Vertical envelope size (m).
    pub envelope_w: T,
    /// Minimum cuboid length (m).
    pub len_min: T,
}

impl<T: Scalar> Default for RiskConfig<T> {
    fn default() -> Self {
        Self { dt: T::lit(0.05), envelope_l: T::lit(0.5), envelope_w: T::lit(0.5), len_min: T::lit(0.05) }
    }
}

impl<T: Scalar> RiskConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()
            && self.envelope_l > T::zero()
            && self.envelope_w > T::zero()
            && self.len_min > T::zero())
        {
            return Err(invalid("risk config values must all be positive"));
        }
        Ok(())
    }
}

/// One cuboid of a risk-checking corridor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorridorSegment<T> {
    /// Cuboid center, half a length ahead of `p(t_start)`.
    pub center: Vec3<T>,
    /// Unit flight direction.
    pub axis: Vec3<T>,
    pub lateral: Vec3<T>,
    pub vertical: Vec3<T>,
    pub length: T,
    /// Cross-section `(l, w)`.
    pub cross_section: (T, T),
    /// Time of the step start, on the trajectory's local clock.
    pub t_start: T,
}

impl<T: Scalar> CorridorSegment<T> {
    /// Cuboid spanning `length` forward from `origin` along `axis`.
    pub fn new(origin: Vec3<T>, axis: Vec3<T>, length: T, cross_section: (T, T), t_start: T) -> Self {
        let (lateral, vertical) = corridor_frame(&axis);
        Self { center: origin + axis * (length * T::lit(0.5)), axis, lateral, vertical, length, cross_section, t_start }
    }

    pub fn as_box(&self) -> OrientedBox<T> {
        let half = T::lit(0.5);
        OrientedBox {
            center: self.center,
            axes: [self.axis, self.lateral, self.vertical],
            half_extents: Vec3::new(self.length * half, self.cross_section.0 * half, self.cross_section.1 * half),
        }
    }

    pub fn region(&self) -> Region<T> {
        Region::Oriented(self.as_box())
    }
}

/// Lateral and vertical axes completing a right-handed frame with `axis`.
///
/// The lateral axis is `up x axis`; within 5 degrees of vertical flight it is
/// `x x axis` instead.
pub fn corridor_frame<T: Scalar>(axis: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let up = Vec3::unit_z();
    let near_vertical = axis.dot(&up).abs() >= T::lit(5.0).to_radians().cos();
    let lateral = if near_vertical { Vec3::unit_x().cross(axis) } else { up.cross(axis) };
    let lateral = lateral.try_normalize(T::epsilon()).unwrap_or_else(Vec3::unit_y);
    let vertical = axis.cross(&lateral);
    (lateral, vertical)
}

fn step_count<T: Scalar>(span: T, dt: T) -> usize {
    // tolerate rounding in windows that are whole multiples of dt
    let n = (span / dt - T::lit(1e-9)).ceil();
    n.to_usize().unwrap_or(0).max(1)
}

/// Corridor over `window` of a segment's local clock.
///
/// `fallback_axis` orients the first cuboid when the trajectory starts at
/// hover; later hover cuboids reuse the previous segment's axis.
pub fn build_corridor<T: Scalar>(
    traj: &QuinticSegment<T>,
    window: (T, T),
    cfg: &RiskConfig<T>,
    fallback_axis: Option<Vec3<T>>,
) -> Result<Vec<CorridorSegment<T>>> {
    let (ta, tb) = window;
    if !(ta >= T::zero() && tb > ta && tb <= traj.duration + traj.duration * T::epsilon()) {
        return Err(invalid(format!("invalid corridor window [{ta}, {tb}] for duration {}", traj.duration)));
    }
    let n = step_count(tb - ta, cfg.dt);
    let hover = T::lit(HOVER_SPEED);
    let mut prev_axis = fallback_axis.and_then(|a| a.try_normalize(T::epsilon())).unwrap_or_else(Vec3::unit_x);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let tj = ta + cfg.dt * T::from_usize_lossy(j);
        let s = traj.state_at(tj);
        let speed = s.velocity.norm();
        let (axis, length) = if speed >= hover {
            (s.velocity / speed, (speed * cfg.dt).max(cfg.len_min))
        } else {
            (prev_axis, cfg.len_min)
        };
        prev_axis = axis;
        out.push(CorridorSegment::new(s.position, axis, length, (cfg.envelope_l, cfg.envelope_w), tj));
    }
    Ok(out)
}

/// Discrete risk of a window: each segment is queried at its own time.
///
/// `time_offset` is the trajectory's local time zero measured from the field
/// snapshot. With `predict == false` every query uses the snapshot positions.
pub fn corridor_risk<T: Scalar, Q: OccupancyQuery<T> + ?Sized>(
    field: &Q,
    corridor: &[CorridorSegment<T>],
    time_offset: T,
    predict: bool,
) -> T {
    corridor.iter().fold(T::zero(), |acc, seg| {
        let dt = if predict { (time_offset + seg.t_start).max(T::zero()) } else { T::zero() };
        acc + field.expected_count(&seg.region(), dt)
    })
}

pub fn trajectory_risk<T: Scalar, Q: OccupancyQuery<T> + ?Sized>(
    field: &Q,
    traj: &QuinticSegment<T>,
    window: (T, T),
    cfg: &RiskConfig<T>,
    time_offset: T,
) -> Result<T> {
    let corridor = build_corridor(traj, window, cfg, None)?;
    Ok(corridor_risk(field, &corridor, time_offset, true))
}

/// Strict safety test `risk < delta`.
pub fn is_safe<T: Scalar>(risk: T, delta: T) -> bool {
    risk < delta
}
