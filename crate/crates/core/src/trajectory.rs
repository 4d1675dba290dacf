//! Quintic polynomial trajectories.
//!
//! A [`QuinticSegment`] stores per-axis coefficients in ascending degree and is
//! evaluated on local time `[0, duration]`. [`build_min_jerk`] solves the
//! six-condition boundary value problem (position, velocity and acceleration at
//! both ends), whose unique quintic solution is also the jerk-energy minimiser.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PlanError, Result};
use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Samples per segment used by [`check_feasible`], including both ends.
pub const FEASIBILITY_SAMPLES: usize = 65;

/// Relative slack on the limits so that boundary states built exactly at a
/// limit (e.g. an end speed of `v_max`) survive rounding.
pub const LIMIT_SLACK: f64 = 1e-9;

/// Position, velocity and acceleration of the vehicle at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadState<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub acceleration: Vec3<T>,
}

impl<T: Scalar> QuadState<T> {
    pub fn new(position: Vec3<T>, velocity: Vec3<T>, acceleration: Vec3<T>) -> Self {
        Self { position, velocity, acceleration }
    }

    pub fn at_rest(position: Vec3<T>) -> Self {
        Self::new(position, Vec3::zeros(), Vec3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.acceleration.is_finite()
    }

    /// Largest absolute difference over all nine components.
    pub fn max_abs_diff(&self, o: &Self) -> T {
        let d = |a: Vec3<T>, b: Vec3<T>| {
            let e = a - b;
            e.x.abs().max(e.y.abs()).max(e.z.abs())
        };
        d(self.position, o.position).max(d(self.velocity, o.velocity)).max(d(self.acceleration, o.acceleration))
    }
}

/// One quintic polynomial per axis over local time `[0, duration]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuinticSegment<T> {
    /// `coeffs[axis][k]` multiplies `t^k`.
    pub coeffs: [[T; 6]; 3],
    pub duration: T,
}

impl<T: Scalar> QuinticSegment<T> {
    pub fn new(coeffs: [[T; 6]; 3], duration: T) -> Result<Self> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(invalid(format!("segment duration must be positive, got {duration}")));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite polynomial coefficient"));
        }
        Ok(Self { coeffs, duration })
    }

    /// Evaluates without a range check; callers guarantee `t` is meaningful.
    pub fn state_at(&self, t: T) -> QuadState<T> {
        let mut p = [T::zero(); 3];
        let mut v = [T::zero(); 3];
        let mut a = [T::zero(); 3];
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let four = T::lit(4.0);
        let five = T::lit(5.0);
        let six = T::lit(6.0);
        let twelve = T::lit(12.0);
        let twenty = T::lit(20.0);
        for axis in 0..3 {
            let c = &self.coeffs[axis];
            p[axis] = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
            v[axis] = c[1] + t * (two * c[2] + t * (three * c[3] + t * (four * c[4] + t * five * c[5])));
            a[axis] = two * c[2] + t * (six * c[3] + t * (twelve * c[4] + t * twenty * c[5]));
        }
        QuadState::new(p.into(), v.into(), a.into())
    }

    pub fn eval(&self, t: T) -> Result<QuadState<T>> {
        if !(t >= T::zero() && t <= self.duration) {
            return Err(PlanError::OutOfRange { t: t.as_f64(), duration: self.duration.as_f64() });
        }
        Ok(self.state_at(t))
    }

    /// Jerk vector at local time `t`.
    pub fn jerk_at(&self, t: T) -> Vec3<T> {
        let j = |c: &[T; 6]| T::lit(6.0) * c[3] + t * (T::lit(24.0) * c[4] + t * T::lit(60.0) * c[5]);
        Vec3::new(j(&self.coeffs[0]), j(&self.coeffs[1]), j(&self.coeffs[2]))
    }

    pub fn start(&self) -> QuadState<T> {
        self.state_at(T::zero())
    }

    pub fn end(&self) -> QuadState<T> {
        self.state_at(self.duration)
    }

    /// Same polynomial restricted to `[0, duration]`.
    pub fn truncated(&self, duration: T) -> Result<Self> {
        if duration > self.duration {
            return Err(invalid("cannot extend a segment by truncation"));
        }
        Self::new(self.coeffs, duration)
    }

    /// The polynomial re-expressed so that new local time 0 is old time `t0`.
    pub fn shifted(&self, t0: T) -> Result<Self> {
        if !(t0 >= T::zero() && t0 < self.duration) {
            return Err(PlanError::OutOfRange { t: t0.as_f64(), duration: self.duration.as_f64() });
        }
        // Taylor expansion about t0: c'_k = p^(k)(t0) / k!
        let mut coeffs = [[T::zero(); 6]; 3];
        for (axis, out) in coeffs.iter_mut().enumerate() {
            let c = &self.coeffs[axis];
            for (k, slot) in out.iter_mut().enumerate() {
                let mut acc = T::zero();
                for n in (k..6).rev() {
                    acc = acc * t0 + c[n] * T::from_usize_lossy(binomial(n, k));
                }
                // acc was built in Horner form over (n - k) powers of t0
                *slot = acc;
            }
        }
        Self::new(coeffs, self.duration - t0)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Minimum-jerk quintic matching position, velocity and acceleration at both ends.
pub fn build_min_jerk<T: Scalar>(start: &QuadState<T>, end: &QuadState<T>, duration: T) -> Result<QuinticSegment<T>> {
    if !start.is_finite() || !end.is_finite() {
        return Err(invalid("non-finite boundary state"));
    }
    if !(duration > T::zero()) || !duration.is_finite() {
        return Err(invalid(format!("duration must be positive and finite, got {duration}")));
    }
    let d = duration;
    let d2 = d * d;
    let d3 = d2 * d;
    let half = T::lit(0.5);
    let mut coeffs = [[T::zero(); 6]; 3];
    for (axis, c) in coeffs.iter_mut().enumerate() {
        let (p0, v0, a0) = (start.position[axis], start.velocity[axis], start.acceleration[axis]);
        let (p1, v1, a1) = (end.position[axis], end.velocity[axis], end.acceleration[axis]);
        // residuals left after the start-state Taylor terms
        let h = p1 - p0 - v0 * d - half * a0 * d2;
        let dv = (v1 - v0 - a0 * d) * d;
        let da = (a1 - a0) * d2;
        c[0] = p0;
        c[1] = v0;
        c[2] = half * a0;
        c[3] = (T::lit(10.0) * h - T::lit(4.0) * dv + half * da) / d3;
        c[4] = (T::lit(-15.0) * h + T::lit(7.0) * dv - da) / (d3 * d);
        c[5] = (T::lit(6.0) * h - T::lit(3.0) * dv + half * da) / (d3 * d2);
    }
    QuinticSegment::new(coeffs, duration)
}

/// Speed and acceleration magnitude limits hold at 65 evenly spaced samples.
pub fn check_feasible<T: Scalar>(seg: &QuinticSegment<T>, v_max: T, a_max: T) -> bool {
    let n = FEASIBILITY_SAMPLES - 1;
    let slack = T::one() + T::lit(LIMIT_SLACK);
    let v2 = (v_max * slack).powi(2);
    let a2 = (a_max * slack).powi(2);
    (0..=n).all(|i| {
        let t = seg.duration * T::from_usize_lossy(i) / T::from_usize_lossy(n);
        let s = seg.state_at(t);
        s.velocity.norm_squared() <= v2 && s.acceleration.norm_squared() <= a2
    })
}

/// [`check_feasible`] plus a golden-section polish around every sampled local
/// maximum of speed and acceleration, so peaks between samples are caught.
pub fn check_feasible_refined<T: Scalar>(seg: &QuinticSegment<T>, v_max: T, a_max: T) -> bool {
    if !check_feasible(seg, v_max, a_max) {
        return false;
    }
    let n = FEASIBILITY_SAMPLES - 1;
    let h = seg.duration / T::from_usize_lossy(n);
    let speed2 = |t: T| seg.state_at(t).velocity.norm_squared();
    let accel2 = |t: T| seg.state_at(t).acceleration.norm_squared();
    let within = |f: &dyn Fn(T) -> T, limit2: T| {
        let vals: Vec<T> = (0..=n).map(|i| f(h * T::from_usize_lossy(i))).collect();
        (0..=n).all(|i| {
            let left = if i == 0 { T::neg_infinity() } else { vals[i - 1] };
            let right = if i == n { T::neg_infinity() } else { vals[i + 1] };
            if vals[i] < left || vals[i] < right {
                return true;
            }
            let lo = h * T::from_usize_lossy(i.saturating_sub(1));
            let hi = (h * T::from_usize_lossy(i + 1)).min(seg.duration);
            golden_max(f, lo, hi) <= limit2
        })
    };
    let slack = T::one() + T::lit(LIMIT_SLACK);
    within(&speed2, (v_max * slack).powi(2)) && within(&accel2, (a_max * slack).powi(2))
}

fn golden_max<T: Scalar>(f: &dyn Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let g = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2).max(f(lo)).max(f(hi))
}

/// Peak sampled speed and acceleration magnitude, for diagnostics.
pub fn sampled_peaks<T: Scalar>(seg: &QuinticSegment<T>) -> (T, T) {
    let n = FEASIBILITY_SAMPLES - 1;
    (0..=n).fold((T::zero(), T::zero()), |(vm, am), i| {
        let t = seg.duration * T::from_usize_lossy(i) / T::from_usize_lossy(n);
        let s = seg.state_at(t);
        (vm.max(s.velocity.norm()), am.max(s.acceleration.norm()))
    })
}

/// Consecutive quintic segments on a shared clock starting at `start_time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTrajectory<T> {
    pub segments: Vec<QuinticSegment<T>>,
    pub start_time: T,
}

impl<T: Scalar> PiecewiseTrajectory<T> {
    pub fn new(segments: Vec<QuinticSegment<T>>, start_time: T) -> Self {
        Self { segments, start_time }
    }

    pub fn total_duration(&self) -> T {
        self.segments.iter().map(|s| s.duration).fold(T::zero(), |a, b| a + b)
    }

    pub fn end_time(&self) -> T {
        self.start_time + self.total_duration()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Evaluates at time `t` relative to `start_time`.
    pub fn eval(&self, t: T) -> Result<QuadState<T>> {
        let total = self.total_duration();
        if self.segments.is_empty() || !(t >= T::zero() && t <= total) {
            return Err(PlanError::OutOfRange { t: t.as_f64(), duration: total.as_f64() });
        }
        let mut local = t;
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if local <= seg.duration || i == last {
                return Ok(seg.state_at(local.min(seg.duration)));
            }
            local = local - seg.duration;
        }
        unreachable!("non-empty trajectory always returns")
    }

    /// Evaluates at absolute time, clamped into the trajectory's span.
    pub fn eval_clamped(&self, abs_t: T) -> Option<QuadState<T>> {
        if self.segments.is_empty() {
            return None;
        }
        let t = (abs_t - self.start_time).max(T::zero()).min(self.total_duration());
        self.eval(t).ok()
    }

    /// Largest state mismatch across all junctions (0 for a single segment).
    pub fn max_junction_residual(&self) -> T {
        self.segments.windows(2).map(|w| w[0].end().max_abs_diff(&w[1].start())).fold(T::zero(), T::max)
    }
}
