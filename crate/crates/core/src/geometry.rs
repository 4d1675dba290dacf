//! Closest-point queries between 3D line segments.

use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Result of a segment-segment closest point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentClosest<T> {
    pub distance: T,
    /// Parameter in `[0, 1]` of the closest point on segment `a`.
    pub s: T,
    /// Parameter in `[0, 1]` of the closest point on segment `b`.
    pub t: T,
    pub point_on_a: Vec3<T>,
    pub point_on_b: Vec3<T>,
}

/// Minimum Euclidean distance between segments `a0a1` and `b0b1`, and the
/// point on `b` attaining it. Zero-length segments are handled as points.
pub fn segment_segment_distance<T: Scalar>(a0: Vec3<T>, a1: Vec3<T>, b0: Vec3<T>, b1: Vec3<T>) -> (T, Vec3<T>) {
    let c = closest_points(a0, a1, b0, b1);
    (c.distance, c.point_on_b)
}

pub fn closest_points<T: Scalar>(a0: Vec3<T>, a1: Vec3<T>, b0: Vec3<T>, b1: Vec3<T>) -> SegmentClosest<T> {
    let zero = T::zero();
    let one = T::one();
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let r = a0 - b0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = T::epsilon() * T::lit(16.0);
    let clamp01 = |v: T| v.max(zero).min(one);

    let (s, t) = if a <= eps && e <= eps {
        (zero, zero)
    } else if a <= eps {
        (zero, clamp01(f / e))
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            (clamp01(-c / a), zero)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            // parallel segments: any s works, pick the start of a
            let mut s = if denom > eps * a * e { clamp01((b * f - c * e) / denom) } else { zero };
            let mut t = (b * s + f) / e;
            if t < zero {
                t = zero;
                s = clamp01(-c / a);
            } else if t > one {
                t = one;
                s = clamp01((b - c) / a);
            }
            (s, t)
        }
    };
    let pa = a0 + d1 * s;
    let pb = b0 + d2 * t;
    SegmentClosest { distance: pa.distance(&pb), s, t, point_on_a: pa, point_on_b: pb }
}

/// Distance from a point to the infinite line through `l0` and `l1`.
pub fn point_line_distance<T: Scalar>(p: Vec3<T>, l0: Vec3<T>, l1: Vec3<T>) -> T {
    let d = l1 - l0;
    let len = d.norm();
    if len <= T::epsilon() {
        return p.distance(&l0);
    }
    (p - l0).cross(&d).norm() / len
}

/// Closest point to `p` on segment `s0s1` and its parameter.
pub fn closest_point_on_segment<T: Scalar>(p: Vec3<T>, s0: Vec3<T>, s1: Vec3<T>) -> (Vec3<T>, T) {
    let d = s1 - s0;
    let l2 = d.norm_squared();
    if l2 <= T::epsilon() {
        return (s0, T::zero());
    }
    let u = ((p - s0).dot(&d) / l2).max(T::zero()).min(T::one());
    (s0 + d * u, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn parallel_offset() {
        let (d, p) = segment_segment_distance(v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(1., 1., 0.));
        assert!((d - 1.0).abs() < 1e-12);
        assert!((p.y - 1.0).abs() < 1e-12 && p.x >= 0.0 && p.x <= 1.0);
    }

    #[test]
    fn identical_segments() {
        let (d, _) = segment_segment_distance(v(0., 0., 0.), v(1., 2., 3.), v(0., 0., 0.), v(1., 2., 3.));
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn disjoint_collinear_offset() {
        let (d, p) = segment_segment_distance(v(0., 0., 0.), v(1., 0., 0.), v(2., 1., 0.), v(3., 1., 0.));
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(p.distance(&v(2., 1., 0.)) < 1e-12);
    }

    #[test]
    fn crossing_segments_touch() {
        let c = closest_points(v(-1., 0., 0.), v(1., 0., 0.), v(0., -1., 0.), v(0., 1., 0.));
        assert!(c.distance < 1e-12);
        assert!((c.s - 0.5).abs() < 1e-12 && (c.t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_segments() {
        let (d, p) = segment_segment_distance(v(0., 0., 0.), v(0., 0., 0.), v(3., 4., 0.), v(3., 4., 0.));
        assert!((d - 5.0).abs() < 1e-12);
        assert_eq!(p, v(3., 4., 0.));
        let (d, p) = segment_segment_distance(v(0.5, 1., 0.), v(0.5, 1., 0.), v(0., 0., 0.), v(1., 0., 0.));
        assert!((d - 1.0).abs() < 1e-12 && p.distance(&v(0.5, 0., 0.)) < 1e-12);
    }

    #[test]
    fn point_line() {
        assert!((point_line_distance(v(0., 2., 0.), v(-1., 0., 0.), v(5., 0., 0.)) - 2.0).abs() < 1e-12);
    }
}
