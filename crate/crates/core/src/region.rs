use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Axis-aligned box, closed on every face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    pub fn centered(center: Vec3<T>, half: Vec3<T>) -> Self {
        Self::new(center - half, center + half)
    }

    #[inline]
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn volume(&self) -> T {
        let e = self.max - self.min;
        e.x.max(T::zero()) * e.y.max(T::zero()) * e.z.max(T::zero())
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn half_extents(&self) -> Vec3<T> {
        (self.max - self.min) * T::lit(0.5)
    }

    pub fn padded(&self, pad: T) -> Self {
        let p = Vec3::new(pad, pad, pad);
        Self::new(self.min - p, self.max + p)
    }

    pub fn intersects(&self, o: &Self) -> bool {
        self.min.x <= o.max.x
            && self.max.x >= o.min.x
            && self.min.y <= o.max.y
            && self.max.y >= o.min.y
            && self.min.z <= o.max.z
            && self.max.z >= o.min.z
    }
}

/// Box with an arbitrary orthonormal frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox<T> {
    pub center: Vec3<T>,
    /// Orthonormal frame; `axes[0]` is the box's length direction.
    pub axes: [Vec3<T>; 3],
    pub half_extents: Vec3<T>,
}

impl<T: Scalar> OrientedBox<T> {
    #[inline]
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        let d = *p - self.center;
        d.dot(&self.axes[0]).abs() <= self.half_extents.x
            && d.dot(&self.axes[1]).abs() <= self.half_extents.y
            && d.dot(&self.axes[2]).abs() <= self.half_extents.z
    }

    /// Conservative world-aligned bounds, padded so that rounding in
    /// [`Self::contains`] can never accept a point outside them.
    pub fn bounding_aabb(&self) -> Aabb<T> {
        let h = self.half_extents;
        let ext = |k: usize| self.axes[0][k].abs() * h.x + self.axes[1][k].abs() * h.y + self.axes[2][k].abs() * h.z;
        let half = Vec3::new(ext(0), ext(1), ext(2));
        let scale = self.center.x.abs().max(self.center.y.abs()).max(self.center.z.abs()) + h.x + h.y + h.z;
        let pad = scale * T::epsilon() * T::lit(64.0);
        Aabb::centered(self.center, half).padded(pad)
    }

    pub fn volume(&self) -> T {
        let h = self.half_extents * T::lit(2.0);
        h.x * h.y * h.z
    }
}

/// Region accepted by cardinality queries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region<T> {
    Axis(Aabb<T>),
    Oriented(OrientedBox<T>),
}

impl<T: Scalar> Region<T> {
    #[inline]
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        match self {
            Region::Axis(b) => b.contains(p),
            Region::Oriented(b) => b.contains(p),
        }
    }

    pub fn bounding_aabb(&self) -> Aabb<T> {
        match self {
            Region::Axis(b) => *b,
            Region::Oriented(b) => b.bounding_aabb(),
        }
    }

    pub fn volume(&self) -> T {
        match self {
            Region::Axis(b) => b.volume(),
            Region::Oriented(b) => b.volume(),
        }
    }
}

impl<T> From<Aabb<T>> for Region<T> {
    fn from(b: Aabb<T>) -> Self {
        Region::Axis(b)
    }
}

impl<T> From<OrientedBox<T>> for Region<T> {
    fn from(b: OrientedBox<T>) -> Self {
        Region::Oriented(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::direction_from_angles;

    #[test]
    fn oriented_box_inside_its_aabb() {
        let x = direction_from_angles(0.6f64, 0.2);
        let y = Vec3::unit_z().cross(&x).try_normalize(1e-12).unwrap();
        let z = x.cross(&y);
        let b = OrientedBox {
            center: Vec3::new(1.0, -2.0, 0.5),
            axes: [x, y, z],
            half_extents: Vec3::new(0.3, 0.25, 0.25),
        };
        let bb = b.bounding_aabb();
        for i in 0..11 {
            for j in 0..11 {
                for k in 0..11 {
                    let f = |n: usize| -1.0 + 0.2 * n as f64;
                    let p = b.center + x * (0.3 * f(i)) + y * (0.25 * f(j)) + z * (0.25 * f(k));
                    assert!(bb.contains(&p));
                }
            }
        }
        assert!(b.contains(&b.center));
        assert!(!b.contains(&(b.center + x * 0.31)));
    }

    #[test]
    fn aabb_is_closed() {
        let b = Aabb::new(Vec3::<f64>::zeros(), Vec3::new(1.0, 1.0, 1.0));
        assert!(b.contains(&Vec3::new(1.0, 0.0, 1.0)));
        assert!(!b.contains(&Vec3::new(1.0 + 1e-12, 0.0, 1.0)));
    }
}
