//! Limited field-of-view surface sampler standing in for a depth camera.
//!
//! Points are placed deterministically on the obstacle side facing the
//! sensor and kept if they fall inside the view cone and range. Each point
//! carries its obstacle's true velocity. Occlusion is ignored.

use ras_core::Vec3;

use crate::scenario::SensorSpec;
use crate::world::{Obstacle, Shape, World};

type V = Vec3<f64>;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sensor {
    pub half_fov: f64,
    pub range: f64,
    pub points_per_face: usize,
}

impl Sensor {
    pub fn new(spec: &SensorSpec) -> Self {
        Self { half_fov: (spec.fov_deg * 0.5).to_radians(), range: spec.range, points_per_face: spec.points_per_face }
    }

    /// Whether `q` is inside the closed view cone of a sensor at `origin`
    /// looking along unit `forward`.
    pub fn sees(&self, origin: &V, forward: &V, q: &V) -> bool {
        let d = *q - *origin;
        let r = d.norm();
        if r > self.range {
            return false;
        }
        if r == 0.0 || self.half_fov >= std::f64::consts::PI {
            return true;
        }
        let cos = (d.dot(forward) / r).clamp(-1.0, 1.0);
        cos.acos() <= self.half_fov
    }

    /// Observed surface points and their velocities.
    pub fn sense(&self, world: &World, origin: &V, forward: &V) -> (Vec<V>, Vec<V>) {
        let mut points = Vec::new();
        let mut velocities = Vec::new();
        for o in &world.obstacles {
            for q in self.surface_samples(o, origin) {
                if self.sees(origin, forward, &q) {
                    points.push(q);
                    velocities.push(o.velocity);
                }
            }
        }
        (points, velocities)
    }

    /// Samples on the faces turned toward `origin`: a spiral over the facing
    /// hemisphere of a sphere, a square grid on each visible box face.
    pub fn surface_samples(&self, o: &Obstacle, origin: &V) -> Vec<V> {
        let n = self.points_per_face;
        match o.shape {
            Shape::Sphere { radius } => {
                let Some(axis) = (*origin - o.center).try_normalize(1e-12) else {
                    return Vec::new();
                };
                let (u, w) = orthonormal_pair(&axis);
                (0..n)
                    .map(|k| {
                        let z = 1.0 - (k as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).max(0.0).sqrt();
                        let phi = k as f64 * GOLDEN_ANGLE;
                        o.center + (axis * z + u * (r * phi.cos()) + w * (r * phi.sin())) * radius
                    })
                    .collect()
            }
            Shape::Box { half } => {
                let m = (n as f64).sqrt().ceil() as usize;
                let mut out = Vec::new();
                for axis in 0..3 {
                    for sign in [-1.0, 1.0] {
                        let mut normal = [0.0; 3];
                        normal[axis] = sign;
                        let normal = V::from(normal);
                        let face_center = o.center + normal.component_mul(&half);
                        if normal.dot(&(*origin - face_center)) <= 0.0 {
                            continue;
                        }
                        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                        for i in 0..m {
                            for j in 0..m {
                                let mut q = face_center.to_array();
                                q[a] += half[a] * (2.0 * (i as f64 + 0.5) / m as f64 - 1.0);
                                q[b] += half[b] * (2.0 * (j as f64 + 0.5) / m as f64 - 1.0);
                                out.push(V::from(q));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

fn orthonormal_pair(axis: &V) -> (V, V) {
    let helper = if axis.z.abs() < 0.9 { V::unit_z() } else { V::unit_x() };
    let u = axis.cross(&helper).try_normalize(1e-12).unwrap_or_else(V::unit_y);
    (u, axis.cross(&u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ras_core::Aabb;

    fn world_with(o: Obstacle) -> World {
        World { bounds: Aabb::new(V::from([-50.0; 3]), V::from([50.0; 3])), obstacles: vec![o], time: 0.0 }
    }

    fn sensor() -> Sensor {
        Sensor::new(&SensorSpec::default())
    }

    #[test]
    fn obstacle_behind_is_unseen() {
        let w = world_with(Obstacle::new_static(Shape::Sphere { radius: 0.5 }, V::new(-3.0, 0.0, 0.0)));
        assert!(sensor().sense(&w, &V::zeros(), &V::unit_x()).0.is_empty());
    }

    #[test]
    fn sphere_in_view_yields_full_hemisphere() {
        let w = world_with(Obstacle::new_static(Shape::Sphere { radius: 0.5 }, V::new(4.0, 0.0, 0.0)));
        let s = sensor();
        let (pts, vel) = s.sense(&w, &V::zeros(), &V::unit_x());
        assert_eq!(pts.len(), s.points_per_face);
        assert_eq!(vel.len(), pts.len());
        for p in &pts {
            assert!((p.distance(&V::new(4.0, 0.0, 0.0)) - 0.5).abs() < 1e-12);
            assert!(p.x <= 4.0 && p.norm() <= s.range);
        }
    }

    #[test]
    fn beyond_range_is_unseen() {
        let s = sensor();
        let w = world_with(Obstacle::new_static(Shape::Sphere { radius: 0.5 }, V::new(1.5 * s.range, 0.0, 0.0)));
        assert!(s.sense(&w, &V::zeros(), &V::unit_x()).0.is_empty());
    }

    #[test]
    fn box_shows_only_facing_sides() {
        let o = Obstacle::new_static(Shape::Box { half: V::new(0.5, 0.5, 0.5) }, V::new(3.0, 0.0, 0.0));
        let pts = sensor().surface_samples(&o, &V::zeros());
        assert_eq!(pts.len(), 36);
        assert!(pts.iter().all(|p| (p.x - 2.5).abs() < 1e-12));
    }
}
