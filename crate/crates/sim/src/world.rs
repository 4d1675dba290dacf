//! Scripted obstacles and ground-truth geometry.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ras_core::{Aabb, Vec3};

use crate::scenario::{ObstacleSpec, Scenario, ShapeKind};

type V = Vec3<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half: V },
}

#[derive(Clone, Debug, PartialEq)]
enum Motion {
    Static,
    Constant(V),
    /// Targets visited in order; `next` indexes the current target.
    Script {
        targets: Vec<V>,
        next: usize,
        speed: f64,
        repeat: bool,
        done: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    pub center: V,
    /// Velocity at the current world time.
    pub velocity: V,
    /// Motion starts at this time.
    pub start_time: f64,
    motion: Motion,
}

impl Obstacle {
    pub fn new_static(shape: Shape, center: V) -> Self {
        Self { shape, center, velocity: V::zeros(), start_time: 0.0, motion: Motion::Static }
    }

    pub fn new_constant(shape: Shape, center: V, velocity: V, start_time: f64) -> Self {
        let mut o = Self { shape, center, velocity: V::zeros(), start_time, motion: Motion::Constant(velocity) };
        o.refresh_velocity(0.0);
        o
    }

    /// Visits `waypoints` at `speed`; with `repeat` it returns to `center` and
    /// loops.
    pub fn new_scripted(shape: Shape, center: V, waypoints: Vec<V>, speed: f64, repeat: bool, start_time: f64) -> Self {
        let mut targets = waypoints;
        if repeat {
            targets.push(center);
        }
        let done = targets.is_empty();
        let mut o = Self {
            shape,
            center,
            velocity: V::zeros(),
            start_time,
            motion: Motion::Script { targets, next: 0, speed, repeat, done },
        };
        o.refresh_velocity(0.0);
        o
    }

    fn from_spec(spec: &ObstacleSpec, extra_delay: f64) -> Self {
        let shape = match spec.shape {
            ShapeKind::Sphere => Shape::Sphere { radius: spec.radius.unwrap_or(0.0) },
            ShapeKind::Box => Shape::Box { half: spec.size.unwrap_or_else(V::zeros) * 0.5 },
        };
        let start = spec.start_delay + extra_delay;
        if let Some(v) = spec.velocity {
            Self::new_constant(shape, spec.center, v, start)
        } else if !spec.waypoints.is_empty() {
            Self::new_scripted(shape, spec.center, spec.waypoints.clone(), spec.speed, spec.repeat, start)
        } else {
            Self::new_static(shape, spec.center)
        }
    }

    pub fn is_dynamic(&self) -> bool {
        !matches!(self.motion, Motion::Static)
    }

    fn refresh_velocity(&mut self, now: f64) {
        self.velocity = if now < self.start_time {
            V::zeros()
        } else {
            match &self.motion {
                Motion::Static => V::zeros(),
                Motion::Constant(v) => *v,
                Motion::Script { done: true, .. } => V::zeros(),
                Motion::Script { targets, next, speed, .. } => {
                    (targets[*next] - self.center).try_normalize(1e-12).map_or_else(V::zeros, |d| d * *speed)
                }
            }
        };
    }

    /// Advances from `now` to `now + dt`. A waypoint reached mid-step
    /// continues along the next leg with the leftover distance.
    fn advance(&mut self, now: f64, dt: f64) {
        let moving = (now + dt - now.max(self.start_time)).max(0.0);
        match &mut self.motion {
            Motion::Static => {}
            Motion::Constant(v) => self.center += *v * moving,
            Motion::Script { targets, next, speed, repeat, done } => {
                let mut left = *speed * moving;
                while !*done && left > 0.0 {
                    let to = targets[*next] - self.center;
                    let d = to.norm();
                    if d <= left {
                        self.center = targets[*next];
                        left -= d;
                        *next += 1;
                        if *next == targets.len() {
                            if *repeat {
                                *next = 0;
                            } else {
                                *done = true;
                            }
                        }
                    } else {
                        self.center += to * (left / d);
                        left = 0.0;
                    }
                }
            }
        }
        self.refresh_velocity(now + dt);
    }

    /// Bounding box of the obstacle volume.
    pub fn aabb(&self) -> Aabb<f64> {
        let half = match self.shape {
            Shape::Sphere { radius } => V::new(radius, radius, radius),
            Shape::Box { half } => half,
        };
        Aabb::new(self.center - half, self.center + half)
    }

    /// Euclidean distance between the obstacle and an axis-aligned box
    /// centred at `p` with half extents `half`; 0 when they touch or overlap.
    pub fn distance_to_box(&self, p: &V, half: &V) -> f64 {
        match self.shape {
            Shape::Sphere { radius } => {
                let q = clamp_to_box(&self.center, p, half);
                (q.distance(&self.center) - radius).max(0.0)
            }
            Shape::Box { half: h } => {
                let gap = |c: f64, o: f64, a: f64, b: f64| ((c - o).abs() - (a + b)).max(0.0);
                V::new(
                    gap(p.x, self.center.x, half.x, h.x),
                    gap(p.y, self.center.y, half.y, h.y),
                    gap(p.z, self.center.z, half.z, h.z),
                )
                .norm()
            }
        }
    }

    /// Closed intersection test with the box centred at `p`.
    pub fn intersects_box(&self, p: &V, half: &V) -> bool {
        match self.shape {
            Shape::Sphere { radius } => clamp_to_box(&self.center, p, half).distance(&self.center) <= radius,
            Shape::Box { half: h } => {
                (p.x - self.center.x).abs() <= half.x + h.x
                    && (p.y - self.center.y).abs() <= half.y + h.y
                    && (p.z - self.center.z).abs() <= half.z + h.z
            }
        }
    }

    /// Unit direction pushing a body at `p` out of the obstacle.
    pub fn escape_direction(&self, p: &V) -> V {
        let out = match self.shape {
            Shape::Sphere { .. } => (*p - self.center).try_normalize(1e-9),
            Shape::Box { half } => {
                let d = *p - self.center;
                let slack = [half.x - d.x.abs(), half.y - d.y.abs(), half.z - d.z.abs()];
                let axis = (0..3).min_by(|a, b| slack[*a].total_cmp(&slack[*b])).unwrap_or(0);
                let mut n = [0.0; 3];
                n[axis] = if d[axis] < 0.0 { -1.0 } else { 1.0 };
                Some(V::from(n))
            }
        };
        out.unwrap_or_else(V::unit_z)
    }
}

fn clamp_to_box(q: &V, c: &V, half: &V) -> V {
    V::new(
        q.x.clamp(c.x - half.x, c.x + half.x),
        q.y.clamp(c.y - half.y, c.y + half.y),
        q.z.clamp(c.z - half.z, c.z + half.z),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub bounds: Aabb<f64>,
    pub obstacles: Vec<Obstacle>,
    pub time: f64,
}

impl World {
    /// Builds the world for one seed; the seed only draws start-delay jitter.
    pub fn from_scenario(s: &Scenario, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let obstacles = s
            .obstacles
            .iter()
            .map(|o| {
                let jitter = if o.delay_jitter > 0.0 { rng.random_range(0.0..=o.delay_jitter) } else { 0.0 };
                Obstacle::from_spec(o, jitter)
            })
            .collect();
        Self { bounds: Aabb::new(s.world.min, s.world.max), obstacles, time: 0.0 }
    }

    pub fn step(&mut self, dt: f64) {
        for o in &mut self.obstacles {
            o.advance(self.time, dt);
        }
        self.time += dt;
    }

    /// Moves every obstacle to absolute time `t` in one step.
    pub fn step_to(&mut self, t: f64) {
        if t > self.time {
            for o in &mut self.obstacles {
                o.advance(self.time, t - self.time);
            }
        }
        self.time = t;
    }

    /// Index of the first obstacle the body box intersects.
    pub fn collision(&self, p: &V, body: &V) -> Option<usize> {
        let half = *body * 0.5;
        self.obstacles.iter().position(|o| o.intersects_box(p, &half))
    }

    /// Smallest body-to-obstacle distance (infinite in an empty world).
    pub fn clearance(&self, p: &V, body: &V) -> f64 {
        let half = *body * 0.5;
        self.obstacles.iter().map(|o| o.distance_to_box(p, &half)).fold(f64::INFINITY, f64::min)
    }
}

/// True iff the vehicle's body box intersects any obstacle (closed).
pub fn ground_truth_collision(p: &V, world: &World, body: &V) -> bool {
    world.collision(p, body).is_some()
}
