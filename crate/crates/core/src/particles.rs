//! Weighted particle representation of obstacles.
//!
//! Each particle is a point-object hypothesis carrying a weight; the weight sum
//! inside a region is the expected number of point objects there. Dynamic
//! particles move with constant velocity, static ones stay put. Queries at a
//! future time offset use the predicted positions.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::rc::Rc;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PlanError, Result};
use crate::region::{Aabb, Region};
use crate::scalar::Scalar;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    Static,
    Dynamic,
}

impl fmt::Display for MotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionModel::Static => "static",
            MotionModel::Dynamic => "dynamic",
        })
    }
}

impl FromStr for MotionModel {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" | "s" | "0" => Ok(MotionModel::Static),
            "dynamic" | "d" | "1" => Ok(MotionModel::Dynamic),
            _ => Err(invalid(format!("unknown motion model '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedParticle<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub weight: T,
    pub model: MotionModel,
}

impl<T: Scalar> WeightedParticle<T> {
    pub fn new_static(position: Vec3<T>, weight: T) -> Self {
        Self { position, velocity: Vec3::zeros(), weight, model: MotionModel::Static }
    }

    pub fn new_dynamic(position: Vec3<T>, velocity: Vec3<T>, weight: T) -> Self {
        Self { position, velocity, weight, model: MotionModel::Dynamic }
    }

    /// Position after `dt` seconds under the particle's motion model.
    #[inline]
    pub fn predicted_position(&self, dt: T) -> Vec3<T> {
        match self.model {
            MotionModel::Static => self.position,
            MotionModel::Dynamic => self.position + self.velocity * dt,
        }
    }
}

/// Advances a particle by `dt` seconds. Static particles are returned unchanged.
pub fn predict_particle<T: Scalar>(p: &WeightedParticle<T>, dt: T) -> WeightedParticle<T> {
    WeightedParticle { position: p.predicted_position(dt), ..*p }
}

/// Parameters of point-cloud ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionConfig<T> {
    /// Per-axis standard deviation of sampled velocity hypotheses (m/s).
    pub sigma_v: T,
    pub static_fraction: T,
    pub particles_per_point: usize,
}

impl<T: Scalar> Default for PredictionConfig<T> {
    fn default() -> Self {
        Self { sigma_v: T::lit(0.3), static_fraction: T::lit(0.5), particles_per_point: 4 }
    }
}

impl<T: Scalar> PredictionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_v >= T::zero()) {
            return Err(invalid("sigma_v must be >= 0"));
        }
        if !(self.static_fraction >= T::zero() && self.static_fraction <= T::one()) {
            return Err(invalid("static_fraction must lie in [0, 1]"));
        }
        if self.particles_per_point == 0 {
            return Err(invalid("particles_per_point must be >= 1"));
        }
        Ok(())
    }

    /// Number of static particles spawned per point.
    pub fn static_count(&self) -> usize {
        let n = T::from_usize_lossy(self.particles_per_point) * self.static_fraction;
        n.round().to_usize().unwrap_or(0).min(self.particles_per_point)
    }
}

/// Uniform-grid index in compressed row form. Items outside the grid extent
/// are kept in an overflow list that every query scans.
#[derive(Clone, Debug)]
pub(crate) struct SpatialGrid<T> {
    origin: Vec3<T>,
    bin: T,
    dims: [usize; 3],
    cell_start: Vec<u32>,
    items: Vec<u32>,
    overflow: Vec<u32>,
}

impl<T: Scalar> SpatialGrid<T> {
    pub(crate) fn build(bounds: &Aabb<T>, bin: T, positions: impl Iterator<Item = Vec3<T>>) -> Self {
        let extent = bounds.max - bounds.min;
        let dim = |e: T| (e / bin).ceil().to_usize().unwrap_or(1).clamp(1, 1 << 10);
        let dims = [dim(extent.x), dim(extent.y), dim(extent.z)];
        let mut grid = Self {
            origin: bounds.min,
            bin,
            dims,
            cell_start: vec![0; dims[0] * dims[1] * dims[2] + 1],
            items: Vec::new(),
            overflow: Vec::new(),
        };
        let cells: Vec<Option<usize>> = positions.map(|p| grid.cell_of(&p)).collect();
        for c in cells.iter().flatten() {
            grid.cell_start[c + 1] += 1;
        }
        for i in 1..grid.cell_start.len() {
            grid.cell_start[i] += grid.cell_start[i - 1];
        }
        let mut cursor = grid.cell_start.clone();
        grid.items = vec![0; cells.iter().flatten().count()];
        for (idx, c) in cells.iter().enumerate() {
            match c {
                Some(c) => {
                    grid.items[cursor[*c] as usize] = idx as u32;
                    cursor[*c] += 1;
                }
                None => grid.overflow.push(idx as u32),
            }
        }
        grid
    }

    #[inline]
    fn coord(&self, v: T, o: T) -> Option<i64> {
        ((v - o) / self.bin).floor().to_i64()
    }

    fn cell_of(&self, p: &Vec3<T>) -> Option<usize> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let c = self.coord(p[k], self.origin[k])?;
            if c < 0 || c as usize >= self.dims[k] {
                return None;
            }
            idx[k] = c as usize;
        }
        Some((idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0])
    }

    /// Appends every item whose cell overlaps `q`, plus the overflow list.
    pub(crate) fn candidates(&self, q: &Aabb<T>, out: &mut Vec<u32>) {
        out.extend_from_slice(&self.overflow);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for k in 0..3 {
            let (Some(a), Some(b)) = (self.coord(q.min[k], self.origin[k]), self.coord(q.max[k], self.origin[k]))
            else {
                return;
            };
            if b < 0 || a >= self.dims[k] as i64 {
                return;
            }
            lo[k] = a.max(0) as usize;
            hi[k] = (b as usize).min(self.dims[k] - 1);
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                let row = (z * self.dims[1] + y) * self.dims[0];
                let s = self.cell_start[row + lo[0]] as usize;
                let e = self.cell_start[row + hi[0] + 1] as usize;
                out.extend_from_slice(&self.items[s..e]);
            }
        }
    }
}

/// Snapshot of the particle set with a spatial index over current positions.
#[derive(Clone, Debug)]
pub struct ParticleField<T> {
    particles: Vec<WeightedParticle<T>>,
    snapshot_time: T,
    bin_size: T,
    bounds: Aabb<T>,
    grid: SpatialGrid<T>,
    has_dynamic: bool,
    /// Per-axis largest speed among dynamic particles.
    max_speed: Vec3<T>,
}

impl<T: Scalar> ParticleField<T> {
    pub const DEFAULT_BIN_SIZE: f64 = 0.5;

    pub fn empty(bounds: Aabb<T>, bin_size: T, snapshot_time: T) -> Result<Self> {
        Self::from_particles(Vec::new(), bounds, bin_size, snapshot_time)
    }

    /// Builds a field; particles outside `bounds` are culled.
    pub fn from_particles(
        mut particles: Vec<WeightedParticle<T>>,
        bounds: Aabb<T>,
        bin_size: T,
        snapshot_time: T,
    ) -> Result<Self> {
        if !(bin_size > T::zero()) {
            return Err(invalid("bin_size must be positive"));
        }
        if !(bounds.volume() > T::zero()) {
            return Err(invalid("field bounds must have positive volume"));
        }
        if let Some(bad) = particles.iter().find(|p| !(p.weight >= T::zero()) || !p.weight.is_finite()) {
            return Err(invalid(format!("particle weight must be finite and >= 0, got {}", bad.weight)));
        }
        if particles.iter().any(|p| !p.position.is_finite() || !p.velocity.is_finite()) {
            return Err(invalid("non-finite particle state"));
        }
        particles.retain(|p| bounds.contains(&p.position));
        let grid = SpatialGrid::build(&bounds, bin_size, particles.iter().map(|p| p.position));
        let has_dynamic = particles.iter().any(|p| p.model == MotionModel::Dynamic);
        let max_speed =
            particles.iter().filter(|p| p.model == MotionModel::Dynamic).fold(Vec3::zeros(), |m: Vec3<T>, p| {
                Vec3::new(m.x.max(p.velocity.x.abs()), m.y.max(p.velocity.y.abs()), m.z.max(p.velocity.z.abs()))
            });
        Ok(Self { particles, snapshot_time, bin_size, bounds, grid, has_dynamic, max_speed })
    }

    pub fn particles(&self) -> &[WeightedParticle<T>] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn snapshot_time(&self) -> T {
        self.snapshot_time
    }

    pub fn bin_size(&self) -> T {
        self.bin_size
    }

    pub fn bounds(&self) -> &Aabb<T> {
        &self.bounds
    }

    pub fn total_weight(&self) -> T {
        self.particles.iter().fold(T::zero(), |acc, p| acc + p.weight)
    }

    /// Indices of particles whose current position falls in the grid cells
    /// overlapping `q` (a superset of the particles inside `q`), ascending.
    pub fn indexed_candidates(&self, q: &Aabb<T>) -> Vec<u32> {
        let mut out = Vec::new();
        self.grid.candidates(q, &mut out);
        out.sort_unstable();
        out
    }

    /// Expected number of point objects inside `region` after `dt` seconds.
    ///
    /// Dynamic fields are queried on the snapshot index with the box padded
    /// by the farthest any particle can move in `dt`.
    pub fn cardinality_expectation(&self, region: &Region<T>, dt: T) -> T {
        if dt == T::zero() || !self.has_dynamic {
            return sum_in_region(&self.particles, &self.grid, region, dt);
        }
        let query = padded_query(region, self.max_speed, dt.abs());
        sum_candidates(&self.particles, &self.grid, &query, region, dt)
    }

    fn predicted_grid(&self, dt: T) -> SpatialGrid<T> {
        SpatialGrid::build(&self.bounds, self.bin_size, self.particles.iter().map(|p| p.predicted_position(dt)))
    }

    /// Spawns `particles_per_point` particles per observed point.
    ///
    /// A `static_fraction` share is static; the rest are dynamic with velocity
    /// equal to the observed velocity plus per-axis Gaussian noise. Each point
    /// contributes total weight 1.
    pub fn ingest_point_cloud<R: Rng + ?Sized>(
        &self,
        points: &[Vec3<T>],
        velocities: &[Vec3<T>],
        cfg: &PredictionConfig<T>,
        rng: &mut R,
    ) -> Result<Self> {
        if points.len() != velocities.len() {
            return Err(invalid(format!("{} points but {} velocities", points.len(), velocities.len())));
        }
        cfg.validate()?;
        if points.is_empty() {
            return Ok(self.clone());
        }
        let n = cfg.particles_per_point;
        let n_static = cfg.static_count();
        let w = T::one() / T::from_usize_lossy(n);
        let mut particles = self.particles.clone();
        particles.reserve(points.len() * n);
        for (p, v) in points.iter().zip(velocities) {
            for _ in 0..n_static {
                particles.push(WeightedParticle::new_static(*p, w));
            }
            for _ in n_static..n {
                let mut noise = [T::zero(); 3];
                for c in noise.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *c = T::lit(g) * cfg.sigma_v;
                }
                particles.push(WeightedParticle::new_dynamic(*p, *v + Vec3::from(noise), w));
            }
        }
        Self::from_particles(particles, self.bounds, self.bin_size, self.snapshot_time)
    }

    /// Scales all weights by `decay` and drops particles that end up below
    /// `min_weight`, at zero weight, or outside the bounds.
    pub fn decay_and_cull(&self, decay: T, min_weight: T) -> Result<Self> {
        if !(decay >= T::zero() && decay <= T::one()) {
            return Err(invalid("decay must lie in [0, 1]"));
        }
        let particles = self
            .particles
            .iter()
            .map(|p| WeightedParticle { weight: p.weight * decay, ..*p })
            .filter(|p| p.weight > T::zero() && p.weight >= min_weight)
            .collect();
        Self::from_particles(particles, self.bounds, self.bin_size, self.snapshot_time)
    }

    /// Propagates every particle to `new_time` and re-centres the map bounds.
    pub fn advance(&self, new_time: T, bounds: Aabb<T>) -> Result<Self> {
        let dt = (new_time - self.snapshot_time).max(T::zero());
        let particles = self.particles.iter().map(|p| predict_particle(p, dt)).collect();
        Self::from_particles(particles, bounds, self.bin_size, new_time)
    }

    /// Plain-text dump, one `x y z vx vy vz w model` record per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# x y z vx vy vz w model")?;
        for p in &self.particles {
            writeln!(
                w,
                "{} {} {} {} {} {} {} {}",
                p.position.x, p.position.y, p.position.z, p.velocity.x, p.velocity.y, p.velocity.z, p.weight, p.model
            )?;
        }
        Ok(())
    }
}

/// Reads particles from the plain-text dump format.
pub fn read_particle_dump<T: Scalar, R: BufRead>(r: R) -> Result<Vec<WeightedParticle<T>>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| invalid(e.to_string()))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(invalid(format!("line {}: expected 8 fields, found {}", lineno + 1, fields.len())));
        }
        let mut nums = [T::zero(); 7];
        for (k, f) in fields[..7].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| invalid(format!("line {}: bad number '{f}'", lineno + 1)))?;
            nums[k] = T::lit(v);
        }
        let model = fields[7].parse().map_err(|e: PlanError| invalid(format!("line {}: {e}", lineno + 1)))?;
        out.push(WeightedParticle {
            position: Vec3::new(nums[0], nums[1], nums[2]),
            velocity: Vec3::new(nums[3], nums[4], nums[5]),
            weight: nums[6],
            model,
        });
    }
    Ok(out)
}

fn sum_in_region<T: Scalar>(particles: &[WeightedParticle<T>], grid: &SpatialGrid<T>, region: &Region<T>, dt: T) -> T {
    sum_candidates(particles, grid, &region.bounding_aabb(), region, dt)
}

/// Bounding box of `region` grown by the per-axis distance covered at
/// `max_speed` over `gap` seconds, with slack for rounding.
fn padded_query<T: Scalar>(region: &Region<T>, max_speed: Vec3<T>, gap: T) -> Aabb<T> {
    let pad = max_speed * (gap * T::lit(1.0 + 1e-9)) + Vec3::from([T::lit(1e-9); 3]);
    let b = region.bounding_aabb();
    Aabb::new(b.min - pad, b.max + pad)
}

/// Sums, in ascending index order, the weights of `grid` candidates for
/// `query` whose position `dt` ahead lies in `region`.
fn sum_candidates<T: Scalar>(
    particles: &[WeightedParticle<T>],
    grid: &SpatialGrid<T>,
    query: &Aabb<T>,
    region: &Region<T>,
    dt: T,
) -> T {
    let mut cand = Vec::new();
    grid.candidates(query, &mut cand);
    cand.sort_unstable();
    let mut sum = T::zero();
    for i in cand {
        let p = &particles[i as usize];
        if region.contains(&p.predicted_position(dt)) {
            sum = sum + p.weight;
        }
    }
    sum
}

/// Anything that answers predicted cardinality queries.
pub trait OccupancyQuery<T: Scalar> {
    /// Weight sum of particles whose position `dt` seconds after the snapshot
    /// lies in `region`.
    fn expected_count(&self, region: &Region<T>, dt: T) -> T;
}

impl<T: Scalar> OccupancyQuery<T> for ParticleField<T> {
    fn expected_count(&self, region: &Region<T>, dt: T) -> T {
        self.cardinality_expectation(region, dt)
    }
}

/// Read-only view over one field snapshot that memoises predicted-position
/// indices on a coarse time lattice. A query at `dt` uses the index of the
/// nearest lattice time with its box padded by the largest distance any
/// particle moves in between, then tests exact predicted positions, so
/// results equal the unbucketed ones bit for bit.
pub struct PredictionCache<'a, T: Scalar> {
    field: &'a ParticleField<T>,
    grids: RefCell<HashMap<u64, Rc<SpatialGrid<T>>>>,
}

impl<'a, T: Scalar> PredictionCache<'a, T> {
    /// Spacing of the time lattice (s).
    pub const BUCKET: f64 = 0.25;

    pub fn new(field: &'a ParticleField<T>) -> Self {
        Self { field, grids: RefCell::new(HashMap::new()) }
    }

    pub fn field(&self) -> &'a ParticleField<T> {
        self.field
    }

    fn grid_for(&self, dt: T) -> Rc<SpatialGrid<T>> {
        let key = dt.as_f64().to_bits();
        if let Some(g) = self.grids.borrow().get(&key) {
            return Rc::clone(g);
        }
        let g = Rc::new(self.field.predicted_grid(dt));
        self.grids.borrow_mut().insert(key, Rc::clone(&g));
        g
    }
}

impl<T: Scalar> OccupancyQuery<T> for PredictionCache<'_, T> {
    fn expected_count(&self, region: &Region<T>, dt: T) -> T {
        if dt == T::zero() || !self.field.has_dynamic {
            return sum_in_region(&self.field.particles, &self.field.grid, region, dt);
        }
        let bucket = T::lit(Self::BUCKET);
        let lattice = (dt / bucket).round() * bucket;
        let grid = self.grid_for(lattice);
        let query = padded_query(region, self.field.max_speed, (dt - lattice).abs());
        sum_candidates(&self.field.particles, &grid, &query, region, dt)
    }
}
