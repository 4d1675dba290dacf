//! Scenario configuration.
//!
//! Scenarios are TOML documents. Every section is optional and falls back to
//! defaults; unknown keys are rejected. Overrides use dotted keys
//! (`planner.delta=0.3`, `obstacles.1.speed=1.5`) and take precedence over the
//! file.

use std::path::{Path, PathBuf};

use ras_core::{FusionConfig, GlobalTrajectory, PlannerConfig, PredictionConfig, RiskConfig, SamplerConfig, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

type V = Vec3<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Run timeout (s).
    pub duration: f64,
    pub physics_rate: f64,
    pub seeds: Vec<u64>,
    pub world: WorldSpec,
    pub obstacles: Vec<ObstacleSpec>,
    pub vehicle: VehicleSpec,
    pub sensor: SensorSpec,
    pub map: MapSpec,
    pub prediction: PredictionConfig<f64>,
    pub planner: PlannerConfig<f64>,
    pub sampler: SamplerConfig<f64>,
    pub risk: RiskConfig<f64>,
    pub fusion: FusionConfig<f64>,
    /// Loaded from `vehicle.global_trajectory` by [`Scenario::load`].
    #[serde(skip)]
    pub global: Option<GlobalTrajectory<f64>>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            duration: 30.0,
            physics_rate: 50.0,
            seeds: vec![0],
            world: WorldSpec::default(),
            obstacles: Vec::new(),
            vehicle: VehicleSpec::default(),
            sensor: SensorSpec::default(),
            map: MapSpec::default(),
            prediction: PredictionConfig::default(),
            planner: PlannerConfig::default(),
            sampler: SamplerConfig::default(),
            risk: RiskConfig::default(),
            fusion: FusionConfig::default(),
            global: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub min: V,
    pub max: V,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self { min: V::new(-10.0, -10.0, 0.0), max: V::new(10.0, 10.0, 4.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere,
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub shape: ShapeKind,
    /// Initial centre.
    pub center: V,
    #[serde(default)]
    pub radius: Option<f64>,
    /// Full edge lengths of a box.
    #[serde(default)]
    pub size: Option<V>,
    /// Constant velocity; exclusive with `waypoints`.
    #[serde(default)]
    pub velocity: Option<V>,
    /// Centre positions visited in order after the initial one.
    #[serde(default)]
    pub waypoints: Vec<V>,
    /// Speed along the waypoint script (m/s).
    #[serde(default)]
    pub speed: f64,
    /// Return to the initial centre after the last waypoint and start over.
    #[serde(default)]
    pub repeat: bool,
    /// The obstacle holds still until this time (s).
    #[serde(default)]
    pub start_delay: f64,
    /// Extra per-seed start delay drawn uniformly from `[0, delay_jitter]`.
    #[serde(default)]
    pub delay_jitter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSpec {
    pub start: V,
    pub start_velocity: V,
    /// Goal position (goal-position mode).
    pub goal: Option<V>,
    /// Goal direction (goal-direction mode); needs `goal_distance`.
    pub goal_direction: Option<V>,
    pub goal_distance: Option<f64>,
    /// Global trajectory file, relative to the scenario file.
    pub global_trajectory: Option<PathBuf>,
    pub goal_tolerance: f64,
    /// Physical body box for collision checks (m).
    pub body: V,
    /// A freeze lasting this long ends the run (s).
    pub freeze_timeout: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            start: V::new(-8.0, 0.0, 1.0),
            start_velocity: V::zeros(),
            goal: Some(V::new(8.0, 0.0, 1.0)),
            goal_direction: None,
            goal_distance: None,
            global_trajectory: None,
            goal_tolerance: 0.5,
            body: V::new(0.3, 0.3, 0.15),
            freeze_timeout: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    /// Full cone angle (deg).
    pub fov_deg: f64,
    pub range: f64,
    pub points_per_face: usize,
    pub rate: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { fov_deg: 90.0, range: 6.0, points_per_face: 36, rate: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSpec {
    /// Local map half extents around the vehicle (m).
    pub half_extent: V,
    pub bin_size: f64,
    /// Weight multiplier applied per sensor frame.
    pub decay: f64,
    pub min_weight: f64,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self { half_extent: V::new(7.0, 7.0, 3.0), bin_size: 0.5, decay: 0.5, min_weight: 0.02 }
    }
}

/// How the vehicle is told where to go.
#[derive(Clone, Debug, PartialEq)]
pub enum GoalSpec {
    Position(V),
    Direction { direction: V, distance: f64 },
    Global,
}

impl Scenario {
    /// Reads and validates a scenario, applying dotted overrides.
    pub fn load(path: &Path, overrides: &[String]) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text, overrides)?;
        if let Some(rel) = &s.vehicle.global_trajectory {
            let full = path.parent().unwrap_or(Path::new(".")).join(rel);
            let file = std::fs::File::open(&full).map_err(|e| SimError::Config(format!("{}: {e}", full.display())))?;
            let g = GlobalTrajectory::read(std::io::BufReader::new(file))
                .map_err(|e| SimError::Config(format!("{}: {e}", full.display())))?;
            s.global = Some(g);
        }
        s.validate()?;
        Ok(s)
    }

    /// Parses without touching the filesystem; a global trajectory reference
    /// is left unresolved.
    pub fn from_toml(text: &str, overrides: &[String]) -> SimResult<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| SimError::Config(format!("scenario: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| SimError::Config(format!("scenario: {e}")))
    }

    pub fn goal(&self) -> SimResult<GoalSpec> {
        let v = &self.vehicle;
        match (v.goal, v.goal_direction, &v.global_trajectory, &self.global) {
            (_, _, _, Some(_)) | (_, _, Some(_), _) => Ok(GoalSpec::Global),
            (_, Some(d), ..) => {
                let direction =
                    d.try_normalize(1e-9).ok_or_else(|| SimError::Config("goal_direction must be non-zero".into()))?;
                let distance =
                    v.goal_distance.ok_or_else(|| SimError::Config("goal_direction needs goal_distance".into()))?;
                Ok(GoalSpec::Direction { direction, distance })
            }
            (Some(p), ..) => Ok(GoalSpec::Position(p)),
            _ => Err(SimError::Config("vehicle needs a goal, goal_direction or global_trajectory".into())),
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        let cfg = |e: ras_core::PlanError| SimError::Config(e.to_string());
        self.planner.validate().map_err(cfg)?;
        self.sampler.validate().map_err(cfg)?;
        self.risk.validate().map_err(cfg)?;
        self.prediction.validate().map_err(cfg)?;
        if self.global.is_some() || self.vehicle.global_trajectory.is_some() {
            self.fusion.validate().map_err(cfg)?;
        }
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.duration > 0.0 && self.physics_rate > 0.0) {
            return bad("duration and physics_rate must be positive");
        }
        if !(self.planner.replan_rate > 0.0 && self.planner.replan_rate <= self.physics_rate) {
            return bad("planner.replan_rate must lie in (0, physics_rate]");
        }
        if !(self.sensor.rate > 0.0 && self.sensor.rate <= self.physics_rate) {
            return bad("sensor.rate must lie in (0, physics_rate]");
        }
        if !(self.sensor.fov_deg > 0.0 && self.sensor.fov_deg <= 360.0 && self.sensor.range > 0.0) {
            return bad("sensor fov_deg must lie in (0, 360] and range be positive");
        }
        if self.sensor.points_per_face == 0 {
            return bad("sensor.points_per_face must be >= 1");
        }
        let m = &self.map;
        if !(m.bin_size > 0.0 && m.decay >= 0.0 && m.decay <= 1.0 && m.min_weight >= 0.0) {
            return bad("map: bin_size > 0, decay in [0, 1], min_weight >= 0");
        }
        if !(m.half_extent.x > 0.0 && m.half_extent.y > 0.0 && m.half_extent.z > 0.0) {
            return bad("map.half_extent must be positive");
        }
        let b = &self.vehicle.body;
        if !(b.x >= 0.0 && b.y >= 0.0 && b.z >= 0.0 && self.vehicle.goal_tolerance > 0.0) {
            return bad("vehicle body must be >= 0 and goal_tolerance > 0");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        let inside = |p: &V| {
            p.x >= self.world.min.x
                && p.y >= self.world.min.y
                && p.z >= self.world.min.z
                && p.x <= self.world.max.x
                && p.y <= self.world.max.y
                && p.z <= self.world.max.z
        };
        for (i, o) in self.obstacles.iter().enumerate() {
            let err = |m: String| Err(SimError::Config(format!("obstacles.{i}: {m}")));
            match o.shape {
                ShapeKind::Sphere if !o.radius.is_some_and(|r| r > 0.0) => return err("sphere needs radius > 0".into()),
                ShapeKind::Box if !o.size.is_some_and(|s| s.x > 0.0 && s.y > 0.0 && s.z > 0.0) => {
                    return err("box needs positive size".into())
                }
                _ => {}
            }
            if o.velocity.is_some() && !o.waypoints.is_empty() {
                return err("velocity and waypoints are exclusive".into());
            }
            if !(o.speed >= 0.0 && o.start_delay >= 0.0 && o.delay_jitter >= 0.0) {
                return err("speed, start_delay and delay_jitter must be >= 0".into());
            }
            if !o.waypoints.is_empty() && o.speed <= 0.0 {
                return err("a waypoint script needs speed > 0".into());
            }
            if let Some(p) = std::iter::once(&o.center).chain(&o.waypoints).find(|p| !inside(p)) {
                return err(format!("position {:?} outside the world", p.to_array()));
            }
        }
        self.goal().map(|_| ())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `dotted.key=value` override. Numeric path parts index arrays;
/// missing tables are created.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> SimResult<()> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| SimError::Config(format!("override '{spec}' is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(SimError::Config(format!("override '{spec}' has an empty key part")));
    }
    let mut root = toml::Value::Table(std::mem::take(table));
    let ok = set_path(&mut root, &parts, parse_value(raw.trim()));
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    ok.ok_or_else(|| SimError::Config(format!("override '{spec}' does not address a table entry")))
}

fn set_path(node: &mut toml::Value, parts: &[&str], value: toml::Value) -> Option<()> {
    let (head, rest) = parts.split_first()?;
    let child = match node {
        toml::Value::Table(t) if rest.is_empty() => {
            t.insert(head.to_string(), value);
            return Some(());
        }
        toml::Value::Table(t) => t.entry(head.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new())),
        toml::Value::Array(a) => a.get_mut(head.parse::<usize>().ok()?)?,
        _ => return None,
    };
    if rest.is_empty() {
        *child = value;
        Some(())
    } else {
        set_path(child, rest, value)
    }
}
