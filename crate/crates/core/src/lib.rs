//! Risk-aware sampling-based local planning for quadrotors.
//!
//! Obstacles are weighted particles whose weight inside a region is the
//! expected number of point objects there. Candidate motion primitives are
//! minimum-jerk quintics split into two phases; each phase is swept by a
//! corridor of oriented cuboids queried at matching future times. Phase 1 must
//! stay below the risk threshold, Phase 2 only adds cost. An optional global
//! trajectory is followed while safe, with local detours merging back onto it.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fusion;
pub mod geometry;
pub mod particles;
pub mod planner;
pub mod region;
pub mod risk;
pub mod sampler;
pub mod scalar;
pub mod supervisor;
pub mod trajectory;
pub mod vec3;

pub use error::{PlanError, Result};
pub use fusion::{FusionConfig, GlobalPoint, GlobalTrajectory, KeyPolyline, Merge};
pub use particles::{MotionModel, OccupancyQuery, ParticleField, PredictionCache, PredictionConfig, WeightedParticle};
pub use planner::{GoalMode, LocalPlanner, PlanRequest, PlanResult, PlanStatus, PlannerConfig};
pub use region::{Aabb, OrientedBox, Region};
pub use risk::{CorridorSegment, RiskConfig};
pub use sampler::{Direction, MotionPrimitive, SamplerConfig};
pub use scalar::Scalar;
pub use supervisor::{Command, Mode, Supervisor, SupervisorOutput};
pub use trajectory::{PiecewiseTrajectory, QuadState, QuinticSegment};
pub use vec3::Vec3;

pub type Vec3d = Vec3<f64>;
pub type Vec3f = Vec3<f32>;
pub type QuadStated = QuadState<f64>;
pub type QuadStatef = QuadState<f32>;
pub type Segmentd = QuinticSegment<f64>;
pub type Segmentf = QuinticSegment<f32>;
pub type Fieldd = ParticleField<f64>;
pub type Fieldf = ParticleField<f32>;
pub type Plannerd = LocalPlanner<f64>;
pub type Plannerf = LocalPlanner<f32>;
pub type GlobalTrajectoryd = GlobalTrajectory<f64>;
pub type Supervisord = Supervisor<f64>;
