//! Kinematic execution of the planning pipeline on built-in or loaded terrain,
//! with optional tracking noise, reports and plot-ready exports.

mod export;
mod report;
mod run;
mod scenario;

use thiserror::Error;

pub use export::Artifacts;
pub use report::{summarize, RunReport, StepLog, Summary, SummaryRow};
pub use run::{compare_modes, corridor_params, replay_event, run_pipeline, ModeComparison, RunOutput, TerrainEvent};
pub use scenario::{builtin_geometry, world_rect, BuiltinTerrain, Scenario, ScenarioParams, TerrainSource};

use crate::body_planner::{BodyPlanError, EpsilonSchedule, PlannerParams};
use crate::footstep_planner::{FootstepError, FootstepParams};
use crate::legs::StanceLayout;
use crate::terrain::{CostParams, TerrainError};
use crate::traj_opt::{TrajError, TrajParams};
use crate::wbc_dynamics::{Gains, JointGains, WbcError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("terrain: {0}")]
    Terrain(TerrainError),
    #[error("body plan: {0}")]
    BodyPlan(BodyPlanError),
    #[error("footstep plan (chunk {chunk}): {source}")]
    Footstep { chunk: usize, source: FootstepError },
    #[error("trajectory (chunk {chunk}): {source}")]
    Trajectory { chunk: usize, source: TrajError },
    #[error("dynamics at t = {t:.3} s: {source}")]
    Dynamics { t: f64, source: WbcError },
    #[error("simulation: {0}")]
    Simulation(String),
}

impl SimError {
    /// Pipeline stage the error came from.
    pub fn stage(&self) -> &'static str {
        match self {
            SimError::Scenario(_) | SimError::Terrain(_) => "terrain",
            SimError::BodyPlan(_) => "body_planner",
            SimError::Footstep { .. } => "footstep_planner",
            SimError::Trajectory { .. } => "traj_opt",
            SimError::Dynamics { .. } => "wbc_dynamics",
            SimError::Simulation(_) => "sim",
        }
    }
}

/// Bounded tracking perturbation: a constant position bias drawn once per run
/// plus uniform white jitter on position and velocity every tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingNoise {
    /// Largest bias norm (m).
    pub bias: f64,
    /// Per-axis position jitter bound (m).
    pub jitter: f64,
    /// Per-axis velocity jitter bound (m/s).
    pub velocity_jitter: f64,
    pub seed: u64,
}

impl TrackingNoise {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            bias: 0.02,
            jitter: 0.002,
            velocity_jitter: 0.01,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = [self.bias, self.jitter, self.velocity_jitter]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(SimError::Simulation(format!("invalid noise model {self:?}")))
        }
    }
}

/// Every module setting used by one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub cost: CostParams,
    pub planner: PlannerParams,
    pub schedule: EpsilonSchedule,
    pub footsteps: FootstepParams,
    pub trajectory: TrajParams,
    pub gains: Gains,
    pub joint_gains: JointGains,
    /// Control rate (Hz).
    pub tick_rate: f64,
    /// Allowed distance between the final stance centroid and the goal (m).
    /// Covers the one-cell goal region of the planner plus footholds moved
    /// off their nominal spots.
    pub goal_tolerance: f64,
    /// Body actions optimized together; execution comes to rest between chunks.
    pub chunk_actions: usize,
    /// Sampling rate of the exported trajectory tables (Hz).
    pub export_rate: f64,
    /// When the planner has no explicit bounds, confine the search to the
    /// start-goal bounding box grown by this margin (m).
    pub corridor_margin: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut planner = PlannerParams::default();
        let mut footsteps = FootstepParams::default();
        // Wide enough that a foot can bridge the largest built-in gap.
        planner.disc_radius = 0.16;
        planner.budget = 200_000;
        footsteps.search_radius = 0.16;
        // Narrow enough that the feet stay clear of the edges of a 0.8 m pallet.
        let layout = StanceLayout {
            half_length: 0.37,
            half_width: 0.26,
        };
        planner.layout = layout;
        footsteps.layout = layout;
        Self {
            cost: CostParams::default(),
            planner,
            schedule: EpsilonSchedule::default(),
            footsteps,
            trajectory: TrajParams::default(),
            gains: Gains::default(),
            joint_gains: JointGains::default(),
            tick_rate: 100.0,
            goal_tolerance: 0.1,
            chunk_actions: 2,
            export_rate: 20.0,
            corridor_margin: Some(0.6),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.cost.validate().map_err(SimError::Terrain)?;
        self.planner.validate().map_err(SimError::BodyPlan)?;
        self.footsteps.validate().map_err(|source| SimError::Footstep { chunk: 0, source })?;
        self.gains.validate().map_err(|source| SimError::Dynamics { t: 0.0, source })?;
        let t = &self.trajectory;
        if !(t.margin >= 0.0 && t.swing_duration > 0.0 && t.quad_duration > 0.0 && t.dt > 0.0 && t.body_height > 0.0)
        {
            return Err(SimError::Trajectory {
                chunk: 0,
                source: TrajError::Params(format!("{t:?}")),
            });
        }
        let j = &self.joint_gains;
        let sim_ok = self.tick_rate > 0.0
            && self.tick_rate.is_finite()
            && self.goal_tolerance > 0.0
            && self.chunk_actions >= 1
            && self.export_rate > 0.0
            && self.corridor_margin.is_none_or(|m| m >= 0.0)
            && j.kp >= 0.0
            && j.kd >= 0.0
            && j.limit > 0.0;
        if !sim_ok {
            return Err(SimError::Simulation("invalid simulation settings".into()));
        }
        Ok(())
    }
}
