//! CoG trajectory optimization: support phases from the foothold sequence,
//! a quintic spline per phase, and a QP that keeps the cart-table ZMP inside
//! the shrunk support polygons.

mod assemble;
mod optimize;
mod phases;
mod spline;
mod zprofile;

use thiserror::Error;

pub use assemble::{
    acceleration_gram, assemble_qp, sample_times, solve_cog_trajectory, AssembledQp, BoundaryState, CogSolution,
    ConstraintMode, RowKind, RowTag, JUNCTION_TOL, SEGMENT_VARS, SLACK_TOL,
};
pub use optimize::{optimize, OptimizedTrajectory, Timing, TrajParams};
pub use phases::{
    build_phases, needs_quad_phase, shrink_polygon, PhaseKind, PhasePlan, PhaseTiming, ShrunkPolygon, SupportPhase,
};
pub use spline::{acc_basis, pos_basis, vel_basis, CoGTrajectory, CogState, Segment};
pub use zprofile::ZProfile;

use quadwalk_qp::QpError;

/// Free-fall guard for the ZMP denominator (m/s^2).
pub const MIN_VERTICAL_SUPPORT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajError {
    #[error("invalid trajectory parameters: {0}")]
    Params(String),
    #[error("foothold plan has no steps")]
    EmptyPlan,
    #[error("support polygon of phase {phase} (step {step:?}) is empty after shrinking")]
    EmptyPolygon { phase: usize, step: Option<usize> },
    #[error("QP infeasible; violated phases {phases:?}")]
    Infeasible {
        phases: Vec<usize>,
        certificate: Vec<usize>,
    },
    #[error("QP solver failed: {0}")]
    Solver(QpError),
    #[error("trajectory failed validation: junction residual {junction:e}, min ZMP slack {slack:e}")]
    Validation { junction: f64, slack: f64 },
    #[error("vertical acceleration reaches free fall at t = {0}")]
    FreeFall(f64),
    #[error("time {t} outside [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },
    #[error("trajectory file parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
