//! Perception-to-torque planning pipeline for a quadruped on rough terrain.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod legs;
pub mod body_planner;
pub mod footstep_planner;
pub mod terrain;
pub mod traj_opt;
pub mod sim;
pub mod wbc_dynamics;

/// Gravitational acceleration (m/s^2).
pub const GRAVITY: f64 = 9.81;
