//! Floating-base whole-body control: virtual-model feedback on the trunk,
//! recursive Newton-Euler inverse dynamics and least-squares contact forces.

mod control;
mod kinematics;
mod model;
mod rnea;

use nalgebra::{Rotation3, SVector, Vector3};
use thiserror::Error;

pub use control::{
    base_to_cog_acceleration, cog_to_base_acceleration, control_step, joint_feedback, least_squares_residual,
    reference_acceleration,
    rotation_exp, rotation_vector, virtual_model_wrench, whole_body_torques, Gains, JointGains, WholeBodyCommand,
};
pub use kinematics::{
    center_of_mass, contact_jacobian, foot_position, foot_positions, forward_kinematics, inverse_kinematics,
    leg_inverse_kinematics, ContactJacobian, LinkFrame,
};
pub use model::{Foot, LegGeometry, Link, RobotModel, DEFAULT_MODEL};
pub use rnea::{composite_inertia, link_velocities, mass_matrix, mechanical_energy, rnea, GeneralizedForce, LinkMotion};

use crate::legs::Leg;

pub type JointVector = SVector<f64, 12>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WbcError {
    #[error("model file parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid robot model: {0}")]
    Model(String),
    #[error("foot of leg {leg} out of reach ({distance:.3} m)")]
    Unreachable { leg: Leg, distance: f64 },
    #[error("no stance feet")]
    EmptyStance,
    #[error("state contains non-finite values")]
    NonFinite,
    #[error("composite inertia is singular")]
    SingularInertia,
    #[error("invalid gains: {0}")]
    Gains(String),
}

/// Pose and twist of the whole-robot center of mass: world position, trunk
/// orientation, world linear and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl BodyPose {
    pub fn at(position: Vector3<f64>) -> Self {
        Self {
            position,
            rotation: Rotation3::identity(),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).chain(self.angular_velocity.iter()).all(|v| v.is_finite())
            && self.rotation.matrix().iter().all(|v| v.is_finite())
    }
}

/// Same quantities for the trunk frame origin, which the dynamics use as the
/// floating-base reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloatingBase {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl FloatingBase {
    pub fn at(position: Vector3<f64>) -> Self {
        Self {
            position,
            rotation: Rotation3::identity(),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    /// Trunk origin state for a CoG state, with the CoG at `cog_offset`
    /// (trunk frame) rigidly attached to the trunk.
    pub fn from_cog(pose: &BodyPose, cog_offset: &Vector3<f64>) -> Self {
        let r = pose.rotation * cog_offset;
        Self {
            position: pose.position - r,
            rotation: pose.rotation,
            velocity: pose.velocity - pose.angular_velocity.cross(&r),
            angular_velocity: pose.angular_velocity,
        }
    }
}

/// CoG position in the trunk frame for joint angles `q`.
pub fn cog_offset(model: &RobotModel, q: &JointVector) -> Vector3<f64> {
    let frames = forward_kinematics(model, &FloatingBase::at(Vector3::zeros()), q);
    center_of_mass(model, &frames)
}
