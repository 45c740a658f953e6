use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3, Vector6};

use super::kinematics::contact_jacobian;
use super::model::RobotModel;
use super::rnea::{composite_inertia, rnea};
use super::{cog_offset, BodyPose, FloatingBase, JointVector, WbcError};
use crate::legs::Leg;
use crate::GRAVITY;

/// Diagonal trunk impedance gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub p_x: Vector3<f64>,
    pub d_x: Vector3<f64>,
    pub p_theta: Vector3<f64>,
    pub d_theta: Vector3<f64>,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            p_x: Vector3::repeat(2000.0),
            d_x: Vector3::repeat(400.0),
            p_theta: Vector3::repeat(600.0),
            d_theta: Vector3::repeat(60.0),
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<(), WbcError> {
        let all = [self.p_x, self.d_x, self.p_theta, self.d_theta];
        if all.iter().flat_map(|v| v.iter()).all(|&g| g > 0.0 && g.is_finite()) {
            Ok(())
        } else {
            Err(WbcError::Gains(format!("{self:?}")))
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            p_x: self.p_x * k,
            d_x: self.d_x * k,
            p_theta: self.p_theta * k,
            d_theta: self.d_theta * k,
        }
    }
}

/// Low-gain joint-space PD with symmetric torque saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointGains {
    pub kp: f64,
    pub kd: f64,
    pub limit: f64,
}

impl Default for JointGains {
    fn default() -> Self {
        Self {
            kp: 50.0,
            kd: 2.0,
            limit: 150.0,
        }
    }
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Angles closer than this to pi take the axis from the symmetric part.
const NEAR_PI: f64 = 1e-3;
/// Below this angle the first-order series replaces `angle / sin(angle)`.
const SMALL_ANGLE: f64 = 1e-6;

/// Axis times angle, angle in `[0, pi]`. At exactly pi the axis comes from the
/// largest diagonal of `(R + I) / 2`, signed so its first nonzero entry is positive.
pub fn rotation_vector(r: &Matrix3<f64>) -> Vector3<f64> {
    let w = vee(r);
    let sin = 0.5 * w.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    let angle = sin.atan2(cos);
    if angle < SMALL_ANGLE {
        return w * (0.5 * (1.0 + angle * angle / 6.0));
    }
    if angle < std::f64::consts::PI - NEAR_PI {
        return w * (angle / (2.0 * sin));
    }
    // k k^T = (sym(R) - cos I) / (1 - cos)
    let kk = ((r + r.transpose()) * 0.5 - Matrix3::identity() * cos) / (1.0 - cos);
    let i = (0..3).max_by(|&a, &b| kk[(a, a)].total_cmp(&kk[(b, b)])).unwrap();
    let mut axis = kk.column(i) / kk[(i, i)].sqrt();
    axis.normalize_mut();
    let flip = if w.norm() > 1e-12 {
        axis.dot(&w) < 0.0
    } else {
        axis.iter().find(|v| v.abs() > 1e-12).is_some_and(|&v| v < 0.0)
    };
    if flip {
        axis = -axis;
    }
    axis * angle
}

/// Exponential map from a rotation vector to a rotation matrix.
pub fn rotation_exp(v: &Vector3<f64>) -> Matrix3<f64> {
    *Rotation3::new(*v).matrix()
}

/// Virtual springs and dampers between the desired and actual trunk state;
/// returns the force followed by the torque (world frame).
pub fn virtual_model_wrench(desired: &BodyPose, actual: &BodyPose, gains: &Gains) -> Vector6<f64> {
    let force = gains.p_x.component_mul(&(desired.position - actual.position))
        + gains.d_x.component_mul(&(desired.velocity - actual.velocity));
    // Identical orientations give an exactly zero error instead of rounding noise.
    let error = if desired.rotation == actual.rotation {
        Vector3::zeros()
    } else {
        rotation_vector((desired.rotation * actual.rotation.inverse()).matrix())
    };
    let torque = gains.p_theta.component_mul(&error)
        + gains.d_theta.component_mul(&(desired.angular_velocity - actual.angular_velocity));
    let mut w = Vector6::zeros();
    w.fixed_rows_mut::<3>(0).copy_from(&force);
    w.fixed_rows_mut::<3>(3).copy_from(&torque);
    w
}

/// Planned CoG acceleration plus the composite-inertia response to the
/// virtual-model wrench.
pub fn reference_acceleration(
    planned: &Vector6<f64>,
    wrench: &Vector6<f64>,
    model: &RobotModel,
    base: &FloatingBase,
    q: &JointVector,
) -> Result<Vector6<f64>, WbcError> {
    let ic = composite_inertia(model, base, q);
    let response = ic.cholesky().ok_or(WbcError::SingularInertia)?.solve(wrench);
    Ok(planned + response)
}

/// Move a rigid-body acceleration (linear part at the CoG, angular part)
/// to the trunk origin. `cog_offset` is the CoG relative to the trunk origin
/// in world axes.
pub fn cog_to_base_acceleration(acc: &Vector6<f64>, cog_offset: &Vector3<f64>, omega: &Vector3<f64>) -> Vector6<f64> {
    shift_acceleration(acc, &(-cog_offset), omega)
}

pub fn base_to_cog_acceleration(acc: &Vector6<f64>, cog_offset: &Vector3<f64>, omega: &Vector3<f64>) -> Vector6<f64> {
    shift_acceleration(acc, cog_offset, omega)
}

fn shift_acceleration(acc: &Vector6<f64>, r: &Vector3<f64>, omega: &Vector3<f64>) -> Vector6<f64> {
    let alpha = acc.fixed_rows::<3>(3).into_owned();
    let lin = acc.fixed_rows::<3>(0) + alpha.cross(r) + omega.cross(&omega.cross(r));
    let mut out = *acc;
    out.fixed_rows_mut::<3>(0).copy_from(&lin);
    out
}

/// Joint torques and contact forces for one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct WholeBodyCommand {
    pub tau: JointVector,
    /// One force per stance foot, aligned with `stance`.
    pub lambda: Vec<Vector3<f64>>,
    pub stance: Vec<Leg>,
    /// Trunk origin acceleration used for the inverse dynamics (linear, angular).
    pub reference: Vector6<f64>,
    /// Rank of the contact map on the base rows; below 6 the base wrench is met
    /// only in the least-squares sense.
    pub rank: usize,
    /// `|J_cb^T lambda - b_b|`, the part of the base wrench the feet cannot supply.
    pub base_residual: f64,
}

impl WholeBodyCommand {
    pub fn total_vertical_force(&self) -> f64 {
        self.lambda.iter().map(|f| f.z).sum()
    }

    /// `t tau[12] lambda[3k] stance_mask`, mask in LF RF LH RH order.
    pub fn log_line(&self, t: f64) -> String {
        let mut out = format!("{t:.4}");
        for v in self.tau.iter() {
            write!(out, " {v:.6}").unwrap();
        }
        for f in &self.lambda {
            write!(out, " {:.6} {:.6} {:.6}", f.x, f.y, f.z).unwrap();
        }
        let mask: String = Leg::ALL
            .iter()
            .map(|l| if self.stance.contains(l) { '1' } else { '0' })
            .collect();
        write!(out, " {mask}").unwrap();
        out
    }
}

/// Partitioned inverse dynamics: RNEA gives `b`, the stance forces solve the
/// base rows in the least-squares sense through a truncated pseudoinverse and
/// the joint rows give the torques.
#[allow(clippy::too_many_arguments)]
pub fn whole_body_torques(
    model: &RobotModel,
    base: &FloatingBase,
    q: &JointVector,
    qd: &JointVector,
    base_acc: &Vector6<f64>,
    qdd: &JointVector,
    stance: &[Leg],
    gravity: f64,
) -> Result<WholeBodyCommand, WbcError> {
    let finite = q.iter().chain(qd.iter()).chain(qdd.iter()).chain(base_acc.iter()).all(|v| v.is_finite())
        && base.position.iter().chain(base.velocity.iter()).chain(base.angular_velocity.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(WbcError::NonFinite);
    }
    let b = rnea(model, base, q, qd, base_acc, qdd, gravity);
    let jac = contact_jacobian(model, base, q, stance)?;
    let a = jac.base.transpose(); // 6 x 3k
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = 1e-8 * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let pinv = svd.pseudo_inverse(cutoff).expect("U and V were computed");
    let bb = DVector::from_column_slice(b.base.as_slice());
    let lambda = &pinv * &bb;
    let base_residual = (&a * &lambda - &bb).norm();
    let tau_dyn: DVector<f64> = DVector::from_column_slice(b.joints.as_slice()) - jac.joints.transpose() * &lambda;
    Ok(WholeBodyCommand {
        tau: JointVector::from_column_slice(tau_dyn.as_slice()),
        lambda: (0..stance.len())
            .map(|k| Vector3::new(lambda[3 * k], lambda[3 * k + 1], lambda[3 * k + 2]))
            .collect(),
        stance: stance.to_vec(),
        reference: *base_acc,
        rank,
        base_residual,
    })
}

/// `Kp (q_d - q) + Kd (qd_d - qd)`, clamped per joint.
pub fn joint_feedback(
    q_d: &JointVector,
    q: &JointVector,
    qd_d: &JointVector,
    qd: &JointVector,
    gains: &JointGains,
) -> JointVector {
    ((q_d - q) * gains.kp + (qd_d - qd) * gains.kd).map(|t| t.clamp(-gains.limit, gains.limit))
}

/// One tick of the trunk controller: virtual-model wrench from the tracking
/// error, reference CoG acceleration, transfer to the trunk origin, then the
/// whole-body torques for the given stance.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    model: &RobotModel,
    desired: &BodyPose,
    actual: &BodyPose,
    planned_acc: &Vector6<f64>,
    q: &JointVector,
    qd: &JointVector,
    qdd: &JointVector,
    stance: &[Leg],
    gains: &Gains,
) -> Result<(WholeBodyCommand, Vector6<f64>), WbcError> {
    if !(desired.is_finite() && actual.is_finite()) {
        return Err(WbcError::NonFinite);
    }
    let wrench = virtual_model_wrench(desired, actual, gains);
    let offset = cog_offset(model, q);
    let base = FloatingBase::from_cog(actual, &offset);
    let acc_cog = reference_acceleration(planned_acc, &wrench, model, &base, q)?;
    let world_offset = actual.rotation * offset;
    let acc_base = cog_to_base_acceleration(&acc_cog, &world_offset, &actual.angular_velocity);
    let cmd = whole_body_torques(model, &base, q, qd, &acc_base, qdd, stance, GRAVITY)?;
    Ok((cmd, wrench))
}

/// Least-squares projection oracle used by tests: `A x` closest to `b`.
pub fn least_squares_residual(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let qr = a.clone().svd(true, true);
    let x = qr.solve(b, 1e-12).expect("U and V were computed");
    (a * x - b).norm()
}
