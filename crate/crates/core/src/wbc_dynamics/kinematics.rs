use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use super::model::RobotModel;
use super::{FloatingBase, JointVector, WbcError};
use crate::legs::Leg;

/// World pose of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFrame {
    pub rotation: Matrix3<f64>,
    /// Joint (frame origin) position.
    pub origin: Vector3<f64>,
    /// Joint axis in world coordinates.
    pub axis: Vector3<f64>,
    pub com: Vector3<f64>,
}

/// World frames of every link for base pose `base` and joint angles `q`.
pub fn forward_kinematics(model: &RobotModel, base: &FloatingBase, q: &JointVector) -> Vec<LinkFrame> {
    let mut frames: Vec<LinkFrame> = Vec::with_capacity(model.links.len());
    for link in &model.links {
        let frame = match (link.parent, link.joint) {
            (Some(p), Some(j)) => {
                let parent = &frames[p];
                let axis = parent.rotation * link.axis;
                let rotation = parent.rotation * rotation_about(&link.axis, q[j]);
                let origin = parent.origin + parent.rotation * link.origin;
                LinkFrame {
                    rotation,
                    origin,
                    axis,
                    com: origin + rotation * link.com,
                }
            }
            _ => {
                let rotation = *base.rotation.matrix();
                LinkFrame {
                    rotation,
                    origin: base.position,
                    axis: Vector3::zeros(),
                    com: base.position + rotation * link.com,
                }
            }
        };
        frames.push(frame);
    }
    frames
}

fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), angle).matrix()
}

pub fn foot_position(model: &RobotModel, frames: &[LinkFrame], leg: Leg) -> Vector3<f64> {
    let foot = &model.feet[leg.index()];
    let f = &frames[foot.link];
    f.origin + f.rotation * foot.offset
}

pub fn foot_positions(model: &RobotModel, base: &FloatingBase, q: &JointVector) -> [Vector3<f64>; 4] {
    let frames = forward_kinematics(model, base, q);
    Leg::ALL.map(|leg| foot_position(model, &frames, leg))
}

/// Whole-robot center of mass in world coordinates.
pub fn center_of_mass(model: &RobotModel, frames: &[LinkFrame]) -> Vector3<f64> {
    let weighted: Vector3<f64> = model
        .links
        .iter()
        .zip(frames)
        .map(|(l, f)| f.com * l.mass)
        .sum();
    weighted / model.total_mass()
}

/// Joint angles placing the foot of `leg` at `foot` (base frame), taking the
/// abduction angle closest to zero. Front knees take the negative branch and
/// hind knees the positive one, so the stance is fore-aft symmetric.
pub fn leg_inverse_kinematics(model: &RobotModel, leg: Leg, foot: &Vector3<f64>) -> Result<[f64; 3], WbcError> {
    let g = &model.legs[leg.index()];
    let p = foot - g.hip;
    let rho = p.y.hypot(p.z);
    let unreachable = |distance: f64| WbcError::Unreachable { leg, distance };
    if rho < g.lateral.abs() + 1e-12 {
        return Err(unreachable(rho));
    }
    // Abduction puts the foot in the flexion plane: y' = cos(q) y + sin(q) z = lateral.
    let phi = p.z.atan2(p.y);
    let delta = (g.lateral / rho).acos();
    let wrap = |a: f64| (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    let (c1, c2) = (wrap(phi + delta), wrap(phi - delta));
    let q1 = if c1.abs() <= c2.abs() { c1 } else { c2 };
    let (s, c) = q1.sin_cos();
    let x = p.x;
    let z = -s * p.y + c * p.z;
    let d2 = x * x + z * z;
    let cos_knee = (d2 - g.thigh * g.thigh - g.shank * g.shank) / (2.0 * g.thigh * g.shank);
    if !(-1.0..=1.0).contains(&cos_knee) {
        return Err(unreachable(d2.sqrt()));
    }
    let q3 = if leg.is_front() { -cos_knee.acos() } else { cos_knee.acos() };
    let q2 = (-x).atan2(-z) - (g.shank * q3.sin()).atan2(g.thigh + g.shank * q3.cos());
    Ok([q1, q2, q3])
}

/// Joint angles for all four feet given in world coordinates.
pub fn inverse_kinematics(
    model: &RobotModel,
    base: &FloatingBase,
    feet: &[Vector3<f64>; 4],
) -> Result<JointVector, WbcError> {
    let mut q = JointVector::zeros();
    for leg in Leg::ALL {
        let local = base.rotation.inverse() * (feet[leg.index()] - base.position);
        let angles = leg_inverse_kinematics(model, leg, &local)?;
        for k in 0..3 {
            q[3 * leg.index() + k] = angles[k];
        }
    }
    Ok(q)
}

/// Stacked point Jacobians of the stance feet: world foot velocity equals
/// `base * (v, omega) + joints * qd`, with `v` the base origin velocity and
/// `omega` the world angular velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactJacobian {
    pub stance: Vec<Leg>,
    /// `3k x 6`
    pub base: nalgebra::DMatrix<f64>,
    /// `3k x 12`
    pub joints: nalgebra::DMatrix<f64>,
}

pub fn contact_jacobian(
    model: &RobotModel,
    base: &FloatingBase,
    q: &JointVector,
    stance: &[Leg],
) -> Result<ContactJacobian, WbcError> {
    if stance.is_empty() {
        return Err(WbcError::EmptyStance);
    }
    let frames = forward_kinematics(model, base, q);
    let k = stance.len();
    let mut jb = nalgebra::DMatrix::zeros(3 * k, 6);
    let mut jq = nalgebra::DMatrix::zeros(3 * k, 12);
    for (row, &leg) in stance.iter().enumerate() {
        let p = foot_position(model, &frames, leg);
        let r = p - base.position;
        let r_cross = r.cross_matrix();
        jb.view_mut((3 * row, 0), (3, 3)).copy_from(&Matrix3::identity());
        jb.view_mut((3 * row, 3), (3, 3)).copy_from(&(-r_cross));
        for i in model.chain(leg) {
            let j = model.links[i].joint.expect("leg links have joints");
            let f = &frames[i];
            jq.view_mut((3 * row, j), (3, 1)).copy_from(&f.axis.cross(&(p - f.origin)));
        }
    }
    Ok(ContactJacobian {
        stance: stance.to_vec(),
        base: jb,
        joints: jq,
    })
}
