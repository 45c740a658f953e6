use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3, Vector6};

use super::kinematics::{center_of_mass, forward_kinematics, LinkFrame};
use super::model::RobotModel;
use super::{FloatingBase, JointVector};

/// Generalized force `b = M a + h`: base force and moment about the base
/// origin (world frame), then the twelve joint torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedForce {
    pub base: Vector6<f64>,
    pub joints: JointVector,
}

impl GeneralizedForce {
    pub fn to_vector(&self) -> nalgebra::SVector<f64, 18> {
        let mut v = nalgebra::SVector::<f64, 18>::zeros();
        v.fixed_rows_mut::<6>(0).copy_from(&self.base);
        v.fixed_rows_mut::<12>(6).copy_from(&self.joints);
        v
    }
}

/// Velocities of every link: angular velocity and joint-origin velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMotion {
    pub omega: Vector3<f64>,
    pub origin_velocity: Vector3<f64>,
}

impl LinkMotion {
    pub fn point_velocity(&self, origin: &Vector3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
        self.origin_velocity + self.omega.cross(&(p - origin))
    }
}

pub fn link_velocities(model: &RobotModel, frames: &[LinkFrame], base: &FloatingBase, qd: &JointVector) -> Vec<LinkMotion> {
    let mut out: Vec<LinkMotion> = Vec::with_capacity(frames.len());
    for (link, frame) in model.links.iter().zip(frames) {
        let motion = match (link.parent, link.joint) {
            (Some(p), Some(j)) => {
                let parent = out[p];
                LinkMotion {
                    omega: parent.omega + frame.axis * qd[j],
                    origin_velocity: parent.point_velocity(&frames[p].origin, &frame.origin),
                }
            }
            _ => LinkMotion {
                omega: base.angular_velocity,
                origin_velocity: base.velocity,
            },
        };
        out.push(motion);
    }
    out
}

/// Floating-base recursive Newton-Euler. `base_acc` is the world linear
/// acceleration of the base origin followed by the world angular acceleration.
/// Gravity acts along -z with magnitude `gravity`.
pub fn rnea(
    model: &RobotModel,
    base: &FloatingBase,
    q: &JointVector,
    qd: &JointVector,
    base_acc: &Vector6<f64>,
    qdd: &JointVector,
    gravity: f64,
) -> GeneralizedForce {
    let frames = forward_kinematics(model, base, q);
    let motion = link_velocities(model, &frames, base, qd);
    let n = model.links.len();
    let mut alpha = vec![Vector3::zeros(); n];
    let mut acc = vec![Vector3::zeros(); n];
    // Gravity enters as an upward acceleration of the base.
    acc[0] = base_acc.fixed_rows::<3>(0) + Vector3::new(0.0, 0.0, gravity);
    alpha[0] = base_acc.fixed_rows::<3>(3).into_owned();
    for (i, link) in model.links.iter().enumerate().skip(1) {
        let (p, j) = (link.parent.unwrap(), link.joint.unwrap());
        let d = frames[i].origin - frames[p].origin;
        let wp = motion[p].omega;
        acc[i] = acc[p] + alpha[p].cross(&d) + wp.cross(&wp.cross(&d));
        alpha[i] = alpha[p] + frames[i].axis * qdd[j] + wp.cross(&(frames[i].axis * qd[j]));
    }

    let mut force = vec![Vector3::zeros(); n];
    let mut moment = vec![Vector3::zeros(); n];
    for (i, link) in model.links.iter().enumerate() {
        let f = &frames[i];
        let w = motion[i].omega;
        let r = f.com - f.origin;
        let a_com = acc[i] + alpha[i].cross(&r) + w.cross(&w.cross(&r));
        let inertia = f.rotation * link.inertia * f.rotation.transpose();
        let lin = a_com * link.mass;
        force[i] = lin;
        moment[i] = inertia * alpha[i] + w.cross(&(inertia * w)) + r.cross(&lin);
    }
    let mut joints = JointVector::zeros();
    for i in (1..n).rev() {
        let link = &model.links[i];
        let p = link.parent.unwrap();
        joints[link.joint.unwrap()] = frames[i].axis.dot(&moment[i]);
        let lever = frames[i].origin - frames[p].origin;
        let (fi, mi) = (force[i], moment[i]);
        force[p] += fi;
        moment[p] += mi + lever.cross(&fi);
    }
    let mut b = Vector6::zeros();
    b.fixed_rows_mut::<3>(0).copy_from(&force[0]);
    b.fixed_rows_mut::<3>(3).copy_from(&moment[0]);
    GeneralizedForce { base: b, joints }
}

/// Joint-space inertia matrix (18 x 18), one RNEA call per unit acceleration
/// with gravity and velocities removed.
pub fn mass_matrix(model: &RobotModel, base: &FloatingBase, q: &JointVector) -> DMatrix<f64> {
    let still = FloatingBase {
        velocity: Vector3::zeros(),
        angular_velocity: Vector3::zeros(),
        ..*base
    };
    let zero = JointVector::zeros();
    let mut m = DMatrix::zeros(18, 18);
    for k in 0..18 {
        let mut a = Vector6::zeros();
        let mut qdd = JointVector::zeros();
        if k < 6 {
            a[k] = 1.0;
        } else {
            qdd[k - 6] = 1.0;
        }
        let col = rnea(model, &still, q, &zero, &a, &qdd, 0.0).to_vector();
        m.column_mut(k).copy_from(&col);
    }
    m
}

/// Kinetic plus gravitational potential energy.
pub fn mechanical_energy(model: &RobotModel, base: &FloatingBase, q: &JointVector, qd: &JointVector, gravity: f64) -> f64 {
    let frames = forward_kinematics(model, base, q);
    let motion = link_velocities(model, &frames, base, qd);
    model
        .links
        .iter()
        .zip(frames.iter().zip(&motion))
        .map(|(l, (f, m))| {
            let v = m.point_velocity(&f.origin, &f.com);
            let inertia = f.rotation * l.inertia * f.rotation.transpose();
            0.5 * l.mass * v.norm_squared() + 0.5 * m.omega.dot(&(inertia * m.omega)) + l.mass * gravity * f.com.z
        })
        .sum()
}

/// Composite rigid-body inertia of the whole robot about its center of mass,
/// ordered (linear, angular): `diag(m I, I_rot)`.
pub fn composite_inertia(model: &RobotModel, base: &FloatingBase, q: &JointVector) -> Matrix6<f64> {
    let frames = forward_kinematics(model, base, q);
    let c = center_of_mass(model, &frames);
    let mut rot = Matrix3::zeros();
    for (l, f) in model.links.iter().zip(&frames) {
        let r = (f.com - c).cross_matrix();
        rot += f.rotation * l.inertia * f.rotation.transpose() + r.transpose() * r * l.mass;
    }
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * model.total_mass()));
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&rot);
    out
}
