use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use super::WbcError;
use crate::legs::Leg;

/// Built-in model: 70 kg trunk and four 5 kg legs with 0.4 m thigh and shank.
pub const DEFAULT_MODEL: &str = include_str!("../../data/quadruped.model");

/// Rigid link attached to its parent by a revolute joint (none for the base).
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the center of mass, link frame.
    pub inertia: Matrix3<f64>,
    /// Unit joint axis in the link frame (equal to the parent frame at zero angle).
    pub axis: Vector3<f64>,
    /// Joint position in the parent frame.
    pub origin: Vector3<f64>,
    /// Index into the joint vector, `None` for the base.
    pub joint: Option<usize>,
}

/// Point foot rigidly attached to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot {
    pub link: usize,
    pub offset: Vector3<f64>,
}

/// Dimensions used by the closed-form leg inverse kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegGeometry {
    /// Abduction joint position in the base frame.
    pub hip: Vector3<f64>,
    /// Lateral offset from the abduction joint to the hip flexion joint.
    pub lateral: f64,
    pub thigh: f64,
    pub shank: f64,
}

/// Floating-base quadruped with three revolute joints per leg. Joint `3 * leg + k`
/// is abduction, hip flexion and knee for `k = 0, 1, 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub links: Vec<Link>,
    pub feet: [Foot; 4],
    pub legs: [LegGeometry; 4],
}

fn inertia_from(v: &[f64]) -> Matrix3<f64> {
    let (ixx, iyy, izz, ixy, ixz, iyz) = (v[0], v[1], v[2], v[3], v[4], v[5]);
    Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
}

fn is_spd(m: &Matrix3<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0) && m.cholesky().is_some()
}

impl RobotModel {
    pub fn quadruped() -> Self {
        Self::from_text(DEFAULT_MODEL).expect("built-in model is valid")
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn base(&self) -> &Link {
        &self.links[0]
    }

    /// Links from the base (exclusive) down to the foot link of `leg`.
    pub fn chain(&self, leg: Leg) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut i = self.feet[leg.index()].link;
        while let Some(p) = self.links[i].parent {
            chain.push(i);
            i = p;
        }
        chain.reverse();
        chain
    }

    /// Parse the whitespace table `name parent mass com(3) inertia(6) axis(3)
    /// origin(3)` followed by `foot <leg> <link> x y z` records.
    pub fn from_text(text: &str) -> Result<Self, WbcError> {
        let mut links: Vec<Link> = Vec::new();
        let mut feet: [Option<Foot>; 4] = [None; 4];
        for (n, raw) in text.lines().enumerate() {
            let err = |msg: String| WbcError::Parse { line: n + 1, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let numbers = |s: &[&str]| -> Result<Vec<f64>, WbcError> {
                s.iter()
                    .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}"))))
                    .collect()
            };
            let find = |name: &str| links.iter().position(|l| l.name == name);
            if fields[0] == "foot" {
                if fields.len() != 6 {
                    return Err(err("foot record needs leg, link and 3 offsets".into()));
                }
                let leg: Leg = fields[1].parse().map_err(|_| err(format!("unknown leg {:?}", fields[1])))?;
                let link = find(fields[2]).ok_or_else(|| err(format!("unknown link {:?}", fields[2])))?;
                let o = numbers(&fields[3..6])?;
                feet[leg.index()] = Some(Foot {
                    link,
                    offset: Vector3::new(o[0], o[1], o[2]),
                });
                continue;
            }
            if fields.len() != 18 {
                return Err(err(format!("link record needs 18 fields, got {}", fields.len())));
            }
            if find(fields[0]).is_some() {
                return Err(err(format!("duplicate link {:?}", fields[0])));
            }
            let parent = match fields[1] {
                "-" => None,
                name => Some(find(name).ok_or_else(|| err(format!("parent {name:?} must be listed first")))?),
            };
            if parent.is_none() != links.is_empty() {
                return Err(err("exactly the first link must be the base".into()));
            }
            let v = numbers(&fields[2..])?;
            let inertia = inertia_from(&v[4..10]);
            if !(v[0] > 0.0) || !is_spd(&inertia) {
                return Err(err("mass must be positive and inertia symmetric positive definite".into()));
            }
            let axis = Vector3::new(v[10], v[11], v[12]);
            if parent.is_some() && (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(err("joint axis must be a unit vector".into()));
            }
            links.push(Link {
                name: fields[0].to_string(),
                parent,
                mass: v[0],
                com: Vector3::new(v[1], v[2], v[3]),
                inertia,
                axis,
                origin: Vector3::new(v[13], v[14], v[15]),
                joint: None,
            });
        }
        if links.is_empty() {
            return Err(WbcError::Model("no links".into()));
        }
        if feet.iter().any(Option::is_none) {
            return Err(WbcError::Model("every leg needs a foot record".into()));
        }
        let mut model = Self {
            links,
            feet: feet.map(Option::unwrap),
            legs: [LegGeometry {
                hip: Vector3::zeros(),
                lateral: 0.0,
                thigh: 0.0,
                shank: 0.0,
            }; 4],
        };
        for leg in Leg::ALL {
            let chain = model.chain(leg);
            if chain.len() != 3 {
                return Err(WbcError::Model(format!("leg {leg} needs exactly 3 joints")));
            }
            for (k, &i) in chain.iter().enumerate() {
                if model.links[i].joint.is_some() {
                    return Err(WbcError::Model(format!("link {} shared by two legs", model.links[i].name)));
                }
                model.links[i].joint = Some(3 * leg.index() + k);
            }
            model.legs[leg.index()] = model.leg_geometry(leg, &chain)?;
        }
        if model.links.iter().skip(1).any(|l| l.joint.is_none()) {
            return Err(WbcError::Model("every non-base link must belong to a leg".into()));
        }
        Ok(model)
    }

    fn leg_geometry(&self, leg: Leg, chain: &[usize]) -> Result<LegGeometry, WbcError> {
        let (hip, thigh, shank) = (&self.links[chain[0]], &self.links[chain[1]], &self.links[chain[2]]);
        let foot = self.feet[leg.index()].offset;
        let near = |a: Vector3<f64>, b: Vector3<f64>| (a - b).amax() < 1e-12;
        let ok = hip.parent == Some(0)
            && near(hip.axis, Vector3::x())
            && near(thigh.axis, Vector3::y())
            && near(shank.axis, Vector3::y())
            && thigh.origin.x.abs() < 1e-12
            && thigh.origin.z.abs() < 1e-12
            && shank.origin.x.abs() < 1e-12
            && shank.origin.y.abs() < 1e-12
            && foot.x.abs() < 1e-12
            && foot.y.abs() < 1e-12
            && shank.origin.z < 0.0
            && foot.z < 0.0;
        if !ok {
            return Err(WbcError::Model(format!(
                "leg {leg} must be abduction (x), flexion (y), knee (y) with links along -z"
            )));
        }
        Ok(LegGeometry {
            hip: hip.origin,
            lateral: thigh.origin.y,
            thigh: -shank.origin.z,
            shank: -foot.z,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out =
            String::from("# name parent mass com(3) ixx iyy izz ixy ixz iyz axis(3) origin(3)\n");
        for l in &self.links {
            let parent = l.parent.map_or("-".to_string(), |p| self.links[p].name.clone());
            let i = &l.inertia;
            write!(out, "{} {} {}", l.name, parent, l.mass).unwrap();
            for v in [
                l.com.x, l.com.y, l.com.z, i[(0, 0)], i[(1, 1)], i[(2, 2)], i[(0, 1)], i[(0, 2)], i[(1, 2)],
                l.axis.x, l.axis.y, l.axis.z, l.origin.x, l.origin.y, l.origin.z,
            ] {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        for leg in Leg::ALL {
            let f = &self.feet[leg.index()];
            let o = f.offset;
            writeln!(out, "foot {leg} {} {} {} {}", self.links[f.link].name, o.x, o.y, o.z).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_model_weighs_ninety_kilograms() {
        let m = RobotModel::quadruped();
        assert_eq!(m.links.len(), 13);
        assert!((m.total_mass() - 90.0).abs() < 1e-12);
        assert_eq!(m.chain(Leg::RH).iter().map(|&i| m.links[i].joint.unwrap()).collect::<Vec<_>>(), [9, 10, 11]);
        let g = m.legs[Leg::RF.index()];
        assert_eq!((g.hip, g.lateral, g.thigh, g.shank), (Vector3::new(0.37, -0.24, 0.0), -0.1, 0.4, 0.4));
    }

    #[test]
    fn text_round_trip() {
        let m = RobotModel::quadruped();
        assert_eq!(RobotModel::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_records() {
        let bad_mass = DEFAULT_MODEL.replacen("base - 70", "base - -70", 1);
        assert!(matches!(RobotModel::from_text(&bad_mass), Err(WbcError::Parse { line: 3, .. })));
        let no_foot: String = DEFAULT_MODEL.lines().filter(|l| !l.starts_with("foot RH")).collect::<Vec<_>>().join("\n");
        assert!(matches!(RobotModel::from_text(&no_foot), Err(WbcError::Model(_))));
        let orphan = DEFAULT_MODEL.replacen("LF_thigh LF_hip", "LF_thigh nowhere", 1);
        assert!(RobotModel::from_text(&orphan).is_err());
    }
}
