use std::fmt::Write as _;

use nalgebra::{Vector2, Vector3};

use super::zprofile::ZProfile;
use super::{TrajError, MIN_VERTICAL_SUPPORT};
use crate::GRAVITY;

/// Monomial basis `[t^5, t^4, t^3, t^2, t, 1]`.
pub fn pos_basis(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    [t3 * t2, t2 * t2, t3, t2, t, 1.0]
}

pub fn vel_basis(t: f64) -> [f64; 6] {
    let t2 = t * t;
    [5.0 * t2 * t2, 4.0 * t2 * t, 3.0 * t2, 2.0 * t, 1.0, 0.0]
}

pub fn acc_basis(t: f64) -> [f64; 6] {
    let t2 = t * t;
    [20.0 * t2 * t, 12.0 * t2, 6.0 * t, 2.0, 0.0, 0.0]
}

fn dot(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// One quintic per axis over local time `[0, duration]`, coefficients ordered
/// from the fifth-order term down to the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub duration: f64,
    pub x: [f64; 6],
    pub y: [f64; 6],
}

impl Segment {
    pub fn position(&self, tau: f64) -> Vector2<f64> {
        let b = pos_basis(tau);
        Vector2::new(dot(&self.x, &b), dot(&self.y, &b))
    }

    pub fn velocity(&self, tau: f64) -> Vector2<f64> {
        let b = vel_basis(tau);
        Vector2::new(dot(&self.x, &b), dot(&self.y, &b))
    }

    pub fn acceleration(&self, tau: f64) -> Vector2<f64> {
        let b = acc_basis(tau);
        Vector2::new(dot(&self.x, &b), dot(&self.y, &b))
    }

    pub fn coefficients(&self) -> [f64; 12] {
        let mut q = [0.0; 12];
        q[..6].copy_from_slice(&self.x);
        q[6..].copy_from_slice(&self.y);
        q
    }
}

/// CoG state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CogState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub phase: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoGTrajectory {
    pub segments: Vec<Segment>,
    pub z: ZProfile,
}

impl CoGTrajectory {
    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start + s.duration)
    }

    /// Segment index and local time of `t`; junction instants belong to the later segment.
    pub fn locate(&self, t: f64) -> Result<(usize, f64), TrajError> {
        let duration = self.duration();
        if !(t >= -1e-12 && t <= duration + 1e-12) {
            return Err(TrajError::OutOfRange { t, duration });
        }
        let i = self
            .segments
            .iter()
            .rposition(|s| s.start <= t)
            .unwrap_or(0);
        let s = &self.segments[i];
        Ok((i, (t - s.start).clamp(0.0, s.duration)))
    }

    pub fn eval(&self, t: f64) -> Result<CogState, TrajError> {
        let (i, tau) = self.locate(t)?;
        Ok(self.eval_local(i, tau))
    }

    pub fn eval_local(&self, phase: usize, tau: f64) -> CogState {
        let s = &self.segments[phase];
        let (z, zd, _) = self.z.eval(s.start + tau);
        let zdd = self.z.accel_in_phase(phase, tau);
        let (p, v, a) = (s.position(tau), s.velocity(tau), s.acceleration(tau));
        CogState {
            position: Vector3::new(p.x, p.y, z),
            velocity: Vector3::new(v.x, v.y, zd),
            acceleration: Vector3::new(a.x, a.y, zdd),
            phase,
        }
    }

    /// Cart-table ZMP at global time `t`.
    pub fn zmp(&self, t: f64) -> Result<Vector2<f64>, TrajError> {
        let (i, tau) = self.locate(t)?;
        self.zmp_local(i, tau).ok_or(TrajError::FreeFall(t))
    }

    /// ZMP inside segment `phase`; `None` near free fall.
    pub fn zmp_local(&self, phase: usize, tau: f64) -> Option<Vector2<f64>> {
        let st = self.eval_local(phase, tau);
        let support = st.acceleration.z + GRAVITY;
        if support <= MIN_VERTICAL_SUPPORT {
            return None;
        }
        let k = self.z.height_above_support / support;
        Some(st.position.xy() - st.acceleration.xy() * k)
    }

    /// Largest mismatch of position, velocity or acceleration across any junction.
    pub fn junction_residual(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let t = a.duration;
                [
                    a.position(t) - b.position(0.0),
                    a.velocity(t) - b.velocity(0.0),
                    a.acceleration(t) - b.acceleration(0.0),
                ]
                .iter()
                .map(|d| d.amax())
                .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Sampled table at `rate` Hz followed by the raw segment and height records.
    pub fn to_text(&self, rate: f64) -> Result<String, TrajError> {
        let mut out = String::from("# t x y z xd yd xdd ydd zmp_x zmp_y phase_index\n");
        let n = (self.duration() * rate + 1e-9).floor() as usize;
        for k in 0..=n {
            let t = (k as f64 / rate).min(self.duration());
            let st = self.eval(t)?;
            let zmp = self.zmp(t)?;
            let (p, v, a) = (st.position, st.velocity, st.acceleration);
            writeln!(
                out,
                "{t:.4} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {}",
                p.x, p.y, p.z, v.x, v.y, a.x, a.y, zmp.x, zmp.y, st.phase
            )
            .unwrap();
        }
        writeln!(out, "height {:e}", self.z.height_above_support).unwrap();
        for (i, s) in self.segments.iter().enumerate() {
            write!(out, "segment {i} {:e} {:e} {:e}", s.start, s.duration, self.z.levels[i]).unwrap();
            for c in s.coefficients() {
                write!(out, " {c:e}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Rebuild from the `height` and `segment` records of [`CoGTrajectory::to_text`].
    pub fn from_text(text: &str) -> Result<Self, TrajError> {
        let mut height = None;
        let mut segments = Vec::new();
        let mut levels = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |msg: &str| TrajError::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut f = line.split_whitespace();
            match f.next() {
                Some("height") => {
                    let v = f.next().and_then(|v| v.parse::<f64>().ok());
                    height = Some(v.ok_or_else(|| err("bad height"))?);
                }
                Some("segment") => {
                    let vals: Vec<f64> = f
                        .skip(1)
                        .map(|v| v.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("bad number"))?;
                    if vals.len() != 15 {
                        return Err(err("segment needs start, duration, level and 12 coefficients"));
                    }
                    let mut x = [0.0; 6];
                    let mut y = [0.0; 6];
                    x.copy_from_slice(&vals[3..9]);
                    y.copy_from_slice(&vals[9..15]);
                    levels.push(vals[2]);
                    segments.push(Segment {
                        start: vals[0],
                        duration: vals[1],
                        x,
                        y,
                    });
                }
                _ => {}
            }
        }
        let height = height.ok_or(TrajError::Parse {
            line: 0,
            msg: "missing height record".into(),
        })?;
        if segments.is_empty() {
            return Err(TrajError::Parse {
                line: 0,
                msg: "no segments".into(),
            });
        }
        let z = ZProfile {
            levels,
            starts: segments.iter().map(|s| s.start).collect(),
            durations: segments.iter().map(|s| s.duration).collect(),
            height_above_support: height,
        };
        Ok(Self { segments, z })
    }
}
