use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation2, Vector2};

/// Quadruped legs, in the order used for every per-leg array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    LF,
    RF,
    LH,
    RH,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::LF, Leg::RF, Leg::LH, Leg::RH];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Leg {
        Self::ALL[i]
    }

    pub fn is_left(self) -> bool {
        matches!(self, Leg::LF | Leg::LH)
    }

    pub fn is_front(self) -> bool {
        matches!(self, Leg::LF | Leg::RF)
    }

    pub fn diagonal(self) -> Leg {
        match self {
            Leg::LF => Leg::RH,
            Leg::RH => Leg::LF,
            Leg::RF => Leg::LH,
            Leg::LH => Leg::RF,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::LF => "LF",
            Leg::RF => "RF",
            Leg::LH => "LH",
            Leg::RH => "RH",
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLeg(pub String);

impl fmt::Display for UnknownLeg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown leg `{}`", self.0)
    }
}

impl std::error::Error for UnknownLeg {}

impl FromStr for Leg {
    type Err = UnknownLeg;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LF" => Ok(Leg::LF),
            "RF" => Ok(Leg::RF),
            "LH" => Ok(Leg::LH),
            "RH" => Ok(Leg::RH),
            other => Err(UnknownLeg(other.to_string())),
        }
    }
}

/// Nominal foot placement relative to the body center, body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceLayout {
    pub half_length: f64,
    pub half_width: f64,
}

impl Default for StanceLayout {
    fn default() -> Self {
        Self {
            half_length: 0.37,
            half_width: 0.34,
        }
    }
}

impl StanceLayout {
    pub fn offset(&self, leg: Leg) -> Vector2<f64> {
        let sx = if leg.is_front() { 1.0 } else { -1.0 };
        let sy = if leg.is_left() { 1.0 } else { -1.0 };
        Vector2::new(sx * self.half_length, sy * self.half_width)
    }

    /// World xy of the nominal foothold of `leg` for a body at `(x, y, theta)`.
    pub fn nominal(&self, leg: Leg, x: f64, y: f64, theta: f64) -> Vector2<f64> {
        Vector2::new(x, y) + Rotation2::new(theta) * self.offset(leg)
    }

    pub fn nominal_all(&self, x: f64, y: f64, theta: f64) -> [Vector2<f64>; 4] {
        Leg::ALL.map(|leg| self.nominal(leg, x, y, theta))
    }
}
