/// Precomputed CoG height: piecewise quintic smoothstep between per-phase
/// levels. Phase `i` moves the height from level `i - 1` to level `i`, with
/// zero velocity and acceleration at both ends, so the profile is C2.
#[derive(Debug, Clone, PartialEq)]
pub struct ZProfile {
    pub levels: Vec<f64>,
    pub starts: Vec<f64>,
    pub durations: Vec<f64>,
    /// CoG height above the support used in the ZMP relation (m).
    pub height_above_support: f64,
}

fn smoothstep(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let u2 = u * u;
    let u3 = u2 * u;
    (
        u3 * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - u) * (1.0 - u),
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
    )
}

impl ZProfile {
    /// `(z, z_dot, z_ddot)` at global time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let mut z = self.levels.first().copied().unwrap_or(0.0);
        let (mut zd, mut zdd) = (0.0, 0.0);
        for i in 1..self.levels.len() {
            let jump = self.levels[i] - self.levels[i - 1];
            if jump == 0.0 {
                continue;
            }
            let dur = self.durations[i];
            let (s, ds, dds) = smoothstep((t - self.starts[i]) / dur);
            z += jump * s;
            zd += jump * ds / dur;
            zdd += jump * dds / (dur * dur);
        }
        (z, zd, zdd)
    }

    pub fn height(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn accel(&self, t: f64) -> f64 {
        self.eval(t).2
    }

    /// Acceleration inside phase `phase` at local time `tau`, without the
    /// ambiguity of a shared boundary instant.
    pub fn accel_in_phase(&self, phase: usize, tau: f64) -> f64 {
        if phase == 0 {
            return 0.0;
        }
        let jump = self.levels[phase] - self.levels[phase - 1];
        let dur = self.durations[phase];
        jump * smoothstep(tau / dur).2 / (dur * dur)
    }
}
