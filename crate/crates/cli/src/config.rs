use std::path::Path;

use clap::{Args, ValueEnum};
use nalgebra::Vector3;
use quadwalk::sim::PipelineConfig;
use quadwalk::traj_opt::{ConstraintMode, Timing};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Zmp,
    Static,
}

impl From<Mode> for ConstraintMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Zmp => ConstraintMode::Zmp,
            Mode::Static => ConstraintMode::Static,
        }
    }
}

/// Settings file. Every key is optional and overrides the built-in default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub terrain: TerrainSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub footsteps: FootstepSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSection {
    /// Weights of (height stddev, slope, curvature).
    pub weights: Option<[f64; 3]>,
    pub window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub resolution_xy: Option<f64>,
    pub headings: Option<u32>,
    pub eps0: Option<f64>,
    pub eps_step: Option<f64>,
    pub budget: Option<usize>,
    pub disc_radius: Option<f64>,
    pub best_n: Option<usize>,
    pub swing_clearance: Option<f64>,
    /// Weights of (terrain, action, collision, orientation).
    pub weights: Option<[f64; 4]>,
    pub kind_costs: Option<[f64; 8]>,
    pub corridor_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootstepSection {
    pub half_length: Option<f64>,
    pub half_width: Option<f64>,
    pub search_radius: Option<f64>,
    pub reach: Option<f64>,
    pub min_inradius: Option<f64>,
    pub swing_clearance: Option<f64>,
    /// Weights of (terrain, stability, clearance, orientation).
    pub weights: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub margin_d: Option<f64>,
    pub swing_duration: Option<f64>,
    pub quad_duration: Option<f64>,
    pub dt: Option<f64>,
    pub w_x: Option<f64>,
    pub w_y: Option<f64>,
    pub body_height: Option<f64>,
    pub mode: Option<Mode>,
    /// Relative tolerance of the fastest-feasible timing search; absent keeps
    /// the configured durations.
    pub minimal_timing_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub p_x: Option<[f64; 3]>,
    pub d_x: Option<[f64; 3]>,
    pub p_theta: Option<[f64; 3]>,
    pub d_theta: Option<[f64; 3]>,
    pub joint_kp: Option<f64>,
    pub joint_kd: Option<f64>,
    pub torque_limit: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub tick_rate: Option<f64>,
    pub goal_tolerance: Option<f64>,
    pub chunk_actions: Option<usize>,
    pub export_rate: Option<f64>,
}

/// Flags shared by every subcommand; each beats the same key of the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML settings file.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Initial heuristic inflation.
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Inflation decrease per anytime iteration.
    #[arg(long)]
    pub eps_step: Option<f64>,
    /// Node expansions allowed per iteration.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Support polygon shrink margin (m).
    #[arg(long)]
    pub margin_d: Option<f64>,
    /// Constraint sampling period (s).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Stability constraint mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Defaults with this file's keys applied.
    pub fn apply(&self, c: &mut PipelineConfig) {
        let t = &self.terrain;
        set(&mut c.cost.weights, t.weights);
        set(&mut c.cost.window, t.window);

        let p = &self.planner;
        set(&mut c.planner.lattice.resolution_xy, p.resolution_xy);
        set(&mut c.planner.lattice.headings, p.headings);
        set(&mut c.schedule.eps0, p.eps0);
        set(&mut c.schedule.step, p.eps_step);
        set(&mut c.planner.budget, p.budget);
        set(&mut c.planner.disc_radius, p.disc_radius);
        set(&mut c.planner.best_n, p.best_n);
        set(&mut c.planner.swing_clearance, p.swing_clearance);
        set(&mut c.planner.kind_costs, p.kind_costs);
        if let Some([terrain, action, collision, orientation]) = p.weights {
            c.planner.weights = quadwalk::body_planner::ActionWeights {
                terrain,
                action,
                collision,
                orientation,
            };
        }
        if p.corridor_margin.is_some() {
            c.corridor_margin = p.corridor_margin;
        }

        let f = &self.footsteps;
        set(&mut c.footsteps.layout.half_length, f.half_length);
        set(&mut c.footsteps.layout.half_width, f.half_width);
        c.planner.layout = c.footsteps.layout;
        set(&mut c.footsteps.search_radius, f.search_radius);
        set(&mut c.footsteps.reach, f.reach);
        set(&mut c.footsteps.min_inradius, f.min_inradius);
        set(&mut c.footsteps.swing_clearance, f.swing_clearance);
        if let Some([terrain, stability, clearance, orientation]) = f.weights {
            c.footsteps.weights = quadwalk::footstep_planner::FootholdWeights {
                terrain,
                stability,
                clearance,
                orientation,
            };
        }

        let tr = &self.trajectory;
        set(&mut c.trajectory.margin, tr.margin_d);
        set(&mut c.trajectory.swing_duration, tr.swing_duration);
        set(&mut c.trajectory.quad_duration, tr.quad_duration);
        set(&mut c.trajectory.dt, tr.dt);
        set(&mut c.trajectory.w_x, tr.w_x);
        set(&mut c.trajectory.w_y, tr.w_y);
        set(&mut c.trajectory.body_height, tr.body_height);
        set(&mut c.trajectory.mode, tr.mode.map(Into::into));
        if let Some(rel_tol) = tr.minimal_timing_tol {
            c.trajectory.timing = Timing::Minimal { rel_tol };
        }

        let k = &self.control;
        let v = |a: Option<[f64; 3]>| a.map(nalgebra_vec);
        set(&mut c.gains.p_x, v(k.p_x));
        set(&mut c.gains.d_x, v(k.d_x));
        set(&mut c.gains.p_theta, v(k.p_theta));
        set(&mut c.gains.d_theta, v(k.d_theta));
        set(&mut c.joint_gains.kp, k.joint_kp);
        set(&mut c.joint_gains.kd, k.joint_kd);
        set(&mut c.joint_gains.limit, k.torque_limit);

        let s = &self.sim;
        set(&mut c.tick_rate, s.tick_rate);
        set(&mut c.goal_tolerance, s.goal_tolerance);
        set(&mut c.chunk_actions, s.chunk_actions);
        set(&mut c.export_rate, s.export_rate);
    }
}

fn nalgebra_vec(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

impl Overrides {
    /// Defaults, then the file, then the flags; the result is validated.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut c = PipelineConfig::default();
        if let Some(path) = &self.config {
            ConfigFile::load(path)?.apply(&mut c);
        }
        set(&mut c.schedule.eps0, self.eps0);
        set(&mut c.schedule.step, self.eps_step);
        set(&mut c.planner.budget, self.budget);
        set(&mut c.trajectory.margin, self.margin_d);
        set(&mut c.trajectory.dt, self.dt);
        set(&mut c.trajectory.mode, self.mode.map(Into::into));
        validate(&c)?;
        Ok(c)
    }
}

fn validate(c: &PipelineConfig) -> Result<(), CliError> {
    let s = &c.schedule;
    if !(s.eps0 >= 1.0 && s.step > 0.0 && s.eps0.is_finite()) {
        return Err(CliError::Config(format!("eps0 must be >= 1 and eps_step > 0, got {} and {}", s.eps0, s.step)));
    }
    if let Timing::Minimal { rel_tol } = c.trajectory.timing {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(CliError::Config(format!("minimal_timing_tol must lie in (0, 1), got {rel_tol}")));
        }
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::parse("[planner]\nepsilon = 2.0\n").is_err());
        assert!(ConfigFile::parse("[nonsense]\n").is_err());
        assert!(ConfigFile::parse("[trajectory]\nmode = \"fast\"\n").is_err());
    }

    #[test]
    fn file_keys_apply() {
        let f = ConfigFile::parse(
            "[planner]\neps0 = 2.5\n[trajectory]\nmargin_d = 0.05\nmode = \"static\"\n[footsteps]\nhalf_width = 0.3\n",
        )
        .unwrap();
        let mut c = PipelineConfig::default();
        f.apply(&mut c);
        assert_eq!(c.schedule.eps0, 2.5);
        assert_eq!(c.trajectory.margin, 0.05);
        assert_eq!(c.trajectory.mode, ConstraintMode::Static);
        assert_eq!(c.planner.layout.half_width, 0.3);
        assert_eq!(c.footsteps.layout.half_width, 0.3);
    }

    #[test]
    fn flag_beats_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "[planner]\neps0 = 2.5\nbudget = 1000\n[trajectory]\ndt = 0.04").unwrap();
        let o = Overrides {
            config: Some(file.path().to_path_buf()),
            eps0: Some(4.0),
            ..Overrides::default()
        };
        let c = o.resolve().unwrap();
        assert_eq!(c.schedule.eps0, 4.0);
        assert_eq!(c.planner.budget, 1000);
        assert_eq!(c.trajectory.dt, 0.04);
    }

    #[test]
    fn invalid_values_fail_at_load() {
        let bad = Overrides {
            margin_d: Some(-0.1),
            ..Overrides::default()
        };
        assert_eq!(bad.resolve().unwrap_err().exit_code(), 2);
        let bad = Overrides {
            eps0: Some(0.5),
            ..Overrides::default()
        };
        assert!(bad.resolve().is_err());
    }
}
