use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Rotation3, Vector2, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{RunReport, StepLog};
use super::{Artifacts, PipelineConfig, Scenario, SimError, TrackingNoise};
use crate::body_planner::{ara_star, replan, ActionPlan, BodyState, LatticeBounds, PlannerParams, ReplanOutcome};
use crate::footstep_planner::{nominal_stance, plan_footsteps_from, BodyTrack, FootholdPlan};
use crate::geometry::fit_plane;
use crate::legs::Leg;
use crate::terrain::TerrainServer;
use crate::traj_opt::{
    optimize, ConstraintMode, OptimizedTrajectory, PhaseKind, Timing, TrajError, ZProfile, SLACK_TOL,
};
use crate::wbc_dynamics::{
    base_to_cog_acceleration, cog_offset, composite_inertia, control_step, inverse_kinematics, joint_feedback,
    rotation_vector, BodyPose, FloatingBase, JointVector, RobotModel, WbcError,
};

/// Terrain patch applied once at a chunk boundary, as soon as at least
/// `after_step` footholds have been executed.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainEvent {
    /// Elevations, rows along y and columns along x.
    pub patch: DMatrix<f64>,
    /// Grid cell of the patch's first entry.
    pub at: (usize, usize),
    pub after_step: usize,
}

/// Report, exported artifacts and the error that ended the run, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Artifacts,
    pub error: Option<SimError>,
}

/// Plan and execute `scenario` end to end: terrain costs, one anytime body
/// plan, then footholds, a CoG trajectory and 100 Hz whole-body commands for
/// each chunk of body actions.
pub fn run_pipeline(scenario: &Scenario, config: &PipelineConfig, noise: Option<TrackingNoise>) -> RunOutput {
    execute(scenario, config, noise, None)
}

/// Like [`run_pipeline`], with `event` applied to the terrain mid-run and the
/// body plan repaired against the updated map.
pub fn replay_event(
    scenario: &Scenario,
    config: &PipelineConfig,
    event: &TerrainEvent,
    noise: Option<TrackingNoise>,
) -> RunOutput {
    execute(scenario, config, noise, Some(event))
}

fn execute(
    scenario: &Scenario,
    config: &PipelineConfig,
    noise: Option<TrackingNoise>,
    event: Option<&TerrainEvent>,
) -> RunOutput {
    let mut report = RunReport::empty(&scenario.name, noise.map(|n| n.seed));
    let mut artifacts = Artifacts::default();
    let mut error = drive(scenario, config, noise, event, &mut report, &mut artifacts).err();
    if error.is_none() {
        let stable = report.zmp_violations == 0 && report.min_zmp_slack >= -SLACK_TOL;
        if !stable {
            error = Some(SimError::Simulation(format!(
                "{} ZMP violations, min slack {:e}",
                report.zmp_violations, report.min_zmp_slack
            )));
        } else if !(report.goal_error <= config.goal_tolerance) {
            error = Some(SimError::Simulation(format!(
                "final CoG {:.3} m from the goal",
                report.goal_error
            )));
        }
    }
    report.success = error.is_none();
    report.failure = error.as_ref().map(|e| format!("{}: {e}", e.stage()));
    RunOutput {
        report,
        artifacts,
        error,
    }
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Body plan from the scenario start to its goal on the current map.
fn initial_plan(
    scenario: &Scenario,
    config: &PipelineConfig,
    server: &TerrainServer,
) -> Result<(ActionPlan, BodyState), SimError> {
    let lattice = &config.planner.lattice;
    let (sx, sy, st) = scenario.start;
    let (gx, gy, gt) = scenario.goal;
    let start = lattice.snap(sx, sy, st);
    let goal = lattice.snap(gx, gy, gt);
    let params = corridor_params(config, &start, &goal);
    let outcome = ara_star(&start, &goal, &server.snapshot(), &params, config.schedule, |_| {})
        .map_err(SimError::BodyPlan)?;
    Ok((outcome.best().clone(), goal))
}

/// Planner settings with the search corridor applied.
pub fn corridor_params(config: &PipelineConfig, start: &BodyState, goal: &BodyState) -> PlannerParams {
    let mut params = config.planner.clone();
    if let (None, Some(margin)) = (params.bounds, config.corridor_margin) {
        let m = (margin / params.lattice.resolution_xy).ceil() as i64;
        params.bounds = Some(LatticeBounds {
            ix: (start.ix.min(goal.ix) - m, start.ix.max(goal.ix) + m),
            iy: (start.iy.min(goal.iy) - m, start.iy.max(goal.iy) + m),
        });
    }
    params
}

fn chunk_track(plan: &ActionPlan, from: usize, to: usize, config: &PipelineConfig) -> BodyTrack {
    let lattice = &config.planner.lattice;
    BodyTrack {
        poses: plan.states[from..=to].iter().map(|s| s.pose(lattice)).collect(),
        kinds: plan.actions[from..to].iter().map(|a| a.kind).collect(),
    }
}

fn chunk_footholds(
    plan: &ActionPlan,
    from: usize,
    to: usize,
    stance: [Vector3<f64>; 4],
    server: &TerrainServer,
    config: &PipelineConfig,
    chunk: usize,
) -> Result<FootholdPlan, SimError> {
    let mut params = config.footsteps;
    params.horizon = 4 * (to - from);
    plan_footsteps_from(chunk_track(plan, from, to, config), stance, &server.snapshot(), &params)
        .map_err(|source| SimError::Footstep { chunk, source })
}

/// Planned motion of one chunk, evaluated at local time.
struct ChunkMotion<'a> {
    traj: &'a OptimizedTrajectory,
    footholds: &'a FootholdPlan,
    yaw: (f64, f64),
    pitch: ZProfile,
    roll: ZProfile,
    clearance: f64,
}

/// Desired state at one instant.
struct Reference {
    pose: BodyPose,
    acceleration: Vector6<f64>,
    feet: [Vector3<f64>; 4],
    stance: Vec<Leg>,
    phase: usize,
    tau: f64,
}

/// Pitch and roll that align the trunk with the plane through `feet`.
fn stance_tilt(feet: &[Vector3<f64>; 4], yaw: f64) -> (f64, f64) {
    let Some((a, b, _)) = fit_plane(feet) else {
        return (0.0, 0.0);
    };
    let (s, c) = yaw.sin_cos();
    let gx = c * a + s * b;
    let gy = -s * a + c * b;
    (-gx.atan(), gy.atan())
}

impl<'a> ChunkMotion<'a> {
    fn new(traj: &'a OptimizedTrajectory, footholds: &'a FootholdPlan, clearance: f64) -> Self {
        let poses = &footholds.track.poses;
        let yaw0 = poses.first().map_or(0.0, |p| p.2);
        let yaw1 = yaw0 + wrap_angle(poses.last().map_or(0.0, |p| p.2) - yaw0);
        let phases = &traj.phases;
        // Like the height, the tilt follows a landed foot one phase later:
        // level i is the tilt of the stance at the start of phase i.
        let mut pitch = Vec::with_capacity(phases.phases.len());
        let mut roll = Vec::with_capacity(phases.phases.len());
        let mut stance = footholds.initial_stance;
        let total = phases.total_duration();
        let starts = phases.start_times();
        for (i, p) in phases.phases.iter().enumerate() {
            let end = starts[i] + p.duration;
            let yaw = yaw0 + (yaw1 - yaw0) * smoothstep(end / total);
            let (pt, rl) = stance_tilt(&stance, yaw);
            pitch.push(pt);
            roll.push(rl);
            if let Some(s) = p.step_index {
                let step = &footholds.steps[s];
                stance[step.leg.index()] = step.position;
            }
        }
        let profile = |levels: Vec<f64>| ZProfile {
            levels,
            starts: phases.z_profile.starts.clone(),
            durations: phases.z_profile.durations.clone(),
            height_above_support: 0.0,
        };
        Self {
            traj,
            footholds,
            yaw: (yaw0, yaw1),
            pitch: profile(pitch),
            roll: profile(roll),
            clearance,
        }
    }

    fn duration(&self) -> f64 {
        self.traj.duration()
    }

    fn rotation(&self, t: f64) -> Rotation3<f64> {
        let t = t.clamp(0.0, self.duration());
        let yaw = self.yaw.0 + (self.yaw.1 - self.yaw.0) * smoothstep(t / self.duration());
        Rotation3::from_euler_angles(self.roll.height(t), self.pitch.height(t), yaw)
    }

    fn angular_velocity(&self, t: f64) -> Vector3<f64> {
        let h = 1e-4;
        let (a, b) = ((t - h).max(0.0), (t + h).min(self.duration()));
        let rel = self.rotation(b) * self.rotation(a).inverse();
        rotation_vector(rel.matrix()) / (b - a)
    }

    fn feet(&self, phase: usize, tau: f64) -> [Vector3<f64>; 4] {
        let p = &self.traj.phases.phases[phase];
        let Some(s) = p.step_index else {
            let mut feet = [Vector3::zeros(); 4];
            for (leg, f) in p.legs.iter().zip(&p.feet) {
                feet[leg.index()] = *f;
            }
            return feet;
        };
        let step = &self.footholds.steps[s];
        let mut feet = self.footholds.stance_after(s);
        let from = feet[step.leg.index()];
        let to = step.position;
        let u = (tau / p.duration).clamp(0.0, 1.0);
        let blend = smoothstep(u);
        let lift = (self.clearance + 0.5 * (to.z - from.z).abs()) * 64.0 * (u * (1.0 - u)).powi(3);
        feet[step.leg.index()] = from + (to - from) * blend + Vector3::new(0.0, 0.0, lift);
        feet
    }

    fn reference(&self, t: f64) -> Result<Reference, TrajError> {
        let traj = &self.traj.solution.trajectory;
        let state = traj.eval(t)?;
        let (phase, tau) = traj.locate(t)?;
        let omega = self.angular_velocity(t);
        let h = 1e-4;
        let (a, b) = ((t - h).max(0.0), (t + h).min(self.duration()));
        let alpha = (self.angular_velocity(b) - self.angular_velocity(a)) / (b - a);
        let mut acceleration = Vector6::zeros();
        acceleration.fixed_rows_mut::<3>(0).copy_from(&state.acceleration);
        acceleration.fixed_rows_mut::<3>(3).copy_from(&alpha);
        let p = &self.traj.phases.phases[phase];
        Ok(Reference {
            pose: BodyPose {
                position: state.position,
                rotation: self.rotation(t),
                velocity: state.velocity,
                angular_velocity: omega,
            },
            acceleration,
            feet: self.feet(phase, tau),
            stance: if p.kind == PhaseKind::Quad { Leg::ALL.to_vec() } else { p.legs.clone() },
            phase,
            tau,
        })
    }
}

/// Joint angles for a CoG pose with the feet at `feet`. The CoG offset depends
/// on the angles, so base placement and inverse kinematics alternate.
fn joint_angles(
    model: &RobotModel,
    pose: &BodyPose,
    feet: &[Vector3<f64>; 4],
    guess: &JointVector,
) -> Result<JointVector, WbcError> {
    let mut q = *guess;
    for _ in 0..4 {
        let base = FloatingBase::from_cog(pose, &cog_offset(model, &q));
        q = inverse_kinematics(model, &base, feet)?;
    }
    Ok(q)
}

struct Noise {
    rng: ChaCha8Rng,
    bias: Vector3<f64>,
    model: TrackingNoise,
}

impl Noise {
    fn new(model: TrackingNoise) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        let dir = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            );
            if v.norm() <= 1.0 {
                break v;
            }
        };
        Self {
            bias: dir * model.bias,
            rng,
            model,
        }
    }

    fn unit(&mut self) -> Vector3<f64> {
        Vector3::new(
            self.rng.random_range(-1.0..=1.0),
            self.rng.random_range(-1.0..=1.0),
            self.rng.random_range(-1.0..=1.0),
        )
    }

    fn perturb(&mut self, pose: &BodyPose) -> BodyPose {
        let dp = self.bias + self.unit() * self.model.jitter;
        let dv = self.unit() * self.model.velocity_jitter;
        BodyPose {
            position: pose.position + dp,
            velocity: pose.velocity + dv,
            ..*pose
        }
    }
}

/// Constraint-sample ZMP slacks of an optimized chunk: `(min, violations)`.
fn sampled_slack(traj: &OptimizedTrajectory, dt: f64) -> (f64, usize) {
    let slacks: Vec<f64> = traj.sampled_slacks(dt).into_iter().flatten().collect();
    let min = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    (min, slacks.iter().filter(|&&s| s < -SLACK_TOL).count())
}

fn polygons_csv(out: &mut String, chunk: usize, traj: &OptimizedTrajectory) {
    for (i, p) in traj.phases.phases.iter().enumerate() {
        let kind = match p.kind {
            PhaseKind::Quad => "quad",
            PhaseKind::Triple => "triple",
        };
        for (k, v) in p.polygon.vertices.iter().enumerate() {
            let _ = writeln!(out, "{chunk},{i},{kind},{k},{},{}", v.x, v.y);
        }
    }
}

struct TickState<'a> {
    model: RobotModel,
    config: &'a PipelineConfig,
    noise: Option<Noise>,
    q_guess: JointVector,
}

impl TickState<'_> {
    #[allow(clippy::too_many_arguments)]
    fn run_chunk(
        &mut self,
        motion: &ChunkMotion<'_>,
        chunk: usize,
        clock: f64,
        report: &mut RunReport,
        artifacts: &mut Artifacts,
    ) -> Result<(), SimError> {
        let rate = self.config.tick_rate;
        let total = motion.duration();
        let ticks = (total * rate - 1e-9).ceil().max(1.0) as usize;
        let h = 1e-3;
        for k in 0..ticks {
            let t = k as f64 / rate;
            let now = clock + t;
            let dyn_err = |source: WbcError| SimError::Dynamics { t: now, source };
            let traj_err = |source: TrajError| SimError::Trajectory { chunk, source };
            let r = motion.reference(t).map_err(traj_err)?;
            let q_d = joint_angles(&self.model, &r.pose, &r.feet, &self.q_guess).map_err(dyn_err)?;
            self.q_guess = q_d;
            let joints_at = |s: f64| -> Result<JointVector, SimError> {
                let r = motion.reference(s).map_err(traj_err)?;
                joint_angles(&self.model, &r.pose, &r.feet, &q_d).map_err(dyn_err)
            };
            let (a, b) = ((t - h).max(0.0), (t + h).min(total));
            let (q_a, q_b) = (joints_at(a)?, joints_at(b)?);
            let qd = (q_b - q_a) / (b - a);
            let qdd = if a == t - h && b == t + h {
                (q_b - 2.0 * q_d + q_a) / (h * h)
            } else {
                JointVector::zeros()
            };

            let actual = match self.noise.as_mut() {
                Some(n) => n.perturb(&r.pose),
                None => r.pose,
            };
            let q = if actual == r.pose {
                q_d
            } else {
                joint_angles(&self.model, &actual, &r.feet, &q_d).map_err(dyn_err)?
            };
            let (cmd, wrench) = control_step(
                &self.model,
                &r.pose,
                &actual,
                &r.acceleration,
                &q,
                &qd,
                &qdd,
                &r.stance,
                &self.config.gains,
            )
            .map_err(dyn_err)?;

            // Re-derive the CoG reference from the command to confirm it is
            // the plan plus the inertia-weighted wrench.
            let offset = cog_offset(&self.model, &q);
            let base = FloatingBase::from_cog(&actual, &offset);
            let ic = composite_inertia(&self.model, &base, &q);
            let response = ic.cholesky().ok_or(dyn_err(WbcError::SingularInertia))?.solve(&wrench);
            let cog_ref = base_to_cog_acceleration(&cmd.reference, &(actual.rotation * offset), &actual.angular_velocity);
            report.max_reference_error =
                report.max_reference_error.max((cog_ref - r.acceleration - response).amax());

            let feedback = joint_feedback(&q_d, &q, &qd, &qd, &self.config.joint_gains);
            let mut logged = cmd;
            logged.tau += feedback;
            report.max_torque = report.max_torque.max(logged.tau.amax());
            report.max_wrench = report.max_wrench.max(wrench.norm());
            artifacts.commands.push(logged.log_line(now));

            let trajectory = &motion.traj.solution.trajectory;
            let zmp = trajectory.zmp_local(r.phase, r.tau);
            let slack = zmp.map_or(f64::NEG_INFINITY, |z| motion.traj.phases.phases[r.phase].polygon.min_slack(z));
            report.min_tick_zmp_slack = report.min_tick_zmp_slack.min(slack);
            let z = zmp.unwrap_or(Vector2::repeat(f64::NAN));
            let p = r.pose.position;
            let _ = writeln!(
                artifacts.cog_zmp_csv,
                "{now:.4},{chunk},{},{},{},{},{},{},{}",
                r.phase, p.x, p.y, p.z, z.x, z.y, slack
            );
            report.ticks += 1;
        }
        Ok(())
    }
}

fn drive(
    scenario: &Scenario,
    config: &PipelineConfig,
    noise: Option<TrackingNoise>,
    event: Option<&TerrainEvent>,
    report: &mut RunReport,
    artifacts: &mut Artifacts,
) -> Result<(), SimError> {
    config.validate()?;
    if let Some(n) = &noise {
        n.validate()?;
    }
    let grid = scenario.generate()?;
    artifacts.heightgrid = grid.to_text();
    let mut server = TerrainServer::new(grid, config.cost).map_err(SimError::Terrain)?;
    artifacts.costmap = server.snapshot().to_text();
    let lattice = config.planner.lattice;
    let (mut plan, goal) = initial_plan(scenario, config, &server)?;
    artifacts.action_plans.push(plan.to_text(&lattice));

    let mut stance = nominal_stance(&server.snapshot(), &config.footsteps.layout, plan.start().pose(&lattice))
        .map_err(|source| SimError::Footstep { chunk: 0, source })?;
    let mut ticker = TickState {
        model: RobotModel::quadruped(),
        config,
        noise: noise.map(Noise::new),
        q_guess: JointVector::zeros(),
    };
    artifacts.cog_zmp_csv = "t,chunk,phase,cog_x,cog_y,cog_z,zmp_x,zmp_y,slack\n".into();
    artifacts.polygons_csv = "chunk,phase,kind,vertex,x,y\n".into();

    let mut pending = event;
    let mut cursor = 0;
    let mut clock = 0.0;
    let mut min_slack = f64::INFINITY;
    let mut chunk = 0;
    loop {
        if let Some(ev) = pending.filter(|ev| report.steps.len() >= ev.after_step) {
            pending = None;
            let change = server.apply_patch(&ev.patch, ev.at).map_err(SimError::Terrain)?;
            server.refresh().map_err(SimError::Terrain)?;
            let map = server.snapshot();
            artifacts.costmap = map.to_text();
            let current = plan.states[cursor];
            let params = corridor_params(config, &current, &goal);
            let outcome = replan(&plan, &change.dirty, &current, &goal, &map, &params, config.schedule, |_| {})
                .map_err(SimError::BodyPlan)?;
            if let ReplanOutcome::Replanned(o) = outcome {
                report.replans += 1;
                plan = o.best().clone();
                cursor = 0;
                artifacts.action_plans.push(plan.to_text(&lattice));
            }
        }
        if cursor >= plan.actions.len() {
            break;
        }
        let end = (cursor + config.chunk_actions).min(plan.actions.len());
        let footholds = chunk_footholds(&plan, cursor, end, stance, &server, config, chunk)?;
        artifacts.footholds.push(footholds.to_text());
        let traj = optimize(&footholds, &config.trajectory).map_err(|source| SimError::Trajectory { chunk, source })?;
        artifacts.trajectories.push(
            traj.solution
                .trajectory
                .to_text(config.export_rate)
                .map_err(|source| SimError::Trajectory { chunk, source })?,
        );
        polygons_csv(&mut artifacts.polygons_csv, chunk, &traj);
        let (slack, violations) = sampled_slack(&traj, config.trajectory.dt);
        min_slack = min_slack.min(slack);
        report.min_zmp_slack = min_slack;
        report.zmp_violations += violations;
        report.max_junction_residual = report.max_junction_residual.max(traj.solution.junction_residual);
        report.quad_phase_count += traj.phases.inserted_quads();

        let motion = ChunkMotion::new(&traj, &footholds, config.footsteps.swing_clearance);
        ticker.run_chunk(&motion, chunk, clock, report, artifacts)?;

        for step in &footholds.steps {
            report.steps.push(StepLog {
                index: report.steps.len(),
                leg: step.leg.name().to_string(),
                x: step.position.x,
                y: step.position.y,
                z: step.position.z,
                chunk,
            });
        }
        stance = footholds.final_stance();
        clock += traj.duration();
        report.duration = clock;
        report.chunks += 1;
        cursor = end;
        chunk += 1;
    }

    let centroid = stance.iter().map(|f| f.xy()).sum::<Vector2<f64>>() / 4.0;
    report.goal_error = (centroid - Vector2::new(scenario.goal.0, scenario.goal.1)).norm();
    let distance = Vector2::new(scenario.goal.0 - scenario.start.0, scenario.goal.1 - scenario.start.1).norm();
    report.traversal_speed = if clock > 0.0 { distance / clock } else { 0.0 };
    Ok(())
}

/// Total durations of the same footholds optimized for minimal time with ZMP
/// constraints and with the CoG-in-polygon (static) constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub zmp_duration: f64,
    pub static_duration: f64,
    /// `(zmp, static)` duration per chunk.
    pub chunks: Vec<(f64, f64)>,
}

impl ModeComparison {
    pub fn speedup(&self) -> f64 {
        self.static_duration / self.zmp_duration
    }
}

pub fn compare_modes(scenario: &Scenario, config: &PipelineConfig, rel_tol: f64) -> Result<ModeComparison, SimError> {
    config.validate()?;
    let grid = scenario.generate()?;
    let server = TerrainServer::new(grid, config.cost).map_err(SimError::Terrain)?;
    let lattice = config.planner.lattice;
    let (plan, _) = initial_plan(scenario, config, &server)?;
    let mut stance = nominal_stance(&server.snapshot(), &config.footsteps.layout, plan.start().pose(&lattice))
        .map_err(|source| SimError::Footstep { chunk: 0, source })?;
    let mut chunks = Vec::new();
    let mut cursor = 0;
    while cursor < plan.actions.len() {
        let chunk = chunks.len();
        let end = (cursor + config.chunk_actions).min(plan.actions.len());
        let footholds = chunk_footholds(&plan, cursor, end, stance, &server, config, chunk)?;
        let mut durations = [0.0; 2];
        for (slot, mode) in [ConstraintMode::Zmp, ConstraintMode::Static].into_iter().enumerate() {
            let params = crate::traj_opt::TrajParams {
                mode,
                timing: Timing::Minimal { rel_tol },
                ..config.trajectory
            };
            let traj = optimize(&footholds, &params).map_err(|source| SimError::Trajectory { chunk, source })?;
            durations[slot] = traj.duration();
        }
        chunks.push((durations[0], durations[1]));
        stance = footholds.final_stance();
        cursor = end;
    }
    Ok(ModeComparison {
        zmp_duration: chunks.iter().map(|c| c.0).sum(),
        static_duration: chunks.iter().map(|c| c.1).sum(),
        chunks,
    })
}
