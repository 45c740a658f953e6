use nalgebra::{DMatrix, DVector, Vector2};
use quadwalk_qp::{QProblem, QpError, DEFAULT_TOL};

use super::phases::PhasePlan;
use super::spline::{acc_basis, pos_basis, vel_basis, CoGTrajectory, Segment};
use super::{TrajError, MIN_VERTICAL_SUPPORT};
use crate::GRAVITY;

/// Coefficients per segment: six for x followed by six for y.
pub const SEGMENT_VARS: usize = 12;

/// Pinned CoG position, velocity and acceleration in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
    pub acc: Vector2<f64>,
}

impl BoundaryState {
    pub fn rest(pos: Vector2<f64>) -> Self {
        Self {
            pos,
            vel: Vector2::zeros(),
            acc: Vector2::zeros(),
        }
    }
}

/// Which point must stay inside the shrunk support polygons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Cart-table ZMP only.
    Zmp,
    /// ZMP and the CoG ground projection (quasi-static walking).
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Zmp,
    Cog,
}

/// Origin of one inequality row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowTag {
    pub phase: usize,
    pub tau: f64,
    pub line: usize,
    pub kind: RowKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledQp {
    pub problem: QProblem,
    pub tags: Vec<RowTag>,
    pub starts: Vec<f64>,
    pub durations: Vec<f64>,
}

impl AssembledQp {
    pub fn segments(&self) -> usize {
        self.durations.len()
    }

    pub fn unpack(&self, x: &DVector<f64>) -> Vec<Segment> {
        (0..self.segments())
            .map(|i| {
                let o = i * SEGMENT_VARS;
                let mut sx = [0.0; 6];
                let mut sy = [0.0; 6];
                sx.copy_from_slice(&x.as_slice()[o..o + 6]);
                sy.copy_from_slice(&x.as_slice()[o + 6..o + 12]);
                Segment {
                    start: self.starts[i],
                    duration: self.durations[i],
                    x: sx,
                    y: sy,
                }
            })
            .collect()
    }

    pub fn pack(segments: &[Segment]) -> DVector<f64> {
        DVector::from_iterator(
            segments.len() * SEGMENT_VARS,
            segments.iter().flat_map(|s| s.coefficients()),
        )
    }
}

/// Local sample instants `0, dt, 2dt, ...` plus the phase end.
pub fn sample_times(duration: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        if t >= duration - 1e-9 {
            break;
        }
        out.push(t);
        k += 1;
    }
    out.push(duration);
    out
}

/// `integral_0^T acc_j(t) acc_k(t) dt` for the quintic monomial basis.
pub fn acceleration_gram(duration: f64) -> DMatrix<f64> {
    let c = [20.0, 12.0, 6.0, 2.0];
    let p = [3, 2, 1, 0];
    let mut gram = DMatrix::zeros(6, 6);
    for j in 0..4 {
        for k in 0..4 {
            let e = p[j] + p[k] + 1;
            gram[(j, k)] = c[j] * c[k] * duration.powi(e) / e as f64;
        }
    }
    gram
}

/// QP over the stacked segment coefficients: minimum weighted squared
/// acceleration, C2 junctions, pinned boundary states and one inequality per
/// sample and polygon line.
pub fn assemble_qp(
    plan: &PhasePlan,
    start: &BoundaryState,
    goal: &BoundaryState,
    dt: f64,
    weights: (f64, f64),
    mode: ConstraintMode,
) -> Result<AssembledQp, TrajError> {
    if !(dt > 0.0 && weights.0 > 0.0 && weights.1 > 0.0) {
        return Err(TrajError::Params(format!("dt {dt}, weights {weights:?}")));
    }
    let segs = plan.phases.len();
    if segs == 0 {
        return Err(TrajError::EmptyPlan);
    }
    let n = segs * SEGMENT_VARS;
    let starts = plan.start_times();
    let durations: Vec<f64> = plan.phases.iter().map(|p| p.duration).collect();

    let mut g = DMatrix::zeros(n, n);
    for (i, &dur) in durations.iter().enumerate() {
        let gram = acceleration_gram(dur);
        let o = i * SEGMENT_VARS;
        g.view_mut((o, o), (6, 6)).copy_from(&(&gram * (2.0 * weights.0)));
        g.view_mut((o + 6, o + 6), (6, 6)).copy_from(&(&gram * (2.0 * weights.1)));
    }

    let bases: [fn(f64) -> [f64; 6]; 3] = [pos_basis, vel_basis, acc_basis];
    let mut eq_cols: Vec<(DVector<f64>, f64)> = Vec::new();
    let pin = |seg: usize, tau: f64, state: &BoundaryState, cols: &mut Vec<(DVector<f64>, f64)>| {
        let values = [state.pos, state.vel, state.acc];
        for (basis, value) in bases.iter().zip(values) {
            let b = basis(tau);
            for axis in 0..2 {
                let mut col = DVector::zeros(n);
                let o = seg * SEGMENT_VARS + axis * 6;
                for j in 0..6 {
                    col[o + j] = b[j];
                }
                cols.push((col, -value[axis]));
            }
        }
    };
    pin(0, 0.0, start, &mut eq_cols);
    for (i, &duration) in durations.iter().enumerate().take(segs - 1) {
        for basis in &bases {
            let end = basis(duration);
            let begin = basis(0.0);
            for axis in 0..2 {
                let mut col = DVector::zeros(n);
                let a = i * SEGMENT_VARS + axis * 6;
                let b = (i + 1) * SEGMENT_VARS + axis * 6;
                for j in 0..6 {
                    col[a + j] = end[j];
                    col[b + j] = -begin[j];
                }
                eq_cols.push((col, 0.0));
            }
        }
    }
    pin(segs - 1, durations[segs - 1], goal, &mut eq_cols);

    let kinds: &[RowKind] = match mode {
        ConstraintMode::Zmp => &[RowKind::Zmp],
        ConstraintMode::Static => &[RowKind::Zmp, RowKind::Cog],
    };
    let mut in_cols: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut tags = Vec::new();
    let h = plan.z_profile.height_above_support;
    for (i, phase) in plan.phases.iter().enumerate() {
        for tau in sample_times(phase.duration, dt) {
            let support = plan.z_profile.accel_in_phase(i, tau) + GRAVITY;
            if support <= MIN_VERTICAL_SUPPORT {
                return Err(TrajError::FreeFall(starts[i] + tau));
            }
            let pos = pos_basis(tau);
            let acc = acc_basis(tau);
            for &kind in kinds {
                let k = match kind {
                    RowKind::Zmp => h / support,
                    RowKind::Cog => 0.0,
                };
                let row: [f64; 6] = std::array::from_fn(|j| pos[j] - k * acc[j]);
                for (l, line) in phase.polygon.lines.iter().enumerate() {
                    let mut col = DVector::zeros(n);
                    let o = i * SEGMENT_VARS;
                    for j in 0..6 {
                        col[o + j] = line.p * row[j];
                        col[o + 6 + j] = line.q * row[j];
                    }
                    in_cols.push((col, line.r));
                    tags.push(RowTag {
                        phase: i,
                        tau,
                        line: l,
                        kind,
                    });
                }
            }
        }
    }

    let stack = |cols: &[(DVector<f64>, f64)]| {
        let m = DMatrix::from_fn(n, cols.len(), |r, c| cols[c].0[r]);
        let v = DVector::from_iterator(cols.len(), cols.iter().map(|c| c.1));
        (m, v)
    };
    let (ce, ce0) = stack(&eq_cols);
    let (ci, ci0) = stack(&in_cols);
    let problem = QProblem::new(g, DVector::zeros(n), ce, ce0, ci, ci0).map_err(TrajError::Solver)?;
    Ok(AssembledQp {
        problem,
        tags,
        starts,
        durations,
    })
}

/// Optimized CoG trajectory with its solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CogSolution {
    pub trajectory: CoGTrajectory,
    /// Weighted integral of squared horizontal acceleration.
    pub objective: f64,
    pub junction_residual: f64,
    /// Smallest line slack over every constrained sample.
    pub min_slack: f64,
    pub iterations: usize,
}

/// Junction tolerance of the returned trajectory.
pub const JUNCTION_TOL: f64 = 1e-9;
/// Tolerated violation of a sampled support line.
pub const SLACK_TOL: f64 = 1e-8;

/// Solve the assembled QP and validate the result by re-evaluating every
/// sampled constraint on the spline itself.
pub fn solve_cog_trajectory(assembled: &AssembledQp, plan: &PhasePlan) -> Result<CogSolution, TrajError> {
    let sol = quadwalk_qp::solve(&assembled.problem, DEFAULT_TOL).map_err(|e| match e {
        QpError::Infeasible { certificate } => {
            let mut phases: Vec<usize> = certificate
                .iter()
                .filter_map(|&c| assembled.tags.get(c).map(|t| t.phase))
                .collect();
            phases.sort_unstable();
            phases.dedup();
            TrajError::Infeasible { phases, certificate }
        }
        other => TrajError::Solver(other),
    })?;
    let trajectory = CoGTrajectory {
        segments: assembled.unpack(&sol.x),
        z: plan.z_profile.clone(),
    };
    let junction_residual = trajectory.junction_residual();
    let mut min_slack = f64::INFINITY;
    for tag in &assembled.tags {
        let point = match tag.kind {
            RowKind::Zmp => trajectory
                .zmp_local(tag.phase, tag.tau)
                .ok_or(TrajError::FreeFall(assembled.starts[tag.phase] + tag.tau))?,
            RowKind::Cog => trajectory.segments[tag.phase].position(tag.tau),
        };
        min_slack = min_slack.min(plan.phases[tag.phase].polygon.lines[tag.line].eval(point));
    }
    if !(junction_residual < JUNCTION_TOL && min_slack >= -SLACK_TOL) {
        return Err(TrajError::Validation {
            junction: junction_residual,
            slack: min_slack,
        });
    }
    Ok(CogSolution {
        trajectory,
        objective: sol.objective,
        junction_residual,
        min_slack,
        iterations: sol.iterations,
    })
}
