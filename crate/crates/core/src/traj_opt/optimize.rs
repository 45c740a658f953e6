use super::assemble::{assemble_qp, sample_times, solve_cog_trajectory, BoundaryState, CogSolution, ConstraintMode};
use super::phases::{build_phases, PhasePlan, PhaseTiming};
use super::TrajError;
use crate::footstep_planner::FootholdPlan;

/// How phase durations are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    /// Use the configured durations as given.
    Fixed,
    /// Shrink all durations by one common factor to the fastest feasible
    /// timing, found by bisection to the given relative tolerance.
    Minimal { rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajParams {
    /// Stability margin between the ZMP and the support polygon edges (m).
    pub margin: f64,
    pub swing_duration: f64,
    pub quad_duration: f64,
    /// Constraint sampling period (s).
    pub dt: f64,
    pub w_x: f64,
    pub w_y: f64,
    pub body_height: f64,
    pub mode: ConstraintMode,
    pub timing: Timing,
}

impl Default for TrajParams {
    fn default() -> Self {
        Self {
            margin: 0.06,
            swing_duration: 0.8,
            quad_duration: 0.3,
            dt: 0.05,
            w_x: 1.0,
            w_y: 1.5,
            body_height: 0.5,
            mode: ConstraintMode::Zmp,
            timing: Timing::Fixed,
        }
    }
}

impl TrajParams {
    pub fn phase_timing(&self) -> PhaseTiming {
        PhaseTiming {
            margin: self.margin,
            swing_duration: self.swing_duration,
            quad_duration: self.quad_duration,
            body_height: self.body_height,
        }
    }
}

/// Smallest and largest duration scale tried by the minimal-time search.
const MIN_SCALE: f64 = 0.02;
const MAX_SCALE: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedTrajectory {
    pub phases: PhasePlan,
    pub solution: CogSolution,
    /// Factor applied to the configured durations.
    pub scale: f64,
}

impl OptimizedTrajectory {
    pub fn duration(&self) -> f64 {
        self.phases.total_duration()
    }

    /// ZMP slack against each phase's shrunk polygon at every constraint
    /// sample, grouped by phase. Free fall counts as minus infinity.
    pub fn sampled_slacks(&self, dt: f64) -> Vec<Vec<f64>> {
        let traj = &self.solution.trajectory;
        self.phases
            .phases
            .iter()
            .enumerate()
            .map(|(i, p)| {
                sample_times(p.duration, dt)
                    .into_iter()
                    .map(|tau| traj.zmp_local(i, tau).map_or(f64::NEG_INFINITY, |z| p.polygon.min_slack(z)))
                    .collect()
            })
            .collect()
    }
}

fn solve_phases(phases: &PhasePlan, params: &TrajParams) -> Result<CogSolution, TrajError> {
    let qp = assemble_qp(
        phases,
        &BoundaryState::rest(phases.start),
        &BoundaryState::rest(phases.goal),
        params.dt,
        (params.w_x, params.w_y),
        params.mode,
    )?;
    solve_cog_trajectory(&qp, phases)
}

/// Failures that mean "too fast" to the minimal-time search; compressed height
/// changes can demand more downward acceleration than gravity provides.
fn is_infeasible(e: &TrajError) -> bool {
    matches!(e, TrajError::Infeasible { .. } | TrajError::Validation { .. } | TrajError::FreeFall(_))
}

/// Build the support phases for `plan` and optimize the CoG trajectory,
/// starting and ending at rest over the first and last stance centroids.
pub fn optimize(plan: &FootholdPlan, params: &TrajParams) -> Result<OptimizedTrajectory, TrajError> {
    let base = build_phases(plan, &params.phase_timing())?;
    let attempt = |scale: f64| -> Result<OptimizedTrajectory, TrajError> {
        let phases = if scale == 1.0 { base.clone() } else { base.time_scaled(scale) };
        let solution = solve_phases(&phases, params)?;
        Ok(OptimizedTrajectory {
            phases,
            solution,
            scale,
        })
    };
    let rel_tol = match params.timing {
        Timing::Fixed => return attempt(1.0),
        Timing::Minimal { rel_tol } if rel_tol > 0.0 && rel_tol < 1.0 => rel_tol,
        Timing::Minimal { rel_tol } => {
            return Err(TrajError::Params(format!("bisection tolerance {rel_tol} outside (0, 1)")))
        }
    };

    let mut hi = 1.0;
    let mut best = loop {
        match attempt(hi) {
            Ok(t) => break t,
            Err(e) if is_infeasible(&e) && hi < MAX_SCALE => hi *= 2.0,
            Err(e) => return Err(e),
        }
    };
    let mut lo = MIN_SCALE;
    match attempt(lo) {
        Ok(t) => return Ok(t),
        Err(e) if is_infeasible(&e) => {}
        Err(e) => return Err(e),
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        match attempt(mid) {
            Ok(t) => {
                hi = mid;
                best = t;
            }
            Err(e) if is_infeasible(&e) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}
