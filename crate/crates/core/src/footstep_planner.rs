//! Turns body actions into an ordered sequence of concrete footholds.

use std::fmt::Write as _;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::body_planner::{ActionKind, ActionPlan, Lattice};
use crate::geometry::{inradius, plane_tilt};
use crate::legs::{Leg, StanceLayout};
use crate::terrain::{CellRect, CostMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FootstepError {
    #[error("no reachable foothold for {leg} during action {action_index} ({kind})")]
    UnreachableFoothold {
        leg: Leg,
        action_index: usize,
        kind: ActionKind,
    },
    #[error("initial foothold of {0} is off the map")]
    StanceOffMap(Leg),
    #[error("invalid footstep parameters: {0}")]
    Params(String),
    #[error("foothold plan parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Weights of (terrain, stability, clearance, orientation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootholdWeights {
    pub terrain: f64,
    pub stability: f64,
    pub clearance: f64,
    pub orientation: f64,
}

impl Default for FootholdWeights {
    fn default() -> Self {
        Self {
            terrain: 1.0,
            stability: 1.0,
            clearance: 1.0,
            orientation: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootstepParams {
    pub layout: StanceLayout,
    /// Radius of the search disc around each nominal foothold (m).
    pub search_radius: f64,
    /// Maximum distance from the nominal foothold (m).
    pub reach: f64,
    /// Desired inradius of the next support triangle (m).
    pub min_inradius: f64,
    pub swing_clearance: f64,
    pub weights: FootholdWeights,
    /// Steps planned ahead.
    pub horizon: usize,
}

impl Default for FootstepParams {
    fn default() -> Self {
        Self {
            layout: StanceLayout::default(),
            search_radius: 0.10,
            reach: 0.45,
            min_inradius: 0.08,
            swing_clearance: 0.12,
            weights: FootholdWeights::default(),
            horizon: 8,
        }
    }
}

impl FootstepParams {
    pub fn validate(&self) -> Result<(), FootstepError> {
        let w = self.weights;
        let ok = self.search_radius > 0.0
            && self.reach > 0.0
            && self.min_inradius >= 0.0
            && self.swing_clearance >= 0.0
            && self.horizon >= 1
            && [w.terrain, w.stability, w.clearance, w.orientation]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(FootstepError::Params(format!("{self:?}")))
        }
    }
}

/// Swing order for one action. Sideways actions lead with the legs on the
/// side moved towards; forward motion uses the lateral sequence.
pub fn swing_sequence_for(kind: ActionKind) -> [Leg; 4] {
    use Leg::*;
    match kind {
        ActionKind::Forward | ActionKind::DiagonalLeft | ActionKind::TurnLeft => [LH, LF, RH, RF],
        ActionKind::DiagonalRight | ActionKind::TurnRight => [RH, RF, LH, LF],
        ActionKind::Left => [LF, LH, RF, RH],
        ActionKind::Right => [RF, RH, LF, LH],
        ActionKind::Back => [RF, RH, LF, LH],
    }
}

/// Sequence for `kind` given the previously swung leg. A sequence that would
/// swing the same leg twice in a row is rotated by one.
pub fn swing_sequence_after(kind: ActionKind, previous: Option<Leg>) -> [Leg; 4] {
    let mut seq = swing_sequence_for(kind);
    if previous == Some(seq[0]) {
        seq.rotate_left(1);
    }
    seq
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foothold {
    pub leg: Leg,
    pub position: Vector3<f64>,
    pub step_index: usize,
    /// Index of the body action this step belongs to.
    pub action_index: usize,
}

/// Where the robot stands and what it is about to do when a foothold is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootholdContext {
    pub stance: [Vector3<f64>; 4],
    pub swing: Leg,
    /// Leg swung right after this one.
    pub next_swing: Leg,
    /// Body yaw after the action (rad).
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootholdCostTerms {
    pub terrain: f64,
    pub stability: f64,
    pub clearance: f64,
    pub orientation: f64,
}

impl FootholdCostTerms {
    pub fn weighted(&self, w: &FootholdWeights) -> f64 {
        if !self.terrain.is_finite() {
            return f64::INFINITY;
        }
        w.terrain * self.terrain
            + w.stability * self.stability
            + w.clearance * self.clearance
            + w.orientation * self.orientation
    }
}

/// Cost components of placing `ctx.swing` at `p`.
///
/// * terrain: cost-map value at `p`
/// * stability: shortfall of the inradius of the triangle that supports the
///   body during the next swing (the new foothold plus the two legs that stay)
///   below `min_inradius`
/// * clearance: terrain rising above the swing apex on the straight path
/// * orientation: `|roll| + |pitch|` of the plane through the resulting stance
pub fn foothold_cost_terms(
    p: Vector2<f64>,
    ctx: &FootholdContext,
    map: &CostMap,
    params: &FootstepParams,
) -> FootholdCostTerms {
    let terrain = map.cost_at(p);
    let Some(z) = map.height_at(p) else {
        return FootholdCostTerms {
            terrain: f64::INFINITY,
            stability: 0.0,
            clearance: 0.0,
            orientation: 0.0,
        };
    };
    let target = Vector3::new(p.x, p.y, z);
    let mut stance = ctx.stance;
    stance[ctx.swing.index()] = target;

    let support: Vec<Vector2<f64>> = Leg::ALL
        .iter()
        .filter(|&&l| l != ctx.next_swing)
        .map(|&l| stance[l.index()].xy())
        .collect();
    let stability = if ctx.next_swing == ctx.swing {
        0.0
    } else {
        (params.min_inradius - inradius(support[0], support[1], support[2])).max(0.0)
    };

    let from = ctx.stance[ctx.swing.index()];
    let apex = from.z.max(z) + params.swing_clearance;
    let step = 0.5 * map.geometry().resolution_xy;
    let n = ((p - from.xy()).norm() / step).ceil().max(1.0) as usize;
    let peak = (0..=n)
        .filter_map(|i| map.height_at(from.xy() + (p - from.xy()) * (i as f64 / n as f64)))
        .fold(f64::NEG_INFINITY, f64::max);

    FootholdCostTerms {
        terrain,
        stability,
        clearance: (peak - apex).max(0.0),
        orientation: plane_tilt(&stance, ctx.yaw),
    }
}

pub fn foothold_cost(p: Vector2<f64>, ctx: &FootholdContext, map: &CostMap, params: &FootstepParams) -> f64 {
    foothold_cost_terms(p, ctx, map, params).weighted(&params.weights)
}

/// Body poses and action kinds a foothold plan was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyTrack {
    /// Pose `(x, y, theta)` before the first action and after each action.
    pub poses: Vec<(f64, f64, f64)>,
    pub kinds: Vec<ActionKind>,
}

impl BodyTrack {
    pub fn from_plan(plan: &ActionPlan, lattice: &Lattice) -> Self {
        Self {
            poses: plan.states.iter().map(|s| s.pose(lattice)).collect(),
            kinds: plan.actions.iter().map(|a| a.kind).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootholdPlan {
    pub initial_stance: [Vector3<f64>; 4],
    pub steps: Vec<Foothold>,
    pub horizon: usize,
    pub track: BodyTrack,
}

impl FootholdPlan {
    /// Stance after the first `k` steps.
    pub fn stance_after(&self, k: usize) -> [Vector3<f64>; 4] {
        let mut stance = self.initial_stance;
        for step in &self.steps[..k.min(self.steps.len())] {
            stance[step.leg.index()] = step.position;
        }
        stance
    }

    pub fn final_stance(&self) -> [Vector3<f64>; 4] {
        self.stance_after(self.steps.len())
    }

    /// Text records: `stance <leg> x y z` for the initial feet, `body` records
    /// for the body track and `step <i> <leg> x y z` per step.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for leg in Leg::ALL {
            let p = self.initial_stance[leg.index()];
            let _ = writeln!(out, "stance {leg} {} {} {}", p.x, p.y, p.z);
        }
        for (i, &(x, y, th)) in self.track.poses.iter().enumerate() {
            let kind = if i == 0 { "start" } else { self.track.kinds[i - 1].name() };
            let _ = writeln!(out, "body {i} {kind} {x} {y} {th}");
        }
        for s in &self.steps {
            let _ = writeln!(
                out,
                "step {} {} {} {} {}",
                s.step_index, s.leg, s.position.x, s.position.y, s.position.z
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FootstepError> {
        let mut stance: [Option<Vector3<f64>>; 4] = [None; 4];
        let mut steps = Vec::new();
        let mut track = BodyTrack {
            poses: Vec::new(),
            kinds: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let perr = |msg: String| FootstepError::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() || f[0].starts_with('#') {
                continue;
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("`{s}`: {e}")));
            let leg = |s: &str| s.parse::<Leg>().map_err(|e| perr(e.to_string()));
            match (f[0], f.len()) {
                ("stance", 5) => {
                    stance[leg(f[1])?.index()] = Some(Vector3::new(num(f[2])?, num(f[3])?, num(f[4])?));
                }
                ("body", 6) => {
                    if f[2] != "start" {
                        track.kinds.push(f[2].parse().map_err(perr)?);
                    }
                    track.poses.push((num(f[3])?, num(f[4])?, num(f[5])?));
                }
                ("step", 6) => {
                    let step_index: usize = f[1].parse().map_err(|e| perr(format!("`{}`: {e}", f[1])))?;
                    if step_index != steps.len() {
                        return Err(perr(format!("expected step {}, got {step_index}", steps.len())));
                    }
                    steps.push(Foothold {
                        leg: leg(f[2])?,
                        position: Vector3::new(num(f[3])?, num(f[4])?, num(f[5])?),
                        step_index,
                        action_index: 0,
                    });
                }
                _ => return Err(perr(format!("unrecognized record `{line}`"))),
            }
        }
        let missing = |leg: Leg| FootstepError::Parse {
            line: 0,
            msg: format!("missing stance record for {leg}"),
        };
        let initial_stance = [
            stance[0].ok_or_else(|| missing(Leg::LF))?,
            stance[1].ok_or_else(|| missing(Leg::RF))?,
            stance[2].ok_or_else(|| missing(Leg::LH))?,
            stance[3].ok_or_else(|| missing(Leg::RH))?,
        ];
        // Recover action indices from the swing sequences when the body track is present.
        if !track.kinds.is_empty() {
            let mut k = 0;
            let mut prev = None;
            'outer: for (ai, &kind) in track.kinds.iter().enumerate() {
                for leg in swing_sequence_after(kind, prev) {
                    if k == steps.len() {
                        break 'outer;
                    }
                    steps[k].action_index = ai;
                    prev = Some(leg);
                    k += 1;
                }
            }
        }
        let horizon = steps.len().max(1);
        Ok(Self {
            initial_stance,
            steps,
            horizon,
            track,
        })
    }
}

pub fn nominal_stance(
    map: &CostMap,
    layout: &StanceLayout,
    (x, y, th): (f64, f64, f64),
) -> Result<[Vector3<f64>; 4], FootstepError> {
    let mut out = [Vector3::zeros(); 4];
    for leg in Leg::ALL {
        let p = layout.nominal(leg, x, y, th);
        let z = map.height_at(p).ok_or(FootstepError::StanceOffMap(leg))?;
        out[leg.index()] = Vector3::new(p.x, p.y, z);
    }
    Ok(out)
}

/// Lowest-cost foothold for `ctx.swing` around `nominal`; ties go to the
/// candidate nearest the nominal point, then to the lower `(ix, iy)` cell.
fn choose_foothold(
    nominal: Vector2<f64>,
    ctx: &FootholdContext,
    map: &CostMap,
    params: &FootstepParams,
) -> Option<Vector3<f64>> {
    let geometry = map.geometry();
    let mut candidates: Vec<(Vector2<f64>, (usize, usize))> = Vec::new();
    if let Some(cell) = geometry.cell_of(nominal) {
        candidates.push((nominal, cell));
    }
    for (ix, iy) in geometry.cells_in_disc(nominal, params.search_radius) {
        candidates.push((geometry.cell_center(ix, iy), (ix, iy)));
    }
    // (cost, distance to nominal, cell, point)
    type Candidate = (f64, f64, (usize, usize), Vector2<f64>);
    let mut best: Option<Candidate> = None;
    for (p, cell) in candidates {
        let dist = (p - nominal).norm();
        if dist > params.reach {
            continue;
        }
        let cost = foothold_cost(p, ctx, map, params);
        if !cost.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bc, bd, bcell, _)) => {
                cost < *bc || (cost == *bc && (dist < *bd || (dist == *bd && (cell.0, cell.1) < *bcell)))
            }
        };
        if better {
            best = Some((cost, dist, cell, p));
        }
    }
    best.map(|(_, _, _, p)| Vector3::new(p.x, p.y, map.height_at(p).expect("candidate is on the map")))
}

fn plan_steps(
    track: &BodyTrack,
    initial_stance: [Vector3<f64>; 4],
    keep: &[Foothold],
    map: &CostMap,
    params: &FootstepParams,
    horizon: usize,
) -> Result<Vec<Foothold>, FootstepError> {
    let mut steps: Vec<Foothold> = Vec::new();
    let mut stance = initial_stance;
    let mut previous = None;
    for (ai, &kind) in track.kinds.iter().enumerate() {
        let (x, y, th) = track.poses[ai + 1];
        let seq = swing_sequence_after(kind, previous);
        for (k, &leg) in seq.iter().enumerate() {
            if steps.len() >= horizon {
                return Ok(steps);
            }
            let position = if let Some(kept) = keep.get(steps.len()) {
                kept.position
            } else {
                let next_swing = if k + 1 < 4 {
                    seq[k + 1]
                } else {
                    match track.kinds.get(ai + 1) {
                        Some(&next) => swing_sequence_after(next, Some(leg))[0],
                        None => seq[0],
                    }
                };
                let ctx = FootholdContext {
                    stance,
                    swing: leg,
                    next_swing,
                    yaw: th,
                };
                let nominal = params.layout.nominal(leg, x, y, th);
                choose_foothold(nominal, &ctx, map, params).ok_or(FootstepError::UnreachableFoothold {
                    leg,
                    action_index: ai,
                    kind,
                })?
            };
            stance[leg.index()] = position;
            steps.push(Foothold {
                leg,
                position,
                step_index: steps.len(),
                action_index: ai,
            });
            previous = Some(leg);
        }
    }
    Ok(steps)
}

/// Footholds for the actions of `plan`, starting from the nominal stance at
/// the plan's start pose. At most `params.horizon` steps are produced.
pub fn plan_footsteps(
    plan: &ActionPlan,
    lattice: &Lattice,
    map: &CostMap,
    params: &FootstepParams,
) -> Result<FootholdPlan, FootstepError> {
    params.validate()?;
    let track = BodyTrack::from_plan(plan, lattice);
    let initial_stance = nominal_stance(map, &params.layout, track.poses[0])?;
    plan_footsteps_from(track, initial_stance, map, params)
}

/// Footholds for a body track starting from an explicit stance.
pub fn plan_footsteps_from(
    track: BodyTrack,
    initial_stance: [Vector3<f64>; 4],
    map: &CostMap,
    params: &FootstepParams,
) -> Result<FootholdPlan, FootstepError> {
    params.validate()?;
    let steps = plan_steps(&track, initial_stance, &[], map, params, params.horizon)?;
    Ok(FootholdPlan {
        initial_stance,
        steps,
        horizon: params.horizon,
        track,
    })
}

/// Recompute the steps after the first `executed` against an updated map.
/// Returns `prev` unchanged when no remaining search area is near `changed`.
pub fn replan_footsteps(
    prev: &FootholdPlan,
    changed: &CellRect,
    executed: usize,
    map: &CostMap,
    params: &FootstepParams,
) -> Result<FootholdPlan, FootstepError> {
    params.validate()?;
    let executed = executed.min(prev.steps.len());
    let geometry = map.geometry();
    let (lo, hi) = geometry.world_bounds(changed);
    let margin = params.search_radius + map.params().influence_radius() as f64 * geometry.resolution_xy;
    let touched = prev.steps[executed..].iter().any(|s| {
        let (x, y, th) = prev.track.poses[s.action_index + 1];
        let nominal = params.layout.nominal(s.leg, x, y, th);
        let dx = (lo.x - nominal.x).max(0.0).max(nominal.x - hi.x);
        let dy = (lo.y - nominal.y).max(0.0).max(nominal.y - hi.y);
        dx.hypot(dy) <= margin
    });
    if !touched {
        return Ok(prev.clone());
    }
    let horizon = prev.horizon.max(prev.steps.len());
    let steps = plan_steps(
        &prev.track,
        prev.initial_stance,
        &prev.steps[..executed],
        map,
        params,
        horizon,
    )?;
    Ok(FootholdPlan {
        initial_stance: prev.initial_stance,
        steps,
        horizon: prev.horizon,
        track: prev.track.clone(),
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::body_planner::{BodyState, PlannerParams};
    use crate::geometry::area;
    use crate::terrain::{CostParams, GridGeometry, HeightGrid, VOID_ELEVATION};

    fn map_with(f: impl FnOnce(&mut HeightGrid)) -> CostMap {
        let mut grid = HeightGrid::flat(GridGeometry::new(125, 60, Vector2::new(-1.0, -1.2))).unwrap();
        f(&mut grid);
        CostMap::compute(&mut grid, CostParams::default()).unwrap()
    }

    fn forward_plan(n: usize) -> (ActionPlan, PlannerParams) {
        let params = PlannerParams::default();
        let mut plan = ActionPlan::empty(BodyState { ix: 0, iy: 0, heading: 0 });
        for _ in 0..n {
            let a = params.actions_at(0)[0];
            let s = plan.end().apply(&a, &params.lattice);
            plan.actions.push(a);
            plan.states.push(s);
            plan.action_costs.push(0.3);
        }
        (plan, params)
    }

    #[test]
    fn sequences() {
        use Leg::*;
        assert_eq!(swing_sequence_for(ActionKind::Forward), [LH, LF, RH, RF]);
        assert!(swing_sequence_for(ActionKind::Left)[0].is_left());
        assert!(!swing_sequence_for(ActionKind::Right)[0].is_left());
        assert_eq!(swing_sequence_for(ActionKind::Left), swing_sequence_for(ActionKind::Left));
        assert_eq!(swing_sequence_after(ActionKind::Forward, Some(LH)), [LF, RH, RF, LH]);
    }

    #[test]
    fn flat_forward_footholds_are_nominal() {
        let (plan, pp) = forward_plan(2);
        let map = map_with(|_| {});
        let params = FootstepParams::default();
        let fp = plan_footsteps(&plan, &pp.lattice, &map, &params).unwrap();
        assert_eq!(fp.steps.len(), 8);
        for s in &fp.steps {
            let (x, y, th) = fp.track.poses[s.action_index + 1];
            let nominal = params.layout.nominal(s.leg, x, y, th);
            assert_eq!(s.position, Vector3::new(nominal.x, nominal.y, 0.0));
        }
        let legs: Vec<Leg> = fp.steps.iter().map(|s| s.leg).collect();
        use Leg::*;
        assert_eq!(legs, [LH, LF, RH, RF, LH, LF, RH, RF]);
        let short = plan_footsteps(&plan, &pp.lattice, &map, &FootstepParams { horizon: 3, ..params }).unwrap();
        assert_eq!(short.steps.len(), 3);
    }

    #[test]
    fn shrinking_the_next_triangle_costs_stability() {
        let map = map_with(|_| {});
        let params = FootstepParams::default();
        let stance = StanceLayout::default().nominal_all(0.0, 0.0, 0.0).map(|p| Vector3::new(p.x, p.y, 0.0));
        let ctx = FootholdContext {
            stance,
            swing: Leg::LH,
            next_swing: Leg::LF,
            yaw: 0.0,
        };
        let nominal = stance[Leg::LH.index()].xy();
        let ok = foothold_cost_terms(nominal, &ctx, &map, &params);
        assert_eq!(ok.stability, 0.0);
        assert_eq!((ok.terrain, ok.orientation, ok.clearance), (0.0, 0.0, 0.0));
        // Put LH next to RH: the next support triangle (LH, RF, RH) thins out.
        let p = Vector2::new(-0.37, -0.30);
        let terms = foothold_cost_terms(p, &ctx, &map, &params);
        let rf = stance[Leg::RF.index()].xy();
        let rh = stance[Leg::RH.index()].xy();
        let expected = 0.08 - inradius(p, rf, rh);
        assert!(expected > 0.0);
        assert!((terms.stability - expected).abs() < 1e-15);
    }

    #[test]
    fn interior_beats_edge() {
        let map = map_with(|g| g.fill(CellRect::new(40, 0, 125, 60), 0.15).unwrap());
        let params = FootstepParams::default();
        let stance = StanceLayout::default().nominal_all(0.6, 0.0, 0.0).map(|p| Vector3::new(p.x, p.y, 0.0));
        let ctx = FootholdContext {
            stance,
            swing: Leg::LF,
            next_swing: Leg::RH,
            yaw: 0.0,
        };
        let edge = Vector2::new(0.6, 0.36);
        let interior = Vector2::new(0.8, 0.36);
        let te = foothold_cost_terms(edge, &ctx, &map, &params);
        let ti = foothold_cost_terms(interior, &ctx, &map, &params);
        assert!(te.terrain > ti.terrain);
        assert!(foothold_cost(edge, &ctx, &map, &params) > foothold_cost(interior, &ctx, &map, &params));
    }

    #[test]
    fn no_foothold_in_a_gap_and_unreachable_error() {
        let (plan, pp) = forward_plan(4);
        let gap_x = ((0.50 + 1.0) / 0.04) as usize;
        let map = map_with(|g| g.fill(CellRect::new(gap_x, 0, gap_x + 4, 60), VOID_ELEVATION).unwrap());
        let params = FootstepParams { horizon: 100, ..Default::default() };
        let fp = plan_footsteps(&plan, &pp.lattice, &map, &params).unwrap();
        for s in &fp.steps {
            assert!(!map.grid().is_void(
                map.geometry().cell_of(s.position.xy()).unwrap().0,
                map.geometry().cell_of(s.position.xy()).unwrap().1
            ));
            assert!(s.position.z > VOID_ELEVATION);
        }
        let wide = map_with(|g| g.fill(CellRect::new(gap_x - 10, 0, gap_x + 10, 60), VOID_ELEVATION).unwrap());
        assert!(matches!(
            plan_footsteps(&plan, &pp.lattice, &wide, &params),
            Err(FootstepError::UnreachableFoothold { .. })
        ));
    }

    #[test]
    fn support_triangles_stay_nondegenerate_and_within_reach() {
        let (plan, pp) = forward_plan(5);
        let map = map_with(|g| g.fill(CellRect::new(38, 10, 70, 50), 0.15).unwrap());
        let params = FootstepParams { horizon: 100, ..Default::default() };
        let fp = plan_footsteps(&plan, &pp.lattice, &map, &params).unwrap();
        let mut stance = fp.initial_stance;
        for s in &fp.steps {
            let tri: Vec<Vector2<f64>> = Leg::ALL.iter().filter(|&&l| l != s.leg).map(|l| stance[l.index()].xy()).collect();
            assert!(area(&tri) > 1e-4);
            let (x, y, th) = fp.track.poses[s.action_index + 1];
            assert!((s.position.xy() - params.layout.nominal(s.leg, x, y, th)).norm() <= 0.45);
            stance[s.leg.index()] = s.position;
        }
        for w in fp.steps.windows(2) {
            assert_ne!(w[0].leg, w[1].leg);
        }
    }

    #[test]
    fn replan_keeps_executed_steps() {
        let (plan, pp) = forward_plan(2);
        let mut map = map_with(|_| {});
        let params = FootstepParams::default();
        let fp = plan_footsteps(&plan, &pp.lattice, &map, &params).unwrap();
        let far = CellRect::new(110, 50, 115, 55);
        assert_eq!(replan_footsteps(&fp, &far, 2, &map, &params).unwrap(), fp);

        let mut grid = map.grid().clone();
        let rect = grid.apply_patch(&DMatrix::repeat(4, 4, 0.15), (39, 37)).unwrap();
        map.update_region(&mut grid, rect.dilate(2, 125, 60)).unwrap();
        let re = replan_footsteps(&fp, &rect, 2, &map, &params).unwrap();
        assert_eq!(re.steps[..2], fp.steps[..2]);
        assert_eq!(re.steps.len(), fp.steps.len());
        assert_ne!(re.steps, fp.steps);
        let fresh = plan_footsteps(&plan, &pp.lattice, &map, &params).unwrap();
        assert_eq!(re.steps[2..], fresh.steps[2..]);
    }

    #[test]
    fn text_round_trip() {
        let (plan, pp) = forward_plan(2);
        let map = map_with(|g| g.fill(CellRect::new(30, 0, 125, 60), 0.07).unwrap());
        let fp = plan_footsteps(&plan, &pp.lattice, &map, &FootstepParams::default()).unwrap();
        let back = FootholdPlan::from_text(&fp.to_text()).unwrap();
        assert_eq!(back.steps, fp.steps);
        assert_eq!(back.initial_stance, fp.initial_stance);
        assert_eq!(back.track, fp.track);
    }
}
