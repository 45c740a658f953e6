use nalgebra::{Vector2, Vector3};

use super::zprofile::ZProfile;
use super::TrajError;
use crate::footstep_planner::FootholdPlan;
use crate::geometry::{self, convex_disjoint, convex_hull, edge_half_planes, HalfPlane, Point2};
use crate::legs::Leg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Triple,
    Quad,
}

/// Support polygon after moving every edge inward by the stability margin.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkPolygon {
    /// Normalized lines with the interior on the positive side.
    pub lines: Vec<HalfPlane>,
    /// Vertices of the shrunk region, counter-clockwise.
    pub vertices: Vec<Point2>,
}

impl ShrunkPolygon {
    pub fn min_slack(&self, p: Point2) -> f64 {
        self.lines.iter().map(|l| l.eval(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Shrink the convex counter-clockwise polygon `vertices` by `d`.
/// Fails when nothing of positive area remains.
pub fn shrink_polygon(vertices: &[Point2], d: f64) -> Result<ShrunkPolygon, TrajError> {
    if !(d >= 0.0) {
        return Err(TrajError::Params(format!("margin must be non-negative, got {d}")));
    }
    let empty = || TrajError::EmptyPolygon { phase: 0, step: None };
    if vertices.len() < 3 || geometry::signed_area2(vertices) <= 0.0 {
        return Err(empty());
    }
    let lines: Vec<HalfPlane> = edge_half_planes(vertices)
        .into_iter()
        .map(|l| l.shifted_inward(d))
        .collect();
    let mut region = vertices.to_vec();
    for l in &lines {
        region = geometry::clip(&region, l);
        if region.len() < 3 {
            return Err(empty());
        }
    }
    if geometry::area(&region) <= 1e-12 {
        return Err(empty());
    }
    Ok(ShrunkPolygon {
        lines,
        vertices: region,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportPhase {
    pub kind: PhaseKind,
    pub legs: Vec<Leg>,
    pub feet: Vec<Vector3<f64>>,
    /// Swinging leg of a triple phase.
    pub swing: Option<Leg>,
    /// Foothold step executed during a triple phase.
    pub step_index: Option<usize>,
    /// True for quad phases inserted between two steps (not the start/end rest phases).
    pub inserted: bool,
    pub duration: f64,
    pub polygon: ShrunkPolygon,
}

impl SupportPhase {
    pub fn ground_height(&self) -> f64 {
        self.feet.iter().map(|f| f.z).sum::<f64>() / self.feet.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub phases: Vec<SupportPhase>,
    pub z_profile: ZProfile,
    /// CoG xy at rest before the first and after the last phase.
    pub start: Vector2<f64>,
    pub goal: Vector2<f64>,
}

impl PhasePlan {
    fn new(phases: Vec<SupportPhase>, body_height: f64, start: Vector2<f64>, goal: Vector2<f64>) -> Self {
        let z_profile = profile_for(&phases, body_height);
        Self {
            phases,
            z_profile,
            start,
            goal,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn start_times(&self) -> Vec<f64> {
        self.z_profile.starts.clone()
    }

    /// Number of quad phases inserted between steps.
    pub fn inserted_quads(&self) -> usize {
        self.phases.iter().filter(|p| p.inserted).count()
    }

    /// Same plan with every duration multiplied by `scale`.
    pub fn time_scaled(&self, scale: f64) -> PhasePlan {
        let phases: Vec<SupportPhase> = self
            .phases
            .iter()
            .map(|p| SupportPhase {
                duration: p.duration * scale,
                ..p.clone()
            })
            .collect();
        PhasePlan::new(phases, self.z_profile.height_above_support, self.start, self.goal)
    }

    /// Phase index and local time for global time `t` (clamped into range).
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let starts = &self.z_profile.starts;
        let last = self.phases.len() - 1;
        let i = match starts.iter().rposition(|&s| s <= t) {
            Some(i) => i.min(last),
            None => 0,
        };
        (i, (t - starts[i]).clamp(0.0, self.phases[i].duration))
    }
}

fn profile_for(phases: &[SupportPhase], body_height: f64) -> ZProfile {
    let mut starts = Vec::with_capacity(phases.len());
    let mut t = 0.0;
    for p in phases {
        starts.push(t);
        t += p.duration;
    }
    ZProfile {
        levels: phases.iter().map(|p| p.ground_height() + body_height).collect(),
        starts,
        durations: phases.iter().map(|p| p.duration).collect(),
        height_above_support: body_height,
    }
}

fn support_phase(
    kind: PhaseKind,
    stance: &[Vector3<f64>; 4],
    swing: Option<Leg>,
    step_index: Option<usize>,
    duration: f64,
    margin: f64,
    phase: usize,
) -> Result<SupportPhase, TrajError> {
    let legs: Vec<Leg> = Leg::ALL.iter().copied().filter(|&l| Some(l) != swing).collect();
    let feet: Vec<Vector3<f64>> = legs.iter().map(|l| stance[l.index()]).collect();
    let hull = convex_hull(&feet.iter().map(|f| f.xy()).collect::<Vec<_>>());
    let polygon = shrink_polygon(&hull, margin).map_err(|e| match e {
        TrajError::EmptyPolygon { .. } => TrajError::EmptyPolygon { phase, step: step_index },
        other => other,
    })?;
    Ok(SupportPhase {
        kind,
        legs,
        feet,
        swing,
        step_index,
        inserted: false,
        duration,
        polygon,
    })
}

/// Durations and margin used to derive phases from footholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTiming {
    pub margin: f64,
    pub swing_duration: f64,
    pub quad_duration: f64,
    pub body_height: f64,
}

/// Whether a quad phase separates two consecutive swings: the swing legs are
/// diagonal and the two shrunk support triangles do not intersect.
pub fn needs_quad_phase(prev_swing: Leg, prev: &ShrunkPolygon, next_swing: Leg, next: &ShrunkPolygon) -> bool {
    prev_swing.diagonal() == next_swing && convex_disjoint(&prev.vertices, &next.vertices)
}

/// One triple phase per step, a quad phase between diagonal swings whose
/// shrunk triangles are disjoint, and a quad rest phase at both ends.
pub fn build_phases(plan: &FootholdPlan, timing: &PhaseTiming) -> Result<PhasePlan, TrajError> {
    if !(timing.margin >= 0.0 && timing.swing_duration > 0.0 && timing.quad_duration > 0.0) {
        return Err(TrajError::Params(format!("{timing:?}")));
    }
    if plan.steps.is_empty() {
        return Err(TrajError::EmptyPlan);
    }
    let mut stance = plan.initial_stance;
    let mut phases = vec![support_phase(
        PhaseKind::Quad,
        &stance,
        None,
        None,
        timing.quad_duration,
        timing.margin,
        0,
    )?];
    let mut previous: Option<(Leg, ShrunkPolygon)> = None;
    for step in &plan.steps {
        let triple = support_phase(
            PhaseKind::Triple,
            &stance,
            Some(step.leg),
            Some(step.step_index),
            timing.swing_duration,
            timing.margin,
            phases.len(),
        )?;
        if let Some((prev_leg, prev_poly)) = &previous {
            if needs_quad_phase(*prev_leg, prev_poly, step.leg, &triple.polygon) {
                let mut quad = support_phase(
                    PhaseKind::Quad,
                    &stance,
                    None,
                    None,
                    timing.quad_duration,
                    timing.margin,
                    phases.len(),
                )?;
                quad.inserted = true;
                phases.push(quad);
            }
        }
        previous = Some((step.leg, triple.polygon.clone()));
        phases.push(triple);
        stance[step.leg.index()] = step.position;
    }
    phases.push(support_phase(
        PhaseKind::Quad,
        &stance,
        None,
        None,
        timing.quad_duration,
        timing.margin,
        phases.len(),
    )?);
    let centroid = |s: &[Vector3<f64>; 4]| s.iter().map(|f| f.xy()).sum::<Vector2<f64>>() / 4.0;
    Ok(PhasePlan::new(
        phases,
        timing.body_height,
        centroid(&plan.initial_stance),
        centroid(&stance),
    ))
}
