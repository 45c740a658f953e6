use nalgebra::{Vector2, Vector3};

use super::{Action, BodyState, PlannerParams};
use crate::geometry::plane_tilt;
use crate::legs::Leg;
use crate::terrain::CostMap;

/// Unweighted components of an action's cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCostTerms {
    /// Mean of the `best_n` lowest terrain costs around each post-action foothold.
    pub terrain: f64,
    /// Fixed difficulty of the primitive.
    pub action: f64,
    /// Terrain rising above the swing clearance along the feet's straight paths.
    pub collision: f64,
    /// `|roll| + |pitch|` of the plane through the post-action footholds.
    pub orientation: f64,
}

impl ActionCostTerms {
    pub fn weighted(&self, params: &PlannerParams) -> f64 {
        let w = params.weights;
        if !self.terrain.is_finite() {
            return f64::INFINITY;
        }
        w.terrain * self.terrain
            + w.action * self.action
            + w.collision * self.collision
            + w.orientation * self.orientation
    }
}

pub fn action_cost_terms(
    s: &BodyState,
    a: &Action,
    map: &CostMap,
    params: &PlannerParams,
) -> ActionCostTerms {
    let lattice = &params.lattice;
    let next = s.apply(a, lattice);
    let (x0, y0, th0) = s.pose(lattice);
    let (x1, y1, th1) = next.pose(lattice);
    let infinite = ActionCostTerms {
        terrain: f64::INFINITY,
        action: params.kind_cost(a.kind),
        collision: 0.0,
        orientation: 0.0,
    };

    let mut terrain = 0.0;
    let mut collision = 0.0;
    let mut stance = Vec::with_capacity(4);
    for leg in Leg::ALL {
        let from = params.layout.nominal(leg, x0, y0, th0);
        let to = params.layout.nominal(leg, x1, y1, th1);
        let Some(best) = best_costs_mean(map, to, params.disc_radius, params.best_n) else {
            return infinite;
        };
        terrain += best;
        let (Some(h_from), Some(h_to)) = (map.height_at(from), map.height_at(to)) else {
            return infinite;
        };
        let apex = h_from.max(h_to) + params.swing_clearance;
        let peak = max_height_along(map, from, to);
        collision += (peak - apex).max(0.0);
        stance.push(Vector3::new(to.x, to.y, h_to));
    }

    ActionCostTerms {
        terrain: terrain / 4.0,
        action: params.kind_cost(a.kind),
        collision,
        orientation: plane_tilt(&stance, th1),
    }
}

/// Weighted cost of taking `a` from `s`; infinite when a foothold area is off
/// the map or has fewer than `best_n` usable cells.
pub fn action_cost(s: &BodyState, a: &Action, map: &CostMap, params: &PlannerParams) -> f64 {
    action_cost_terms(s, a, map, params).weighted(params)
}

fn best_costs_mean(map: &CostMap, p: Vector2<f64>, radius: f64, n: usize) -> Option<f64> {
    map.geometry().cell_of(p)?;
    let mut costs: Vec<f64> = map
        .geometry()
        .cells_in_disc(p, radius)
        .into_iter()
        .map(|(ix, iy)| map.cost(ix, iy))
        .filter(|c| c.is_finite())
        .collect();
    if costs.len() < n {
        return None;
    }
    costs.sort_by(f64::total_cmp);
    Some(costs[..n].iter().sum::<f64>() / n as f64)
}

fn max_height_along(map: &CostMap, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let step = 0.5 * map.geometry().resolution_xy;
    let samples = ((b - a).norm() / step).ceil().max(1.0) as usize;
    (0..=samples)
        .filter_map(|i| map.height_at(a + (b - a) * (i as f64 / samples as f64)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound on the cost-to-go: `c_bar * F(distance)`, where `F` counts the
/// translating actions still needed and `c_bar` bounds a single action's cost
/// from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicBound {
    pub c_bar: f64,
    pub max_step: f64,
    pub resolution: f64,
}

impl HeuristicBound {
    /// Bound for a search between `start` and `goal`. The terrain part of
    /// `c_bar` is the cheapest cell any foothold could touch inside the box
    /// spanned by both poses (grown by the foothold reach), or by the lattice
    /// bounds when the search is bounded.
    pub fn new(start: &BodyState, goal: &BodyState, map: &CostMap, params: &PlannerParams) -> Self {
        let lattice = &params.lattice;
        let (mut lo, mut hi) = {
            let a = lattice.position(start);
            let b = lattice.position(goal);
            (a.inf(&b), a.sup(&b))
        };
        if let Some(bounds) = params.bounds {
            let res = lattice.resolution_xy;
            lo = lo.inf(&Vector2::new(bounds.ix.0 as f64, bounds.iy.0 as f64).scale(res));
            hi = hi.sup(&Vector2::new(bounds.ix.1 as f64, bounds.iy.1 as f64).scale(res));
        }
        let reach = params.layout.offset(Leg::LF).norm() + params.disc_radius;
        let min_terrain = min_cost_in_box(map, lo.add_scalar(-reach), hi.add_scalar(reach));
        let min_kind = params
            .primitives
            .iter()
            .map(|p| params.kind_cost(p.kind))
            .fold(f64::INFINITY, f64::min);
        Self {
            c_bar: params.weights.action * min_kind + params.weights.terrain * min_terrain,
            max_step: params.max_step(),
            resolution: lattice.resolution_xy,
        }
    }

    /// Minimum number of translating actions to come within one cell of the goal.
    pub fn steps(&self, distance: f64) -> f64 {
        if self.max_step <= 0.0 {
            return 0.0;
        }
        let remaining = (distance - self.resolution).max(0.0) / self.max_step;
        (remaining - 1e-9).ceil().max(0.0)
    }

    pub fn eval(&self, s: &BodyState, goal: &BodyState, params: &PlannerParams) -> f64 {
        let d = (params.lattice.position(s) - params.lattice.position(goal)).norm();
        self.c_bar * self.steps(d)
    }
}

fn min_cost_in_box(map: &CostMap, lo: Vector2<f64>, hi: Vector2<f64>) -> f64 {
    let g = map.geometry();
    let to_idx = |v: f64, o: f64, n: usize| ((v - o) / g.resolution_xy).round().clamp(0.0, (n - 1) as f64) as usize;
    let (x0, x1) = (to_idx(lo.x, g.origin.x, g.nx), to_idx(hi.x, g.origin.x, g.nx));
    let (y0, y1) = (to_idx(lo.y, g.origin.y, g.ny), to_idx(hi.y, g.origin.y, g.ny));
    let mut best = f64::INFINITY;
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            best = best.min(map.cost(ix, iy));
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Heuristic value of `s` for reaching `goal`, with the bound taken over the
/// box between the two.
pub fn heuristic(s: &BodyState, goal: &BodyState, map: &CostMap, params: &PlannerParams) -> f64 {
    HeuristicBound::new(s, goal, map, params).eval(s, goal, params)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::body_planner::{ActionKind, Lattice};
    use crate::terrain::{CellRect, CostParams, GridGeometry, HeightGrid};

    fn flat_map() -> CostMap {
        let mut grid = HeightGrid::flat(GridGeometry::new(100, 60, Vector2::new(-1.0, -1.2))).unwrap();
        CostMap::compute(&mut grid, CostParams::default()).unwrap()
    }

    fn action(params: &PlannerParams, kind: ActionKind, heading: u32) -> Action {
        let prim = params.primitives.iter().find(|p| p.kind == kind).unwrap();
        params.instantiate(prim, heading)
    }

    #[test]
    fn flat_forward_costs_only_the_difficulty_term() {
        let params = PlannerParams::default();
        let map = flat_map();
        let s = BodyState { ix: 10, iy: 0, heading: 0 };
        let c = action_cost(&s, &action(&params, ActionKind::Forward, 0), &map, &params);
        assert_eq!(c, 0.3 * 1.0);
        let terms = action_cost_terms(&s, &action(&params, ActionKind::TurnLeft, 0), &map, &params);
        assert_eq!((terms.terrain, terms.collision, terms.orientation), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pallet_edge_under_a_foothold_costs_more() {
        let params = PlannerParams::default();
        let flat = flat_map();
        let mut grid = flat.grid().clone();
        // Two-cell-wide raised board under the front feet after a forward step
        // from x = 0, so every cell of their foothold discs sees an edge.
        let x_edge = ((0.48 + 1.0) / 0.04_f64).round() as usize;
        grid.fill(CellRect::new(x_edge, 0, x_edge + 2, 60), 0.15).unwrap();
        let edged = CostMap::compute(&mut grid, CostParams::default()).unwrap();
        let s = BodyState { ix: 0, iy: 0, heading: 0 };
        let a = action(&params, ActionKind::Forward, 0);
        let on_flat = action_cost_terms(&s, &a, &flat, &params);
        let on_edge = action_cost_terms(&s, &a, &edged, &params);
        assert!(on_edge.terrain > on_flat.terrain);
        assert_eq!(on_edge.action, on_flat.action);
        assert!(on_edge.weighted(&params) > on_flat.weighted(&params));
    }

    #[test]
    fn footholds_off_the_map_are_pruned() {
        let params = PlannerParams::default();
        let map = flat_map();
        let s = BodyState { ix: -15, iy: 0, heading: 0 };
        let a = action(&params, ActionKind::Back, 0);
        assert_eq!(action_cost(&s, &a, &map, &params), f64::INFINITY);
    }

    #[test]
    fn tall_obstacle_on_swing_path_adds_collision_cost() {
        let params = PlannerParams::default();
        let mut grid = flat_map().grid().clone();
        // Thin 0.3 m wall between the current and next front footholds.
        let ix = ((0.37 + 0.06 + 1.0) / 0.04_f64).round() as usize;
        grid.apply_patch(&DMatrix::repeat(60, 1, 0.3), (ix, 0)).unwrap();
        let map = CostMap::compute(&mut grid, CostParams::default()).unwrap();
        let s = BodyState { ix: 0, iy: 0, heading: 0 };
        let terms = action_cost_terms(&s, &action(&params, ActionKind::Forward, 0), &map, &params);
        // Two front legs cross 0.30 m against a 0.12 m apex.
        assert!((terms.collision - 2.0 * (0.3 - 0.12)).abs() < 1e-12, "{terms:?}");
    }

    #[test]
    fn heuristic_hand_computation() {
        let params = PlannerParams { lattice: Lattice { resolution_xy: 0.04, headings: 4 }, ..Default::default() };
        let map = flat_map();
        let bound = HeuristicBound::new(
            &BodyState { ix: 0, iy: 0, heading: 0 },
            &BodyState { ix: 15, iy: 0, heading: 0 },
            &map,
            &params,
        );
        assert!((bound.max_step - 0.12).abs() < 1e-15);
        assert_eq!(bound.c_bar, 0.3);
        assert_eq!(bound.steps(0.60), 5.0);
        let s = BodyState { ix: 0, iy: 0, heading: 0 };
        let g = BodyState { ix: 15, iy: 0, heading: 0 };
        assert!((heuristic(&s, &g, &map, &params) - 5.0 * 0.3).abs() < 1e-15);
        assert_eq!(heuristic(&g, &g, &map, &params), 0.0);
    }
}
