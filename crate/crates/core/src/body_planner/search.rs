use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use nalgebra::Vector2;

use super::cost::{action_cost, HeuristicBound};
use super::{Action, ActionPlan, BodyPlanError, BodyState, PlannerParams};
use crate::legs::Leg;
use crate::terrain::{CellRect, CostMap};

/// Inflation schedule: start at `eps0`, decrease by `step` down to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub step: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { eps0: 3.0, step: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub epsilon: f64,
    pub expansions: usize,
    /// Best goal cost known after the iteration (infinite if none).
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AraOutcome {
    /// Emitted plans, strictly decreasing in cost.
    pub plans: Vec<ActionPlan>,
    pub iterations: Vec<IterationStats>,
    /// Set when a later iteration ran out of expansions.
    pub budget_exhausted: bool,
}

impl AraOutcome {
    pub fn best(&self) -> &ActionPlan {
        self.plans.last().expect("an outcome carries at least one plan")
    }

    pub fn expansions(&self) -> usize {
        self.iterations.iter().map(|i| i.expansions).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Heap entry ordered by key, then g, then lattice indices.
type Entry = Reverse<(Key, Key, i64, i64, u32)>;

#[derive(Debug, Clone)]
struct Node {
    g: f64,
    parent: Option<(BodyState, usize)>,
    open_key: Option<f64>,
    closed_in: usize,
    in_incons: bool,
}

struct Search<'a> {
    map: &'a CostMap,
    params: &'a PlannerParams,
    goal: BodyState,
    bound: HeuristicBound,
    actions: Vec<Vec<Action>>,
    nodes: HashMap<BodyState, Node>,
    edge_costs: HashMap<(BodyState, usize), f64>,
    open: BinaryHeap<Entry>,
    incons: Vec<BodyState>,
    goal_g: f64,
    goal_parent: Option<BodyState>,
    iteration: usize,
}

impl<'a> Search<'a> {
    fn key(&self, s: &BodyState, g: f64, eps: f64) -> f64 {
        g + eps * self.bound.eval(s, &self.goal, self.params)
    }

    fn push_open(&mut self, s: BodyState, g: f64, eps: f64) {
        let key = self.key(&s, g, eps);
        if let Some(n) = self.nodes.get_mut(&s) {
            n.open_key = Some(key);
        }
        self.open.push(Reverse((Key(key), Key(g), s.ix, s.iy, s.heading)));
    }

    /// Smallest valid OPEN entry, discarding stale ones.
    fn peek_open(&mut self) -> Option<(f64, BodyState)> {
        while let Some(Reverse((Key(k), _, ix, iy, heading))) = self.open.peek().copied() {
            let s = BodyState { ix, iy, heading };
            match self.nodes.get(&s) {
                Some(n) if n.open_key == Some(k) => return Some((k, s)),
                _ => {
                    self.open.pop();
                }
            }
        }
        None
    }

    fn edge_cost(&mut self, s: &BodyState, i: usize) -> f64 {
        if let Some(&c) = self.edge_costs.get(&(*s, i)) {
            return c;
        }
        let a = self.actions[s.heading as usize][i];
        let c = action_cost(s, &a, self.map, self.params);
        self.edge_costs.insert((*s, i), c);
        c
    }

    /// One weighted-A* pass reusing previous g-values. Returns the number of
    /// expansions and whether the budget ran out.
    fn improve_path(&mut self, eps: f64) -> (usize, bool) {
        let mut expansions = 0;
        while let Some((min_key, s)) = self.peek_open() {
            if self.goal_g <= min_key {
                break;
            }
            if expansions >= self.params.budget {
                return (expansions, true);
            }
            self.open.pop();
            let g = {
                let n = self.nodes.get_mut(&s).expect("open states have nodes");
                n.open_key = None;
                n.closed_in = self.iteration;
                n.g
            };
            expansions += 1;
            for i in 0..self.actions[s.heading as usize].len() {
                let a = self.actions[s.heading as usize][i];
                let next = s.apply(&a, &self.params.lattice);
                if let Some(bounds) = self.params.bounds {
                    if !bounds.contains(&next) {
                        continue;
                    }
                }
                let c = self.edge_cost(&s, i);
                if !c.is_finite() {
                    continue;
                }
                let ng = g + c;
                let node = self.nodes.entry(next).or_insert(Node {
                    g: f64::INFINITY,
                    parent: None,
                    open_key: None,
                    closed_in: 0,
                    in_incons: false,
                });
                if ng < node.g {
                    node.g = ng;
                    node.parent = Some((s, i));
                    let closed = node.closed_in == self.iteration;
                    if self.params.at_goal(&next, &self.goal) && ng < self.goal_g {
                        self.goal_g = ng;
                        self.goal_parent = Some(next);
                    }
                    if !closed {
                        self.push_open(next, ng, eps);
                    } else if !node.in_incons {
                        node.in_incons = true;
                        self.incons.push(next);
                    }
                }
            }
        }
        (expansions, false)
    }

    /// Move INCONS into OPEN and re-key everything for the new epsilon.
    fn rebuild_open(&mut self, eps: f64) {
        let mut states: Vec<BodyState> = self
            .nodes
            .iter()
            .filter(|(_, n)| n.open_key.is_some())
            .map(|(s, _)| *s)
            .collect();
        for s in std::mem::take(&mut self.incons) {
            if let Some(n) = self.nodes.get_mut(&s) {
                n.in_incons = false;
            }
            states.push(s);
        }
        states.sort();
        states.dedup();
        self.open.clear();
        for s in states {
            let g = self.nodes[&s].g;
            self.push_open(s, g, eps);
        }
    }

    fn extract_plan(&mut self, start: BodyState, eps: f64) -> ActionPlan {
        let mut chain = Vec::new();
        let mut cur = self.goal_parent.expect("goal reached");
        while cur != start {
            let (prev, i) = self.nodes[&cur].parent.expect("reached states have parents");
            chain.push((prev, i));
            cur = prev;
            assert!(chain.len() <= self.nodes.len(), "parent pointers form a cycle");
        }
        chain.reverse();
        let mut plan = ActionPlan::empty(start);
        plan.epsilon_achieved = eps;
        for (s, i) in chain {
            let a = self.actions[s.heading as usize][i];
            let c = self.edge_cost(&s, i);
            plan.actions.push(a);
            plan.states.push(s.apply(&a, &self.params.lattice));
            plan.action_costs.push(c);
            plan.total_cost += c;
        }
        plan
    }

    fn closest_state(&self) -> (BodyState, f64) {
        let goal = self.params.lattice.position(&self.goal);
        self.nodes
            .iter()
            .filter(|(_, n)| n.g.is_finite())
            .map(|(s, _)| (*s, (self.params.lattice.position(s) - goal).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("start is always reached")
    }
}

fn check_on_map(s: &BodyState, map: &CostMap, params: &PlannerParams) -> bool {
    let (x, y, th) = s.pose(&params.lattice);
    Leg::ALL
        .iter()
        .all(|&leg| map.geometry().cell_of(params.layout.nominal(leg, x, y, th)).is_some())
}

/// Anytime repairing A* from `start` to the goal region around `goal`.
///
/// Each epsilon iteration is a weighted A* pass with keys `g + eps * h` that
/// reuses the g-values of the previous pass; states whose g improved after they
/// were expanded wait in INCONS until the next pass. `on_plan` sees every plan
/// that strictly improves on the previous one.
pub fn ara_star(
    start: &BodyState,
    goal: &BodyState,
    map: &CostMap,
    params: &PlannerParams,
    schedule: EpsilonSchedule,
    mut on_plan: impl FnMut(&ActionPlan),
) -> Result<AraOutcome, BodyPlanError> {
    params.validate()?;
    if !(schedule.eps0 >= 1.0 && schedule.step > 0.0 && schedule.eps0.is_finite()) {
        return Err(BodyPlanError::Params(format!(
            "epsilon schedule needs eps0 >= 1 and step > 0, got {schedule:?}"
        )));
    }
    if !check_on_map(goal, map, params) {
        return Err(BodyPlanError::GoalOffMap(*goal));
    }
    if !check_on_map(start, map, params) {
        return Err(BodyPlanError::StartOffMap(*start));
    }
    if params.at_goal(start, goal) {
        let plan = ActionPlan::empty(*start);
        on_plan(&plan);
        return Ok(AraOutcome {
            plans: vec![plan],
            iterations: vec![IterationStats {
                epsilon: 1.0,
                expansions: 0,
                cost: 0.0,
            }],
            budget_exhausted: false,
        });
    }

    let mut search = Search {
        map,
        params,
        goal: *goal,
        bound: HeuristicBound::new(start, goal, map, params),
        actions: (0..params.lattice.headings).map(|h| params.actions_at(h)).collect(),
        nodes: HashMap::new(),
        edge_costs: HashMap::new(),
        open: BinaryHeap::new(),
        incons: Vec::new(),
        goal_g: f64::INFINITY,
        goal_parent: None,
        iteration: 1,
    };
    search.nodes.insert(
        *start,
        Node {
            g: 0.0,
            parent: None,
            open_key: None,
            closed_in: 0,
            in_incons: false,
        },
    );
    let mut eps = schedule.eps0;
    search.push_open(*start, 0.0, eps);

    let mut outcome = AraOutcome {
        plans: Vec::new(),
        iterations: Vec::new(),
        budget_exhausted: false,
    };
    loop {
        let (expansions, exhausted) = search.improve_path(eps);
        outcome.iterations.push(IterationStats {
            epsilon: eps,
            expansions,
            cost: search.goal_g,
        });
        if exhausted && outcome.plans.is_empty() || !search.goal_g.is_finite() {
            let (closest, distance) = search.closest_state();
            return Err(BodyPlanError::NoPlan {
                expansions: outcome.expansions(),
                closest,
                distance,
            });
        }
        if exhausted {
            outcome.budget_exhausted = true;
            break;
        }
        let plan = search.extract_plan(*start, eps);
        match outcome.plans.last_mut() {
            Some(last) if plan.total_cost >= last.total_cost => {
                last.epsilon_achieved = last.epsilon_achieved.min(eps);
            }
            _ => {
                on_plan(&plan);
                outcome.plans.push(plan);
            }
        }
        if eps <= 1.0 {
            break;
        }
        eps = (eps - schedule.step).max(1.0);
        search.iteration += 1;
        search.rebuild_open(eps);
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplanOutcome {
    /// The change does not touch the rest of the plan.
    Unchanged(ActionPlan),
    Replanned(AraOutcome),
}

impl ReplanOutcome {
    pub fn plan(&self) -> &ActionPlan {
        match self {
            ReplanOutcome::Unchanged(p) => p,
            ReplanOutcome::Replanned(o) => o.best(),
        }
    }
}

/// React to a map change. If no remaining foothold area or swing corridor of
/// `prev` (from `current` on) comes near `changed`, `prev` is kept; otherwise a
/// fresh search runs from `current`.
#[allow(clippy::too_many_arguments)]
pub fn replan(
    prev: &ActionPlan,
    changed: &CellRect,
    current: &BodyState,
    goal: &BodyState,
    map: &CostMap,
    params: &PlannerParams,
    schedule: EpsilonSchedule,
    on_plan: impl FnMut(&ActionPlan),
) -> Result<ReplanOutcome, BodyPlanError> {
    if let Some(k) = prev.states.iter().position(|s| s == current) {
        if !plan_touches(prev, k, changed, map, params) {
            return Ok(ReplanOutcome::Unchanged(prev.clone()));
        }
    }
    ara_star(current, goal, map, params, schedule, on_plan).map(ReplanOutcome::Replanned)
}

fn plan_touches(
    plan: &ActionPlan,
    from: usize,
    changed: &CellRect,
    map: &CostMap,
    params: &PlannerParams,
) -> bool {
    let geometry = map.geometry();
    let (lo, hi) = geometry.world_bounds(changed);
    // Costs change up to the feature influence radius around the patch.
    let margin = params.disc_radius + map.params().influence_radius() as f64 * geometry.resolution_xy;
    let lattice = &params.lattice;
    let step = 0.25 * geometry.resolution_xy;
    plan.states[from..].windows(2).any(|w| {
        let (x0, y0, t0) = w[0].pose(lattice);
        let (x1, y1, t1) = w[1].pose(lattice);
        Leg::ALL.iter().any(|&leg| {
            let a = params.layout.nominal(leg, x0, y0, t0);
            let b = params.layout.nominal(leg, x1, y1, t1);
            let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
            (0..=n).any(|i| box_distance(a + (b - a) * (i as f64 / n as f64), lo, hi) <= margin)
        })
    })
}

fn box_distance(p: Vector2<f64>, lo: Vector2<f64>, hi: Vector2<f64>) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx.hypot(dy)
}
