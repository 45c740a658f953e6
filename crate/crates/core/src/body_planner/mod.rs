//! Body action planning on an (x, y, heading) lattice with anytime repairing A*.

mod cost;
mod search;

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Vector2;
use thiserror::Error;

use crate::legs::StanceLayout;

pub use cost::{action_cost, action_cost_terms, heuristic, ActionCostTerms, HeuristicBound};
pub use search::{ara_star, replan, AraOutcome, EpsilonSchedule, IterationStats, ReplanOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BodyPlanError {
    #[error("invalid planner parameters: {0}")]
    Params(String),
    #[error("start state {0} is off the map")]
    StartOffMap(BodyState),
    #[error("goal state {0} is off the map")]
    GoalOffMap(BodyState),
    #[error("no plan within {expansions} expansions; closest state {closest} is {distance:.3} m from the goal")]
    NoPlan {
        expansions: usize,
        closest: BodyState,
        distance: f64,
    },
    #[error("plan parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Motion primitive labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Forward,
    DiagonalLeft,
    DiagonalRight,
    Left,
    Right,
    Back,
    TurnLeft,
    TurnRight,
}

impl ActionKind {
    pub const ALL: [ActionKind; 8] = [
        ActionKind::Forward,
        ActionKind::DiagonalLeft,
        ActionKind::DiagonalRight,
        ActionKind::Left,
        ActionKind::Right,
        ActionKind::Back,
        ActionKind::TurnLeft,
        ActionKind::TurnRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Forward => "forward",
            ActionKind::DiagonalLeft => "diagonal-forward-left",
            ActionKind::DiagonalRight => "diagonal-forward-right",
            ActionKind::Left => "left",
            ActionKind::Right => "right",
            ActionKind::Back => "back",
            ActionKind::TurnLeft => "turn-left",
            ActionKind::TurnRight => "turn-right",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown action kind `{s}`"))
    }
}

/// Lattice discretization of body poses. Headings are `2 pi / headings` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub resolution_xy: f64,
    pub headings: u32,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            resolution_xy: 0.04,
            headings: 32,
        }
    }
}

impl Lattice {
    pub fn heading_step(&self) -> f64 {
        2.0 * PI / self.headings as f64
    }

    /// Heading angle normalized to `[-pi, pi)`.
    pub fn theta(&self, heading: u32) -> f64 {
        let t = heading as f64 * self.heading_step();
        if t >= PI {
            t - 2.0 * PI
        } else {
            t
        }
    }

    pub fn snap(&self, x: f64, y: f64, theta: f64) -> BodyState {
        let h = self.headings as i64;
        let k = (theta / self.heading_step()).round() as i64;
        BodyState {
            ix: (x / self.resolution_xy).round() as i64,
            iy: (y / self.resolution_xy).round() as i64,
            heading: k.rem_euclid(h) as u32,
        }
    }

    pub fn position(&self, s: &BodyState) -> Vector2<f64> {
        Vector2::new(s.ix as f64, s.iy as f64) * self.resolution_xy
    }

    /// Signed heading difference `b - a` in steps, in `(-headings/2, headings/2]`.
    pub fn heading_delta(&self, a: u32, b: u32) -> i64 {
        let h = self.headings as i64;
        let d = (b as i64 - a as i64).rem_euclid(h);
        if d > h / 2 {
            d - h
        } else {
            d
        }
    }
}

/// Body pose on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BodyState {
    pub ix: i64,
    pub iy: i64,
    pub heading: u32,
}

impl fmt::Display for BodyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.ix, self.iy, self.heading)
    }
}

impl BodyState {
    pub fn apply(&self, a: &Action, lattice: &Lattice) -> BodyState {
        BodyState {
            ix: self.ix + a.cells.0,
            iy: self.iy + a.cells.1,
            heading: (self.heading as i64 + a.turn).rem_euclid(lattice.headings as i64) as u32,
        }
    }

    /// World pose `(x, y, theta)`.
    pub fn pose(&self, lattice: &Lattice) -> (f64, f64, f64) {
        let p = lattice.position(self);
        (p.x, p.y, lattice.theta(self.heading))
    }
}

/// A motion primitive instantiated at one heading. Displacements are in the
/// world frame and are exact lattice multiples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub cells: (i64, i64),
    pub turn: i64,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

/// Body-frame primitive: displacement in cells and heading change in steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub kind: ActionKind,
    pub forward: f64,
    pub lateral: f64,
    pub turn: i64,
}

pub fn default_primitives() -> Vec<Primitive> {
    let p = |kind, forward, lateral, turn| Primitive {
        kind,
        forward,
        lateral,
        turn,
    };
    vec![
        p(ActionKind::Forward, 3.0, 0.0, 0),
        p(ActionKind::DiagonalLeft, 2.0, 2.0, 0),
        p(ActionKind::DiagonalRight, 2.0, -2.0, 0),
        p(ActionKind::Left, 0.0, 2.0, 0),
        p(ActionKind::Right, 0.0, -2.0, 0),
        p(ActionKind::Back, -2.0, 0.0, 0),
        p(ActionKind::TurnLeft, 0.0, 0.0, 1),
        p(ActionKind::TurnRight, 0.0, 0.0, -1),
    ]
}

/// Inclusive lattice index bounds for the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBounds {
    pub ix: (i64, i64),
    pub iy: (i64, i64),
}

impl LatticeBounds {
    pub fn contains(&self, s: &BodyState) -> bool {
        s.ix >= self.ix.0 && s.ix <= self.ix.1 && s.iy >= self.iy.0 && s.iy <= self.iy.1
    }
}

/// Weights of (terrain, action difficulty, swing collision, orientation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionWeights {
    pub terrain: f64,
    pub action: f64,
    pub collision: f64,
    pub orientation: f64,
}

impl Default for ActionWeights {
    fn default() -> Self {
        Self {
            terrain: 1.0,
            action: 0.3,
            collision: 1.0,
            orientation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    pub lattice: Lattice,
    pub primitives: Vec<Primitive>,
    /// Difficulty penalty per kind, indexed by [`ActionKind::index`].
    pub kind_costs: [f64; 8],
    pub weights: ActionWeights,
    /// Number of lowest terrain costs averaged per leg.
    pub best_n: usize,
    pub disc_radius: f64,
    pub swing_clearance: f64,
    pub layout: StanceLayout,
    /// Node expansions allowed per epsilon iteration.
    pub budget: usize,
    pub bounds: Option<LatticeBounds>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            lattice: Lattice::default(),
            primitives: default_primitives(),
            // forward, diagonals, left, right, back, turns
            kind_costs: [1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 1.5, 1.5],
            weights: ActionWeights::default(),
            best_n: 3,
            disc_radius: 0.10,
            swing_clearance: 0.12,
            layout: StanceLayout::default(),
            budget: 50_000,
            bounds: None,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), BodyPlanError> {
        let bad = |m: &str| Err(BodyPlanError::Params(m.to_string()));
        if !(self.lattice.resolution_xy > 0.0) || self.lattice.headings < 4 {
            return bad("lattice needs positive resolution and at least 4 headings");
        }
        if self.primitives.is_empty() {
            return bad("empty primitive set");
        }
        if self.kind_costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return bad("action difficulty costs must be finite and non-negative");
        }
        let w = self.weights;
        if [w.terrain, w.action, w.collision, w.orientation]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("action cost weights must be finite and non-negative");
        }
        if self.best_n == 0 || !(self.disc_radius > 0.0) || !(self.swing_clearance >= 0.0) {
            return bad("best_n, disc radius and swing clearance must be positive");
        }
        if self.budget == 0 {
            return bad("expansion budget must be positive");
        }
        Ok(())
    }

    /// Primitive `prim` rotated to `heading` and rounded onto the lattice.
    pub fn instantiate(&self, prim: &Primitive, heading: u32) -> Action {
        let th = self.lattice.theta(heading);
        let (s, c) = th.sin_cos();
        let cx = (c * prim.forward - s * prim.lateral).round() as i64;
        let cy = (s * prim.forward + c * prim.lateral).round() as i64;
        let res = self.lattice.resolution_xy;
        Action {
            kind: prim.kind,
            cells: (cx, cy),
            turn: prim.turn,
            dx: cx as f64 * res,
            dy: cy as f64 * res,
            dtheta: prim.turn as f64 * self.lattice.heading_step(),
        }
    }

    pub fn actions_at(&self, heading: u32) -> Vec<Action> {
        self.primitives.iter().map(|p| self.instantiate(p, heading)).collect()
    }

    /// Largest translation of any primitive at any heading (m).
    pub fn max_step(&self) -> f64 {
        (0..self.lattice.headings)
            .flat_map(|h| self.actions_at(h))
            .map(|a| a.dx.hypot(a.dy))
            .fold(0.0, f64::max)
    }

    pub fn kind_cost(&self, kind: ActionKind) -> f64 {
        self.kind_costs[kind.index()]
    }

    /// Goal region: within one cell in position and one step in heading.
    pub fn at_goal(&self, s: &BodyState, goal: &BodyState) -> bool {
        let (dx, dy) = (s.ix - goal.ix, s.iy - goal.iy);
        dx * dx + dy * dy <= 1 && self.lattice.heading_delta(s.heading, goal.heading).abs() <= 1
    }
}

/// Result of a search: actions with the states they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPlan {
    pub actions: Vec<Action>,
    /// `states[0]` is the start; `states[i + 1] = states[i] + actions[i]`.
    pub states: Vec<BodyState>,
    pub action_costs: Vec<f64>,
    pub total_cost: f64,
    /// Suboptimality bound under which the cost was proven.
    pub epsilon_achieved: f64,
}

impl ActionPlan {
    pub fn empty(start: BodyState) -> Self {
        Self {
            actions: Vec::new(),
            states: vec![start],
            action_costs: Vec::new(),
            total_cost: 0.0,
            epsilon_achieved: 1.0,
        }
    }

    pub fn start(&self) -> BodyState {
        self.states[0]
    }

    pub fn end(&self) -> BodyState {
        *self.states.last().expect("plan has a start state")
    }

    /// Text records: a `start` line, then one `action <kind> <dx> <dy> <dtheta> <cost>` per action.
    pub fn to_text(&self, lattice: &Lattice) -> String {
        let (x, y, th) = self.start().pose(lattice);
        let mut out = format!("start {x} {y} {th}\n");
        let _ = writeln!(out, "epsilon {}", self.epsilon_achieved);
        for (a, c) in self.actions.iter().zip(&self.action_costs) {
            let _ = writeln!(out, "action {} {} {} {} {}", a.kind, a.dx, a.dy, a.dtheta, c);
        }
        out
    }

    pub fn from_text(text: &str, params: &PlannerParams) -> Result<Self, BodyPlanError> {
        let lattice = &params.lattice;
        let mut plan: Option<ActionPlan> = None;
        for (i, line) in text.lines().enumerate() {
            let perr = |msg: String| BodyPlanError::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() || f[0].starts_with('#') {
                continue;
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("`{s}`: {e}")));
            match (f[0], f.len()) {
                ("start", 4) => {
                    let s = lattice.snap(num(f[1])?, num(f[2])?, num(f[3])?);
                    plan = Some(ActionPlan::empty(s));
                }
                ("epsilon", 2) => {
                    let p = plan.as_mut().ok_or_else(|| perr("epsilon before start".into()))?;
                    p.epsilon_achieved = num(f[1])?;
                }
                ("action", 6) => {
                    let p = plan.as_mut().ok_or_else(|| perr("action before start".into()))?;
                    let kind: ActionKind = f[1].parse().map_err(perr)?;
                    let (dx, dy, dth, cost) = (num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?);
                    let res = lattice.resolution_xy;
                    let cells = ((dx / res).round() as i64, (dy / res).round() as i64);
                    let turn = (dth / lattice.heading_step()).round() as i64;
                    let a = Action {
                        kind,
                        cells,
                        turn,
                        dx: cells.0 as f64 * res,
                        dy: cells.1 as f64 * res,
                        dtheta: turn as f64 * lattice.heading_step(),
                    };
                    let next = p.end().apply(&a, lattice);
                    p.actions.push(a);
                    p.states.push(next);
                    p.action_costs.push(cost);
                    p.total_cost += cost;
                }
                _ => return Err(perr(format!("unrecognized record `{line}`"))),
            }
        }
        plan.ok_or(BodyPlanError::Parse {
            line: 0,
            msg: "missing start record".into(),
        })
    }
}
