//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use quadwalk::body_planner::{action_cost, BodyState, LatticeBounds, PlannerParams};
use quadwalk::footstep_planner::{BodyTrack, Foothold, FootholdPlan};
use quadwalk::legs::{Leg, StanceLayout};
use quadwalk::terrain::{CostMap, CostParams, GridGeometry, HeightGrid};
use quadwalk::traj_opt::CoGTrajectory;
use quadwalk_qp::QProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- QP

/// Random strictly convex, feasible problem with `n <= 8`, `m <= 10`, `p <= 3`.
pub fn random_qp(rng: &mut ChaCha8Rng) -> QProblem {
    let n = rng.random_range(1..=8);
    let p = rng.random_range(0..=3.min(n - 1));
    let m = rng.random_range(0..=10);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let g = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
    let g0 = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let x_feasible = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let ce = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let ce0 = -ce.tr_mul(&x_feasible);
    let ci = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let margin = DVector::from_fn(m, |_, _| rng.random_range(0.0..0.5));
    let ci0 = -ci.tr_mul(&x_feasible) + margin;
    QProblem::new(g, g0, ce, ce0, ci, ci0).unwrap()
}

/// Optimum by trying every candidate active set and keeping the best KKT
/// point that is primal and dual feasible.
pub fn qp_by_enumeration(qp: &QProblem) -> (DVector<f64>, f64) {
    let (n, p, m) = (qp.n(), qp.p(), qp.m());
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = p + subset.len();
        if k > n {
            continue;
        }
        let mut c = DMatrix::zeros(n, k);
        let mut c0 = DVector::zeros(k);
        for j in 0..p {
            c.set_column(j, &qp.ce.column(j));
            c0[j] = qp.ce0[j];
        }
        for (j, &i) in subset.iter().enumerate() {
            c.set_column(p + j, &qp.ci.column(i));
            c0[p + j] = qp.ci0[i];
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.g);
        kkt.view_mut((0, n), (n, k)).copy_from(&(-&c));
        kkt.view_mut((n, 0), (k, n)).copy_from(&c.transpose());
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&qp.g0));
        rhs.rows_mut(n, k).copy_from(&(-&c0));
        let sv = kkt.clone().svd(false, false).singular_values;
        if sv.min() < 1e-10 * sv.max() {
            continue;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let dual_ok = (p..k).all(|j| sol[n + j] >= -1e-10);
        let primal_ok = qp.inequality_slack(&x).iter().all(|&s| s >= -1e-10);
        if dual_ok && primal_ok {
            let f = qp.objective(&x);
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
    }
    best.expect("feasible strictly convex problem has a KKT point")
}

// ---------------------------------------------------------------- planning

/// Random blocky terrain on a 50 x 50 map whose lower-left cell sits at
/// (-0.8, -0.8), so a 10 x 10 lattice at the origin keeps all feet on the map.
pub fn random_block_map(rng: &mut ChaCha8Rng) -> CostMap {
    let geometry = GridGeometry::new(50, 50, Vector2::new(-0.8, -0.8));
    let mut table = DMatrix::zeros(50, 50);
    for _ in 0..rng.random_range(3..8) {
        let (x0, y0) = (rng.random_range(0..45), rng.random_range(0..45));
        let (w, h) = (rng.random_range(2..12), rng.random_range(2..12));
        let z = rng.random_range(0.04..0.24);
        for iy in y0..(y0 + h).min(50) {
            for ix in x0..(x0 + w).min(50) {
                table[(iy, ix)] = z;
            }
        }
    }
    let mut grid = HeightGrid::ingest(geometry, &table).unwrap();
    CostMap::compute(&mut grid, CostParams::default()).unwrap()
}

/// Planner settings for a `10 x 10 x 8` lattice at the origin.
pub fn small_lattice_params() -> PlannerParams {
    let mut params = PlannerParams::default();
    params.lattice.headings = 8;
    params.budget = 1_000_000;
    params.bounds = Some(LatticeBounds { ix: (0, 9), iy: (0, 9) });
    params
}

/// Cheapest cost from `start` to the goal region by uniform-cost search over
/// the same action graph.
pub fn dijkstra_cost(start: &BodyState, goal: &BodyState, map: &CostMap, params: &PlannerParams) -> Option<f64> {
    let actions: Vec<_> = (0..params.lattice.headings).map(|h| params.actions_at(h)).collect();
    let mut dist: HashMap<BodyState, f64> = HashMap::from([(*start, 0.0)]);
    let mut heap = BinaryHeap::from([Reverse((Ord64(0.0), *start))]);
    while let Some(Reverse((Ord64(g), s))) = heap.pop() {
        if g > dist[&s] {
            continue;
        }
        if params.at_goal(&s, goal) {
            return Some(g);
        }
        for a in &actions[s.heading as usize] {
            let next = s.apply(a, &params.lattice);
            if params.bounds.is_some_and(|b| !b.contains(&next)) {
                continue;
            }
            let c = action_cost(&s, a, map, params);
            if !c.is_finite() {
                continue;
            }
            let ng = g + c;
            if dist.get(&next).is_none_or(|&d| ng < d) {
                dist.insert(next, ng);
                heap.push(Reverse((Ord64(ng), next)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Ord64(f64);

impl PartialEq for Ord64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Ord64 {}

impl PartialOrd for Ord64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ord64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

// ---------------------------------------------------------------- geometry

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Triangle shrunk by `d`: the homothety about the incenter with ratio
/// `(r - d) / r`. `None` when `d` reaches the inradius.
pub fn shrunk_triangle(mut t: [Vector2<f64>; 3], d: f64) -> Option<[Vector2<f64>; 3]> {
    if cross(t[1] - t[0], t[2] - t[0]) < 0.0 {
        t.swap(1, 2);
    }
    let (a, b, c) = ((t[1] - t[2]).norm(), (t[2] - t[0]).norm(), (t[0] - t[1]).norm());
    let perimeter = a + b + c;
    let incenter = (t[0] * a + t[1] * b + t[2] * c) / perimeter;
    let r = cross(t[1] - t[0], t[2] - t[0]) / perimeter;
    if d >= r {
        return None;
    }
    let k = (r - d) / r;
    Some(t.map(|v| incenter + (v - incenter) * k))
}

/// Separating-axis test; touching triangles are not disjoint.
pub fn triangles_disjoint(p: &[Vector2<f64>; 3], q: &[Vector2<f64>; 3]) -> bool {
    let axes = (0..3)
        .map(|i| p[(i + 1) % 3] - p[i])
        .chain((0..3).map(|i| q[(i + 1) % 3] - q[i]))
        .map(|e| Vector2::new(-e.y, e.x));
    for n in axes {
        let span = |t: &[Vector2<f64>; 3]| {
            let d = t.map(|v| v.dot(&n));
            (d.iter().copied().fold(f64::INFINITY, f64::min), d.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        };
        let ((p0, p1), (q0, q1)) = (span(p), span(q));
        if p1 < q0 || q1 < p0 {
            return true;
        }
    }
    false
}

/// Smallest signed distance from `p` to the edges of the counter-clockwise
/// convex polygon `poly`, positive inside.
pub fn polygon_slack(poly: &[Vector2<f64>], p: Vector2<f64>) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            cross(b - a, p - a) / (b - a).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random walking sequence: jittered nominal stance, then `steps` swings of
/// randomly chosen legs (never the same leg twice in a row), each moving
/// forward by up to 0.2 m.
pub fn random_foothold_plan(rng: &mut ChaCha8Rng, steps: usize) -> FootholdPlan {
    let layout = StanceLayout::default();
    let mut stance = layout.nominal_all(0.0, 0.0, 0.0).map(|p| {
        Vector3::new(p.x + rng.random_range(-0.05..0.05), p.y + rng.random_range(-0.05..0.05), 0.0)
    });
    let initial_stance = stance;
    let mut previous: Option<Leg> = None;
    let mut out = Vec::with_capacity(steps);
    for i in 0..steps {
        let leg = loop {
            let l = Leg::from_index(rng.random_range(0..4));
            if Some(l) != previous {
                break l;
            }
        };
        let mut p = stance[leg.index()];
        p.x += rng.random_range(0.0..0.2);
        p.y += rng.random_range(-0.05..0.05);
        stance[leg.index()] = p;
        out.push(Foothold {
            leg,
            position: p,
            step_index: i,
            action_index: 0,
        });
        previous = Some(leg);
    }
    FootholdPlan {
        initial_stance,
        steps: out,
        horizon: steps,
        track: BodyTrack {
            poses: vec![(0.0, 0.0, 0.0)],
            kinds: Vec::new(),
        },
    }
}

/// Support triangle while step `k` swings.
pub fn support_triangle(plan: &FootholdPlan, k: usize) -> [Vector2<f64>; 3] {
    let stance = plan.stance_after(k);
    let swing = plan.steps[k].leg;
    let v: Vec<Vector2<f64>> = Leg::ALL.iter().filter(|&&l| l != swing).map(|&l| stance[l.index()].xy()).collect();
    [v[0], v[1], v[2]]
}

/// Whether a four-leg phase must separate steps `k` and `k + 1`.
pub fn quad_phase_expected(plan: &FootholdPlan, k: usize, d: f64) -> Option<bool> {
    let (a, b) = (plan.steps[k].leg, plan.steps[k + 1].leg);
    let ta = shrunk_triangle(support_triangle(plan, k), d)?;
    let tb = shrunk_triangle(support_triangle(plan, k + 1), d)?;
    Some(a.diagonal() == b && triangles_disjoint(&ta, &tb))
}

// ---------------------------------------------------------------- dynamics

/// `|b - P b|` with `P` the orthogonal projector onto the column space of
/// `a`, built from the eigenvectors of `a a^T`.
pub fn projection_residual(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let eig = (a * a.transpose()).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut projected = DVector::zeros(b.len());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 * top {
            let u = eig.eigenvectors.column(i);
            projected += u * u.dot(b);
        }
    }
    (b - projected).norm()
}

// ---------------------------------------------------------------- trajectories

fn horner(c: &[f64], t: f64, order: usize) -> f64 {
    // Coefficients run from t^5 down to t^0.
    (0..6)
        .filter(|&i| 5 - i >= order)
        .map(|i| {
            let p = 5 - i;
            let falling: f64 = (0..order).map(|k| (p - k) as f64).product();
            c[i] * falling * t.powi((p - order) as i32)
        })
        .sum()
}

/// Largest position, velocity or acceleration jump between consecutive
/// segments, computed from the raw coefficients.
pub fn junction_jump(traj: &CoGTrajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for w in traj.segments.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for order in 0..3 {
            for (ca, cb) in [(&a.x, &b.x), (&a.y, &b.y)] {
                worst = worst.max((horner(ca, a.duration, order) - horner(cb, 0.0, order)).abs());
            }
        }
    }
    worst
}

/// ZMP of the cart-table model from the spline and height profile.
pub fn zmp_from_spline(traj: &CoGTrajectory, phase: usize, tau: f64) -> Vector2<f64> {
    let s = &traj.segments[phase];
    let zdd = traj.z.accel_in_phase(phase, tau);
    s.position(tau) - s.acceleration(tau) * (traj.z.height_above_support / (zdd + quadwalk::GRAVITY))
}

/// Smallest ZMP slack over every constraint sample of every exported chunk.
pub fn exported_min_slack(artifacts: &quadwalk::sim::Artifacts, dt: f64) -> f64 {
    let polygons = parse_polygons(&artifacts.polygons_csv);
    let mut min = f64::INFINITY;
    for (chunk, text) in artifacts.trajectories.iter().enumerate() {
        let traj = CoGTrajectory::from_text(text).expect("exported trajectory parses");
        for (phase, seg) in traj.segments.iter().enumerate() {
            for tau in quadwalk::traj_opt::sample_times(seg.duration, dt) {
                min = min.min(polygon_slack(&polygons[chunk][phase], zmp_from_spline(&traj, phase, tau)));
            }
        }
    }
    min
}

/// Parse the `chunk,phase,kind,vertex,x,y` polygon table into per-chunk,
/// per-phase vertex lists.
pub fn parse_polygons(csv: &str) -> Vec<Vec<Vec<Vector2<f64>>>> {
    let mut out: Vec<Vec<Vec<Vector2<f64>>>> = Vec::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (chunk, phase): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let v = Vector2::new(f[4].parse().unwrap(), f[5].parse().unwrap());
        if out.len() <= chunk {
            out.resize(chunk + 1, Vec::new());
        }
        if out[chunk].len() <= phase {
            out[chunk].resize(phase + 1, Vec::new());
        }
        out[chunk][phase].push(v);
    }
    out
}
