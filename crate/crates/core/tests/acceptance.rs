//! End-to-end acceptance checks. Each criterion runs against an independent
//! oracle and prints one PASS or FAIL line; the process exits non-zero if any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DVector, Rotation3, Unit, Vector2, Vector3, Vector6};
use quadwalk::body_planner::{ara_star, BodyState, EpsilonSchedule};
use quadwalk::legs::Leg;
use quadwalk::sim::{
    builtin_geometry, compare_modes, replay_event, run_pipeline, world_rect, BuiltinTerrain, PipelineConfig, RunOutput,
    Scenario, TerrainEvent,
};
use quadwalk::traj_opt::{build_phases, optimize, sample_times, CoGTrajectory, TrajParams};
use quadwalk::wbc_dynamics::{
    contact_jacobian, foot_positions, inverse_kinematics, mass_matrix, rnea, rotation_exp, rotation_vector,
    whole_body_torques, FloatingBase, JointVector, RobotModel,
};
use quadwalk::GRAVITY;
use quadwalk_qp::solve;
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;

/// Name, optional time limit in seconds, and the check itself.
type Criterion<'a> = (&'static str, Option<f64>, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    };
}

fn qp_matches_enumeration() -> Outcome {
    let mut rng = rng(0xACCE);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..200 {
        let qp = random_qp(&mut rng);
        let sol = solve(&qp, 1e-9).map_err(|e| format!("case {case}: {e}"))?;
        let (x_ref, f_ref) = qp_by_enumeration(&qp);
        let dx = (&sol.x - &x_ref).amax();
        let df = (sol.objective - f_ref).abs();
        let kkt = sol.kkt_residuals(&qp);
        let k = kkt.stationarity.max(kkt.equality).max(kkt.inequality).max(kkt.dual);
        ensure!(dx <= 1e-7, "case {case}: |x - x_ref| = {dx:e}");
        ensure!(df <= 1e-9, "case {case}: objective off by {df:e}");
        ensure!(k <= 1e-9, "case {case}: KKT residuals {kkt:?}");
        worst = (worst.0.max(dx), worst.1.max(df), worst.2.max(k));
    }
    Ok(format!("max dx {:.1e}, df {:.1e}, kkt {:.1e}", worst.0, worst.1, worst.2))
}

fn ara_star_is_anytime_optimal() -> Outcome {
    let mut rng = rng(0xA5A5);
    let params = small_lattice_params();
    let mut solved = 0;
    let mut attempts = 0;
    while solved < 20 {
        attempts += 1;
        ensure!(attempts < 200, "too few solvable lattices");
        let map = random_block_map(&mut rng);
        let start = BodyState {
            ix: rng.random_range(0..10),
            iy: rng.random_range(0..10),
            heading: rng.random_range(0..8),
        };
        let goal = BodyState {
            ix: rng.random_range(0..10),
            iy: rng.random_range(0..10),
            heading: rng.random_range(0..8),
        };
        let Some(optimal) = dijkstra_cost(&start, &goal, &map, &params) else {
            ensure!(
                ara_star(&start, &goal, &map, &params, EpsilonSchedule::default(), |_| {}).is_err(),
                "planner found a path the oracle says does not exist"
            );
            continue;
        };
        let out = ara_star(&start, &goal, &map, &params, EpsilonSchedule::default(), |_| {})
            .map_err(|e| format!("lattice {solved}: {e}"))?;
        ensure!(!out.budget_exhausted, "lattice {solved}: budget exhausted");
        let last = out.iterations.last().unwrap();
        ensure!(last.epsilon == 1.0, "lattice {solved}: final epsilon {}", last.epsilon);
        ensure!(
            out.best().total_cost == optimal,
            "lattice {solved}: final cost {} vs optimal {optimal}",
            out.best().total_cost
        );
        for w in out.plans.windows(2) {
            ensure!(w[1].total_cost < w[0].total_cost, "lattice {solved}: costs not strictly decreasing");
        }
        for it in &out.iterations {
            ensure!(
                it.cost <= it.epsilon * optimal * (1.0 + 1e-12),
                "lattice {solved}: cost {} exceeds {} x {optimal}",
                it.cost,
                it.epsilon
            );
        }
        for p in &out.plans {
            ensure!(p.total_cost <= p.epsilon_achieved * optimal * (1.0 + 1e-12), "lattice {solved}: plan bound");
        }
        solved += 1;
    }
    Ok(format!("20 lattices, {} skipped as unreachable", attempts - solved))
}

fn trajectories_are_smooth_and_stable(runs: &[(BuiltinTerrain, RunOutput, Duration)]) -> Outcome {
    let config = PipelineConfig::default();
    ensure!(config.trajectory.margin == 0.06, "margin is {}", config.trajectory.margin);
    let mut lines = Vec::new();
    for (kind, run, took) in runs {
        ensure!(run.error.is_none(), "{kind}: {:?}", run.error);
        ensure!(took.as_secs_f64() < 30.0, "{kind}: took {took:?}");
        let polygons = parse_polygons(&run.artifacts.polygons_csv);
        ensure!(polygons.len() == run.artifacts.trajectories.len(), "{kind}: polygon chunks");
        let (mut jump, mut slack, mut samples) = (0.0f64, f64::INFINITY, 0usize);
        for (chunk, text) in run.artifacts.trajectories.iter().enumerate() {
            let traj = CoGTrajectory::from_text(text).map_err(|e| format!("{kind}: {e}"))?;
            jump = jump.max(junction_jump(&traj));
            ensure!(polygons[chunk].len() == traj.segments.len(), "{kind}: polygon phases");
            for (phase, seg) in traj.segments.iter().enumerate() {
                for tau in sample_times(seg.duration, config.trajectory.dt) {
                    let zmp = zmp_from_spline(&traj, phase, tau);
                    slack = slack.min(polygon_slack(&polygons[chunk][phase], zmp));
                    samples += 1;
                }
            }
        }
        ensure!(jump < 1e-9, "{kind}: junction jump {jump:e}");
        ensure!(slack >= -1e-8, "{kind}: ZMP slack {slack:e}");
        lines.push(format!("{kind} {:.1}s slack {slack:.1e} jump {jump:.0e} ({samples} samples)", took.as_secs_f64()));
    }
    Ok(lines.join("; "))
}

fn quad_phases_follow_geometry() -> Outcome {
    let mut rng = rng(0x0AD);
    let (mut checked, mut inserted, mut skipped) = (0, 0, 0);
    for case in 0..100 {
        let steps = rng.random_range(4..10);
        let plan = random_foothold_plan(&mut rng, steps);
        let d = rng.random_range(0.0..0.1);
        let timing = quadwalk::traj_opt::PhaseTiming {
            margin: d,
            swing_duration: 0.6,
            quad_duration: 0.3,
            body_height: 0.55,
        };
        let expected: Option<Vec<bool>> =
            (0..plan.steps.len() - 1).map(|k| quad_phase_expected(&plan, k, d)).collect();
        let Some(expected) = expected else {
            ensure!(build_phases(&plan, &timing).is_err(), "case {case}: empty triangle accepted");
            skipped += 1;
            continue;
        };
        let phases = build_phases(&plan, &timing).map_err(|e| format!("case {case}: {e}"))?;
        let mut actual = vec![false; expected.len()];
        let p = &phases.phases;
        for i in 1..p.len() - 1 {
            if p[i].inserted {
                let k = p[i - 1].step_index.ok_or("quad not preceded by a step")?;
                ensure!(p[i + 1].step_index == Some(k + 1), "case {case}: quad not between consecutive steps");
                actual[k] = true;
            }
        }
        ensure!(actual == expected, "case {case} (d = {d}): got {actual:?}, expected {expected:?}");
        checked += expected.len();
        inserted += expected.iter().filter(|&&b| b).count();
    }
    Ok(format!("{checked} transitions, {inserted} quads, {skipped} sequences with empty triangles"))
}

fn random_state(rng: &mut rand_chacha::ChaCha8Rng) -> (FloatingBase, JointVector, JointVector, Vector6<f64>, JointVector) {
    let axis = Unit::new_normalize(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
    let mut base = FloatingBase::at(Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.55));
    base.rotation = Rotation3::from_axis_angle(&axis, rng.random_range(-0.3..0.3));
    base.velocity = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
    base.angular_velocity = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
    let mut q = JointVector::zeros();
    for leg in 0..4 {
        let front = leg < 2;
        q[3 * leg] = rng.random_range(-0.3..0.3);
        q[3 * leg + 1] = rng.random_range(-0.6..0.6);
        q[3 * leg + 2] = if front { -1.0 } else { 1.0 } * rng.random_range(0.4..1.6);
    }
    let qd = JointVector::from_fn(|_, _| rng.random_range(-2.0..2.0));
    let acc = Vector6::from_fn(|_, _| rng.random_range(-2.0..2.0));
    let qdd = JointVector::from_fn(|_, _| rng.random_range(-5.0..5.0));
    (base, q, qd, acc, qdd)
}

fn inverse_dynamics_residuals() -> Outcome {
    let model = RobotModel::quadruped();
    let mut rng = rng(0x1D);
    let (mut worst_joint, mut worst_base) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let (base, q, qd, acc, qdd) = random_state(&mut rng);
        let mut stance = Leg::ALL.to_vec();
        if rng.random_bool(0.5) {
            stance.remove(rng.random_range(0..4));
        }
        let cmd = whole_body_torques(&model, &base, &q, &qd, &acc, &qdd, &stance, GRAVITY)
            .map_err(|e| format!("case {case}: {e}"))?;
        let m = mass_matrix(&model, &base, &q);
        let z = JointVector::zeros();
        let h = rnea(&model, &base, &q, &qd, &Vector6::zeros(), &z, GRAVITY).to_vector();
        let mut a = DVector::zeros(18);
        a.rows_mut(0, 6).copy_from(&acc);
        a.rows_mut(6, 12).copy_from(&qdd);
        let lhs = &m * &a + DVector::from_column_slice(h.as_slice());
        let jac = contact_jacobian(&model, &base, &q, &stance).map_err(|e| e.to_string())?;
        let lambda = DVector::from_iterator(3 * stance.len(), cmd.lambda.iter().flat_map(|f| [f.x, f.y, f.z]));
        let joint = lhs.rows(6, 12) - DVector::from_column_slice(cmd.tau.as_slice()) - jac.joints.transpose() * &lambda;
        let base_rows = lhs.rows(0, 6).into_owned();
        let base_res = (&base_rows - jac.base.transpose() * &lambda).norm();
        let oracle = projection_residual(&jac.base.transpose(), &base_rows);
        let scale = 1.0 + lhs.amax();
        ensure!(joint.amax() < 1e-8 * scale, "case {case}: joint residual {:e}", joint.amax());
        ensure!((base_res - oracle).abs() < 1e-8 * scale, "case {case}: base {base_res:e} vs {oracle:e}");
        worst_joint = worst_joint.max(joint.amax() / scale);
        worst_base = worst_base.max((base_res - oracle).abs() / scale);
    }
    Ok(format!("max relative joint residual {worst_joint:.1e}, base gap {worst_base:.1e}"))
}

fn statics_share_the_weight() -> Outcome {
    let model = RobotModel::quadruped();
    let base = FloatingBase::at(Vector3::new(0.0, 0.0, 0.55));
    let feet = Leg::ALL.map(|leg| {
        Vector3::new(
            if leg.is_front() { 0.37 } else { -0.37 },
            if leg.is_left() { 0.34 } else { -0.34 },
            0.0,
        )
    });
    let q = inverse_kinematics(&model, &base, &feet).map_err(|e| e.to_string())?;
    let z = JointVector::zeros();
    let cmd = whole_body_torques(&model, &base, &q, &z, &Vector6::zeros(), &z, &Leg::ALL, GRAVITY)
        .map_err(|e| e.to_string())?;
    let weight = model.total_mass() * GRAVITY;
    let total = cmd.total_vertical_force();
    ensure!((total - weight).abs() < 1e-6, "sum {total} vs {weight}");
    for (leg, f) in cmd.stance.iter().zip(&cmd.lambda) {
        ensure!((f.z - weight / 4.0).abs() < 1e-6, "{leg:?}: {} vs {}", f.z, weight / 4.0);
    }
    Ok(format!("sum {total:.9} N for {:.1} kg", model.total_mass()))
}

fn dynamic_beats_static() -> Outcome {
    let scenario = Scenario::builtin(BuiltinTerrain::TwoPallets);
    let cmp = compare_modes(&scenario, &PipelineConfig::default(), 0.01).map_err(|e| e.to_string())?;
    ensure!(
        cmp.zmp_duration < cmp.static_duration,
        "ZMP {} s vs static {} s",
        cmp.zmp_duration,
        cmp.static_duration
    );
    Ok(format!(
        "ZMP {:.2} s vs static {:.2} s, speedup {:.2}",
        cmp.zmp_duration,
        cmp.static_duration,
        cmp.speedup()
    ))
}

fn gap_is_crossed(runs: &[(BuiltinTerrain, RunOutput, Duration)]) -> Outcome {
    let (_, run, _) = runs.iter().find(|(k, _, _)| *k == BuiltinTerrain::Gap).ok_or("gap run missing")?;
    let r = &run.report;
    ensure!(r.success, "gap run failed: {:?}", r.failure);
    ensure!(r.zmp_violations == 0, "{} ZMP violations", r.zmp_violations);
    let grid = Scenario::builtin(BuiltinTerrain::Gap).generate().map_err(|e| e.to_string())?;
    let void_cells = (0..grid.nx()).flat_map(|ix| (0..grid.ny()).map(move |iy| (ix, iy)));
    let void_cells = void_cells.filter(|&(ix, iy)| grid.is_void(ix, iy)).count();
    ensure!(void_cells > 0, "gap scenario has no void cells");
    for s in &r.steps {
        let (ix, iy) = grid.geometry().cell_of(Vector2::new(s.x, s.y)).ok_or("step off the map")?;
        ensure!(!grid.is_void(ix, iy), "step {} at ({}, {}) is in the gap", s.index, s.x, s.y);
    }
    let crossed = r.steps.iter().filter(|s| s.x > 1.35).count();
    ensure!(crossed >= 4, "only {crossed} footholds beyond the gap");
    Ok(format!("{} steps, none of {void_cells} void cells used", r.steps.len()))
}

fn replanning_keeps_history(runs: &[(BuiltinTerrain, RunOutput, Duration)]) -> Outcome {
    let (_, baseline, _) = runs.iter().find(|(k, _, _)| *k == BuiltinTerrain::Flat).ok_or("flat run missing")?;
    let scenario = Scenario::builtin(BuiltinTerrain::Flat);
    let config = PipelineConfig::default();
    let geometry = builtin_geometry();
    let rect = world_rect(&geometry, Vector2::new(1.0, -0.4), Vector2::new(1.6, 0.4)).map_err(|e| e.to_string())?;
    let event = TerrainEvent {
        patch: nalgebra::DMatrix::repeat(rect.y1 - rect.y0, rect.x1 - rect.x0, 0.15),
        at: (rect.x0, rect.y0),
        after_step: 8,
    };
    let run = replay_event(&scenario, &config, &event, None);
    let r = &run.report;
    ensure!(run.error.is_none() && r.success, "replay failed: {:?}", r.failure);
    ensure!(r.replans == 1, "{} replans", r.replans);
    // Steps executed before the first chunk boundary at or after step 8.
    let base = &baseline.report.steps;
    let mut executed = 0;
    for chunk in 0.. {
        executed += base.iter().filter(|s| s.chunk == chunk).count();
        if executed >= event.after_step || executed == base.len() {
            break;
        }
    }
    ensure!(r.steps.len() >= executed, "replay has fewer steps than were executed");
    ensure!(r.steps[..executed] == base[..executed], "executed steps changed after the replan");
    let on_patch = r.steps.iter().filter(|s| s.z > 0.1).count();
    ensure!(on_patch > 0, "no foothold on the inserted pallet");
    Ok(format!("{executed} steps kept, {on_patch} footholds on the pallet, {} steps total", r.steps.len()))
}

fn numerical_cross_checks() -> Outcome {
    let mut rng = rng(0xC0DE);
    let mut rot = 0.0f64;
    for _ in 0..100 {
        let axis = Unit::new_normalize(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        let r = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::PI));
        let v = rotation_vector(r.matrix());
        rot = rot.max((rotation_exp(&v) - r.matrix()).amax());
    }
    ensure!(rot <= 1e-9, "rotation round trip {rot:e}");

    let model = RobotModel::quadruped();
    let mut jac_err = 0.0f64;
    let h = 1e-6;
    for _ in 0..20 {
        let (base, q, ..) = random_state(&mut rng);
        let jac = contact_jacobian(&model, &base, &q, &Leg::ALL).map_err(|e| e.to_string())?;
        let feet = |b: &FloatingBase, q: &JointVector| foot_positions(&model, b, q);
        let column = |plus: [Vector3<f64>; 4], minus: [Vector3<f64>; 4]| {
            DVector::from_iterator(12, (0..4).flat_map(|i| ((plus[i] - minus[i]) / (2.0 * h)).data.0[0]))
        };
        for j in 0..12 {
            let (mut qp, mut qm) = (q, q);
            qp[j] += h;
            qm[j] -= h;
            let fd = column(feet(&base, &qp), feet(&base, &qm));
            jac_err = jac_err.max((fd - jac.joints.column(j)).amax());
        }
        for j in 0..6 {
            let mut d = Vector3::zeros();
            d[j % 3] = h;
            let (mut bp, mut bm) = (base, base);
            if j < 3 {
                bp.position += d;
                bm.position -= d;
            } else {
                bp.rotation = Rotation3::from_matrix_unchecked(rotation_exp(&d)) * base.rotation;
                bm.rotation = Rotation3::from_matrix_unchecked(rotation_exp(&-d)) * base.rotation;
            }
            let fd = column(feet(&bp, &q), feet(&bm, &q));
            jac_err = jac_err.max((fd - jac.base.column(j)).amax());
        }
    }
    ensure!(jac_err <= 1e-6, "contact Jacobian vs finite differences {jac_err:e}");

    let mut zmp_err = 0.0f64;
    for _ in 0..10 {
        let plan = random_foothold_plan(&mut rng, 6);
        let Ok(traj) = optimize(&plan, &TrajParams::default()) else {
            continue;
        };
        let traj = traj.solution.trajectory;
        let h = 1e-4;
        for (phase, seg) in traj.segments.iter().enumerate() {
            for k in 1..10 {
                let tau = seg.duration * k as f64 / 10.0;
                let acc = (seg.position(tau + h) - seg.position(tau) * 2.0 + seg.position(tau - h)) / (h * h);
                let zdd = traj.z.accel_in_phase(phase, tau);
                let fd = seg.position(tau) - acc * (traj.z.height_above_support / (zdd + GRAVITY));
                let zmp = traj.zmp_local(phase, tau).ok_or("free fall")?;
                zmp_err = zmp_err.max((zmp - fd).amax());
            }
        }
    }
    ensure!(zmp_err > 0.0 && zmp_err <= 1e-6, "ZMP vs finite differences {zmp_err:e}");
    Ok(format!("rotation {rot:.1e}, Jacobian {jac_err:.1e}, ZMP {zmp_err:.1e}"))
}

fn main() -> ExitCode {
    // Builtin runs are shared by the trajectory, gap and replanning criteria.
    let runs: Vec<(BuiltinTerrain, RunOutput, Duration)> = BuiltinTerrain::ALL
        .iter()
        .map(|&kind| {
            let t = Instant::now();
            let out = run_pipeline(&Scenario::builtin(kind), &PipelineConfig::default(), None);
            (kind, out, t.elapsed())
        })
        .collect();

    let criteria: Vec<Criterion<'_>> = vec![
        ("qp solver vs enumeration", Some(5.0), Box::new(qp_matches_enumeration)),
        ("anytime search optimality", Some(10.0), Box::new(ara_star_is_anytime_optimal)),
        ("trajectory continuity and stability", None, Box::new(|| trajectories_are_smooth_and_stable(&runs))),
        ("four-leg phase insertion", None, Box::new(quad_phases_follow_geometry)),
        ("inverse dynamics residual", None, Box::new(inverse_dynamics_residuals)),
        ("statics", None, Box::new(statics_share_the_weight)),
        ("dynamic faster than static", None, Box::new(dynamic_beats_static)),
        ("gap crossing", None, Box::new(|| gap_is_crossed(&runs))),
        ("replanning", None, Box::new(|| replanning_keeps_history(&runs))),
        ("numerical cross-checks", None, Box::new(numerical_cross_checks)),
    ];

    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if secs >= *l => Err(format!("took {secs:.2} s, limit {l} s")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
