//! Cross-checks of the dual active-set solver against brute-force active-set
//! enumeration on small random problems.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use quadwalk_qp::{solve, QProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random strictly convex, feasible problem with `n <= 8`, `m <= 10`, `p <= 3`.
fn random_problem(rng: &mut ChaCha8Rng) -> QProblem {
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

/// Optimum by enumerating every candidate active set and keeping the KKT
/// point that is primal and dual feasible.
fn enumeration_oracle(qp: &QProblem) -> (DVector<f64>, f64) {
    let n = qp.n();
    let p = qp.p();
    let m = qp.m();
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
        // [G -C; C' 0] [x; lam] = [-g0; -c0]
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.g);
        kkt.view_mut((0, n), (n, k)).copy_from(&(-&c));
        kkt.view_mut((n, 0), (k, n)).copy_from(&c.transpose());
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&qp.g0));
        rhs.rows_mut(n, k).copy_from(&(-&c0));
        let svd = kkt.clone().svd(true, true);
        if svd.singular_values.min() < 1e-10 * svd.singular_values.max() {
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

#[test]
fn matches_enumeration_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5150);
    for case in 0..200 {
        let qp = random_problem(&mut rng);
        let sol = solve(&qp, 1e-9).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let (x_ref, f_ref) = enumeration_oracle(&qp);
        let dx = (&sol.x - &x_ref).amax();
        assert!(dx < 1e-7, "case {case}: |dx| = {dx:e}");
        assert!(
            (sol.objective - f_ref).abs() < 1e-9,
            "case {case}: objective {} vs {}",
            sol.objective,
            f_ref
        );
        let kkt = sol.kkt_residuals(&qp);
        let scale = 1.0 + qp.g0.amax();
        assert!(kkt.stationarity <= 1e-9 * scale, "case {case}: {kkt:?}");
        assert!(kkt.equality <= 1e-9 && kkt.inequality <= 1e-9 && kkt.dual <= 1e-10, "case {case}: {kkt:?}");
    }
}

/// Lagrangian dual value `min_x L(x, lam)` for fixed multipliers.
fn dual_objective(qp: &QProblem, lam_e: &DVector<f64>, lam_i: &DVector<f64>) -> f64 {
    // L = 1/2 x'Gx + g0'x - lam_e'(CE'x + ce0) - lam_i'(CI'x + ci0)
    let w = &qp.g0 - &qp.ce * lam_e - &qp.ci * lam_i;
    let x = -qp.g.clone().lu().solve(&w).unwrap();
    0.5 * x.dot(&(&qp.g * &x)) + w.dot(&x) - lam_e.dot(&qp.ce0) - lam_i.dot(&qp.ci0)
}

#[test]
fn dual_objective_bounds_primal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let qp = random_problem(&mut rng);
        let sol = solve(&qp, 1e-9).unwrap();
        let lam_i = sol.full_ineq_multipliers(qp.m());
        let dual = dual_objective(&qp, &sol.eq_multipliers, &lam_i);
        assert!(dual <= sol.objective + 1e-9);
        // Strong duality for convex QPs.
        assert!((dual - sol.objective).abs() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_inequalities_changes_nothing(seed in any::<u64>(), rot in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = random_problem(&mut rng);
        let m = qp.m();
        prop_assume!(m > 1);
        let perm: Vec<usize> = (0..m).map(|i| (i + rot) % m).collect();
        let mut ci = DMatrix::zeros(qp.n(), m);
        let mut ci0 = DVector::zeros(m);
        for (new, &old) in perm.iter().enumerate() {
            ci.set_column(new, &qp.ci.column(old));
            ci0[new] = qp.ci0[old];
        }
        let permuted = QProblem::new(qp.g.clone(), qp.g0.clone(), qp.ce.clone(), qp.ce0.clone(), ci, ci0).unwrap();
        let a = solve(&qp, 1e-9).unwrap();
        let b = solve(&permuted, 1e-9).unwrap();
        prop_assert!((&a.x - &b.x).amax() < 1e-9);
        prop_assert!((a.objective - b.objective).abs() < 1e-9);
    }

    #[test]
    fn scaling_the_objective_preserves_the_argmin(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = random_problem(&mut rng);
        let scaled = QProblem::new(
            &qp.g * 1e3, &qp.g0 * 1e3, qp.ce.clone(), qp.ce0.clone(), qp.ci.clone(), qp.ci0.clone(),
        ).unwrap();
        let a = solve(&qp, 1e-9).unwrap();
        let b = solve(&scaled, 1e-9).unwrap();
        let rel = (&a.x - &b.x).amax() / (1.0 + a.x.amax());
        prop_assert!(rel < 1e-6);
        prop_assert!(((b.objective / 1e3) - a.objective).abs() < 1e-6 * (1.0 + a.objective.abs()));
    }
}

#[test]
fn equality_kkt_solve_agrees_with_active_set_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let qp = random_problem(&mut rng);
        let eq_only = QProblem::new(
            qp.g.clone(),
            qp.g0.clone(),
            qp.ce.clone(),
            qp.ce0.clone(),
            DMatrix::zeros(qp.n(), 0),
            DVector::zeros(0),
        )
        .unwrap();
        let direct = quadwalk_qp::solve_equality(&qp.g, &qp.g0, &qp.ce, &qp.ce0).unwrap();
        let dual = solve(&eq_only, 1e-9).unwrap();
        assert!((&direct.x - &dual.x).amax() < 1e-10);
        assert!((&direct.eq_multipliers - &dual.eq_multipliers).amax() < 1e-9);
    }
}
