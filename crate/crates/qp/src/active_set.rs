use nalgebra::{Cholesky, DMatrix, DVector};

use crate::equality::NullSpace;
use crate::{QProblem, QSolution, QpError};

/// Solve a convex QP with the Goldfarb-Idnani dual active-set method.
///
/// Equalities are eliminated first (`x = x_p + Z y`); the remaining problem
/// in `y` must be strictly convex. When its Cholesky factorisation fails the
/// Hessian is lifted by `1e-10 * trace / n` once before giving up.
///
/// The iteration count is capped at `50 * (n + m)`.
pub fn solve(problem: &QProblem, tol: f64) -> Result<QSolution, QpError> {
    problem.validate()?;
    let n = problem.n();
    let m = problem.m();

    let ns = NullSpace::new(&problem.ce, &problem.ce0)?;
    let gz = &problem.g * &ns.z;
    let g_red = ns.z.tr_mul(&gz);
    // Symmetrize away round-off from the triple product.
    let g_red = (&g_red + g_red.transpose()) * 0.5;
    let g0_red = ns.z.tr_mul(&(&problem.g * &ns.xp + &problem.g0));
    let ci_red = ns.z.tr_mul(&problem.ci);
    let ci0_red = problem.ci.tr_mul(&ns.xp) + &problem.ci0;
    // Constraint rows are compared in geometric units in the original space.
    let ci_norms: Vec<f64> = (0..m)
        .map(|i| problem.ci.column(i).norm().max(f64::MIN_POSITIVE))
        .collect();

    let reduced = DualActiveSet::run(
        &g_red,
        &g0_red,
        &ci_red,
        &ci0_red,
        &ci_norms,
        tol,
        50 * (n + m).max(1),
    )?;

    let x = &ns.xp + &ns.z * &reduced.y;
    let mut lambda_i = DVector::zeros(m);
    for (&i, &u) in reduced.active.iter().zip(&reduced.u) {
        lambda_i[i] = u;
    }
    let rhs = &problem.g * &x + &problem.g0 - &problem.ci * &lambda_i;
    let eq_multipliers = ns.multipliers(&rhs);

    // Report the active set in ascending index order.
    let mut pairs: Vec<(usize, f64)> = reduced.active.into_iter().zip(reduced.u).collect();
    pairs.sort_by_key(|&(i, _)| i);
    let (active_set, ineq_multipliers) = pairs.into_iter().unzip();

    Ok(QSolution {
        objective: problem.objective(&x),
        x,
        active_set,
        eq_multipliers,
        ineq_multipliers,
        iterations: reduced.iterations,
        regularized: reduced.regularized,
    })
}

struct ReducedSolution {
    y: DVector<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    iterations: usize,
    regularized: bool,
}

/// State of the dual method on `min 1/2 y'Gy + g'y  s.t.  C'y + c0 >= 0`.
///
/// `j` holds `L^-T Q` and `r` the upper-triangular factor of the active
/// constraint normals, so that `J'N = [R; 0]`.
struct DualActiveSet {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    r_norm: f64,
    active: Vec<usize>,
    u: Vec<f64>,
}

impl DualActiveSet {
    fn run(
        g: &DMatrix<f64>,
        g0: &DVector<f64>,
        ci: &DMatrix<f64>,
        ci0: &DVector<f64>,
        ci_norms: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<ReducedSolution, QpError> {
        let n = g0.len();
        let m = ci0.len();

        if n == 0 {
            // Equalities pin x completely; only feasibility remains.
            if let Some(i) = (0..m).find(|&i| ci0[i] < -tol * ci_norms[i]) {
                return Err(QpError::Infeasible {
                    certificate: vec![i],
                });
            }
            return Ok(ReducedSolution {
                y: DVector::zeros(0),
                active: Vec::new(),
                u: Vec::new(),
                iterations: 0,
                regularized: false,
            });
        }

        let (chol, regularized) = factor(g)?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(QpError::NotPositiveDefinite)?;
        let mut state = DualActiveSet {
            j: l_inv.transpose(),
            r: DMatrix::zeros(n, n),
            r_norm: 1.0,
            active: Vec::new(),
            u: Vec::new(),
        };

        // Unconstrained minimum.
        let mut y = -chol.solve(g0);
        let feas_tol = 1e-3 * tol;
        let mut iterations = 0;
        let mut is_active = vec![false; m];

        loop {
            // Step 1: most violated constraint, in normalized units.
            let slack = ci.tr_mul(&y) + ci0;
            let candidate = (0..m)
                .filter(|&i| !is_active[i])
                .map(|i| (i, slack[i] / ci_norms[i]))
                .filter(|&(_, s)| s < -feas_tol)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let Some((p, _)) = candidate else {
                return Ok(ReducedSolution {
                    y,
                    active: state.active,
                    u: state.u,
                    iterations,
                    regularized,
                });
            };
            let np = ci.column(p).into_owned();
            let mut u_plus = 0.0;

            // Step 2: move in primal and/or dual space until p becomes active.
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(QpError::IterationLimit(max_iter));
                }
                let iq = state.active.len();
                let d = state.j.tr_mul(&np);
                let d2 = d.rows(iq, n - iq);
                let z = state.j.columns(iq, n - iq) * d2;
                let r = state.back_substitute(&d, iq);

                let dependent = d2.norm() <= 1e-12 * d.norm().max(f64::MIN_POSITIVE);
                let s_p = np.dot(&y) + ci0[p];
                let t2 = if dependent {
                    f64::INFINITY
                } else {
                    -s_p / z.dot(&np)
                };

                // Dual step length: largest step keeping active multipliers >= 0.
                let mut t1 = f64::INFINITY;
                let mut leaving = None;
                for k in 0..iq {
                    if r[k] > 0.0 {
                        let ratio = state.u[k] / r[k];
                        if ratio < t1 {
                            t1 = ratio;
                            leaving = Some(k);
                        }
                    }
                }

                let t = t1.min(t2);
                if !t.is_finite() {
                    let mut certificate = state.active.clone();
                    certificate.push(p);
                    certificate.sort_unstable();
                    return Err(QpError::Infeasible { certificate });
                }

                for k in 0..iq {
                    state.u[k] -= t * r[k];
                }
                u_plus += t;

                if t2.is_infinite() {
                    // Pure dual step: drop the blocking constraint and retry.
                    let k = leaving.expect("finite t1 implies a blocking constraint");
                    is_active[state.active[k]] = false;
                    state.delete(k);
                    continue;
                }

                y += &z * t;
                if t2 <= t1 {
                    // Full step: p is now satisfied with equality.
                    let mut d = state.j.tr_mul(&np);
                    if !state.add(&mut d) {
                        let mut certificate = state.active.clone();
                        certificate.push(p);
                        certificate.sort_unstable();
                        return Err(QpError::Infeasible { certificate });
                    }
                    state.active.push(p);
                    state.u.push(u_plus);
                    is_active[p] = true;
                    break;
                }
                // Partial step: a constraint left the active set first.
                let k = leaving.expect("t1 < t2 implies a blocking constraint");
                is_active[state.active[k]] = false;
                state.delete(k);
            }
        }
    }

    /// Solve `R[..iq, ..iq] r = d[..iq]`.
    fn back_substitute(&self, d: &DVector<f64>, iq: usize) -> DVector<f64> {
        let mut r = DVector::zeros(iq);
        for i in (0..iq).rev() {
            let mut sum = d[i];
            for k in i + 1..iq {
                sum -= self.r[(i, k)] * r[k];
            }
            r[i] = sum / self.r[(i, i)];
        }
        r
    }

    /// Append the constraint with `d = J' n` to the factorisation.
    fn add(&mut self, d: &mut DVector<f64>) -> bool {
        let n = d.len();
        let iq = self.active.len();
        for jj in (iq + 1..n).rev() {
            let (mut cc, mut ss) = (d[jj - 1], d[jj]);
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            d[jj] = 0.0;
            ss /= h;
            cc /= h;
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                self.j[(k, jj - 1)] = t1 * cc + t2 * ss;
                self.j[(k, jj)] = xny * (t1 + self.j[(k, jj - 1)]) - t2;
            }
        }
        for i in 0..=iq {
            self.r[(i, iq)] = d[i];
        }
        let diag = d[iq].abs();
        if diag <= f64::EPSILON * self.r_norm {
            // Linearly dependent on the active set.
            for i in 0..=iq {
                self.r[(i, iq)] = 0.0;
            }
            return false;
        }
        self.r_norm = self.r_norm.max(diag);
        true
    }

    /// Remove the active constraint at position `pos` and re-triangularise.
    fn delete(&mut self, pos: usize) {
        let n = self.j.nrows();
        let iq = self.active.len();
        self.active.remove(pos);
        self.u.remove(pos);
        for col in pos..iq - 1 {
            for row in 0..n {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..n {
            self.r[(row, iq - 1)] = 0.0;
        }
        let iq = iq - 1;
        for jj in pos..iq {
            let (mut cc, mut ss) = (self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                self.r[(jj, k)] = t1 * cc + t2 * ss;
                self.r[(jj + 1, k)] = xny * (t1 + self.r[(jj, k)]) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                self.j[(k, jj)] = t1 * cc + t2 * ss;
                self.j[(k, jj + 1)] = xny * (self.j[(k, jj)] + t1) - t2;
            }
        }
    }
}

fn factor(g: &DMatrix<f64>) -> Result<(Cholesky<f64, nalgebra::Dyn>, bool), QpError> {
    if let Some(chol) = Cholesky::new(g.clone()) {
        return Ok((chol, false));
    }
    let n = g.nrows();
    let lift = 1e-10 * g.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let lifted = g + DMatrix::identity(n, n) * lift;
    Cholesky::new(lifted)
        .map(|c| (c, true))
        .ok_or(QpError::NotPositiveDefinite)
}
