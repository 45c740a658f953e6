use nalgebra::{DMatrix, DVector};

use crate::{QProblem, QSolution, QpError};

/// Solve `min 1/2 x'Gx + g0'x  s.t.  CE'x + ce0 = 0` through its KKT system
///
/// ```text
///     [ G   CE ] [  x  ]   [ -g0  ]
///     [ CE'  0 ] [ -lam ] = [ -ce0 ]
/// ```
///
/// `G` only needs to be positive definite on the null space of `CE'`.
pub fn solve_equality(
    g: &DMatrix<f64>,
    g0: &DVector<f64>,
    ce: &DMatrix<f64>,
    ce0: &DVector<f64>,
) -> Result<QSolution, QpError> {
    let n = g0.len();
    let p = ce0.len();
    let problem = QProblem::new(
        g.clone(),
        g0.clone(),
        ce.clone(),
        ce0.clone(),
        DMatrix::zeros(n, 0),
        DVector::zeros(0),
    )?;

    let mut kkt = DMatrix::zeros(n + p, n + p);
    kkt.view_mut((0, 0), (n, n)).copy_from(g);
    kkt.view_mut((0, n), (n, p)).copy_from(ce);
    kkt.view_mut((n, 0), (p, n)).copy_from(&ce.transpose());
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&(-g0));
    rhs.rows_mut(n, p).copy_from(&(-ce0));

    let scale = kkt.amax().max(1.0);
    let lu = kkt.full_piv_lu();
    let (_, _, u, _) = lu.clone().unpack();
    let min_pivot = (0..n + p).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if n + p > 0 && min_pivot <= 1e-13 * scale {
        return Err(QpError::SingularKkt);
    }
    let sol = lu.solve(&rhs).ok_or(QpError::SingularKkt)?;

    let x = sol.rows(0, n).into_owned();
    let eq_multipliers = -sol.rows(n, p).into_owned();
    Ok(QSolution {
        objective: problem.objective(&x),
        x,
        active_set: Vec::new(),
        eq_multipliers,
        ineq_multipliers: Vec::new(),
        iterations: 0,
        regularized: false,
    })
}

/// Orthogonal parametrisation `x = x_p + Z y` of the affine set `CE'x + ce0 = 0`.
pub(crate) struct NullSpace {
    /// Orthonormal basis of range(CE), `n x p`.
    range: DMatrix<f64>,
    /// Upper-triangular factor with `CE = range * r`.
    r: DMatrix<f64>,
    /// Orthonormal basis of null(CE'), `n x (n - p)`.
    pub z: DMatrix<f64>,
    /// Minimum-norm point satisfying the equalities.
    pub xp: DVector<f64>,
}

impl NullSpace {
    pub fn new(ce: &DMatrix<f64>, ce0: &DVector<f64>) -> Result<Self, QpError> {
        let n = ce.nrows();
        let p = ce.ncols();
        if p == 0 {
            return Ok(Self {
                range: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
                z: DMatrix::identity(n, n),
                xp: DVector::zeros(n),
            });
        }
        // QR of [CE | I] yields a full orthogonal Q whose leading p columns
        // span range(CE) whenever CE has full column rank.
        let mut augmented = DMatrix::zeros(n, p + n);
        augmented.view_mut((0, 0), (n, p)).copy_from(ce);
        augmented
            .view_mut((0, p), (n, n))
            .copy_from(&DMatrix::identity(n, n));
        let qr = augmented.qr();
        let q = qr.q();
        let r_full = qr.r();
        let r = r_full.view((0, 0), (p, p)).into_owned();

        let col_scale = (0..p)
            .map(|j| ce.column(j).norm())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        if (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * col_scale) {
            return Err(QpError::RankDeficientEqualities);
        }

        let range = q.view((0, 0), (n, p)).into_owned();
        let z = q.view((0, p), (n, n - p)).into_owned();
        // CE' x = R' range' x = -ce0  with x = range w.
        let w = r
            .transpose()
            .solve_lower_triangular(&(-ce0))
            .ok_or(QpError::RankDeficientEqualities)?;
        let xp = &range * w;
        Ok(Self { range, r, z, xp })
    }

    /// Equality multipliers from the residual gradient `CE lam = rhs`,
    /// in the least-squares sense.
    pub fn multipliers(&self, rhs: &DVector<f64>) -> DVector<f64> {
        if self.r.nrows() == 0 {
            return DVector::zeros(0);
        }
        let projected = self.range.tr_mul(rhs);
        self.r
            .solve_upper_triangular(&projected)
            .unwrap_or_else(|| DVector::zeros(self.r.nrows()))
    }
}
