use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::QpError;

/// Dense convex quadratic program
///
/// ```text
///     minimize    1/2 x' G x + g0' x
///     subject to  CE' x + ce0  = 0
///                 CI' x + ci0 >= 0
/// ```
///
/// Constraint matrices are stored column-per-constraint, so `ce` is `n x p`
/// and `ci` is `n x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QProblem {
    pub g: DMatrix<f64>,
    pub g0: DVector<f64>,
    pub ce: DMatrix<f64>,
    pub ce0: DVector<f64>,
    pub ci: DMatrix<f64>,
    pub ci0: DVector<f64>,
}

impl QProblem {
    pub fn new(
        g: DMatrix<f64>,
        g0: DVector<f64>,
        ce: DMatrix<f64>,
        ce0: DVector<f64>,
        ci: DMatrix<f64>,
        ci0: DVector<f64>,
    ) -> Result<Self, QpError> {
        let problem = Self {
            g,
            g0,
            ce,
            ce0,
            ci,
            ci0,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Problem without constraints of either kind.
    pub fn unconstrained(g: DMatrix<f64>, g0: DVector<f64>) -> Result<Self, QpError> {
        let n = g0.len();
        Self::new(
            g,
            g0,
            DMatrix::zeros(n, 0),
            DVector::zeros(0),
            DMatrix::zeros(n, 0),
            DVector::zeros(0),
        )
    }

    pub fn n(&self) -> usize {
        self.g0.len()
    }

    pub fn p(&self) -> usize {
        self.ce0.len()
    }

    pub fn m(&self) -> usize {
        self.ci0.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        let dims_ok = self.g.nrows() == n
            && self.g.ncols() == n
            && self.ce.nrows() == n
            && self.ce.ncols() == self.p()
            && self.ci.nrows() == n
            && self.ci.ncols() == self.m();
        if !dims_ok {
            return Err(QpError::Dimension(format!(
                "G {}x{}, g0 {}, CE {}x{}, ce0 {}, CI {}x{}, ci0 {}",
                self.g.nrows(),
                self.g.ncols(),
                n,
                self.ce.nrows(),
                self.ce.ncols(),
                self.p(),
                self.ci.nrows(),
                self.ci.ncols(),
                self.m()
            )));
        }
        if self.p() > n {
            return Err(QpError::Dimension(format!(
                "{} equality constraints exceed {} variables",
                self.p(),
                n
            )));
        }
        let finite = self.g.iter().all(|v| v.is_finite())
            && self.g0.iter().all(|v| v.is_finite())
            && self.ce.iter().all(|v| v.is_finite())
            && self.ce0.iter().all(|v| v.is_finite())
            && self.ci.iter().all(|v| v.is_finite())
            && self.ci0.iter().all(|v| v.is_finite());
        if !finite {
            return Err(QpError::NonFinite);
        }
        let asym = (&self.g - self.g.transpose()).amax();
        if asym >= 1e-12 * (1.0 + self.g.amax()) {
            return Err(QpError::Asymmetric(asym));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.g * x)) + self.g0.dot(x)
    }

    /// Equality residuals `CE' x + ce0`.
    pub fn equality_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.ce.tr_mul(x) + &self.ce0
    }

    /// Inequality slacks `CI' x + ci0`; feasible when all are non-negative.
    pub fn inequality_slack(&self, x: &DVector<f64>) -> DVector<f64> {
        self.ci.tr_mul(x) + &self.ci0
    }

    /// Plain-text dump of all six blocks, readable by [`QProblem::from_dump`].
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        write_block(&mut out, "G", &self.g);
        write_block(&mut out, "g0", &column(&self.g0));
        write_block(&mut out, "CE", &self.ce);
        write_block(&mut out, "ce0", &column(&self.ce0));
        write_block(&mut out, "CI", &self.ci);
        write_block(&mut out, "ci0", &column(&self.ci0));
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, QpError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut blocks = Vec::with_capacity(6);
        for name in ["G", "g0", "CE", "ce0", "CI", "ci0"] {
            blocks.push(read_block(&mut lines, name)?);
        }
        let vector = |m: &DMatrix<f64>| DVector::from_column_slice(m.as_slice());
        Self::new(
            blocks[0].clone(),
            vector(&blocks[1]),
            blocks[2].clone(),
            vector(&blocks[3]),
            blocks[4].clone(),
            vector(&blocks[5]),
        )
    }
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn write_block(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn read_block<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    name: &str,
) -> Result<DMatrix<f64>, QpError> {
    let header = lines
        .next()
        .ok_or_else(|| QpError::Parse(format!("missing block {name}")))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(name) {
        return Err(QpError::Parse(format!("expected block {name}, got `{header}`")));
    }
    let mut dim = || -> Result<usize, QpError> {
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| QpError::Parse(format!("bad dimensions in `{header}`")))
    };
    let (rows, cols) = (dim()?, dim()?);
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let line = if cols == 0 {
            ""
        } else {
            lines
                .next()
                .ok_or_else(|| QpError::Parse(format!("block {name} truncated at row {r}")))?
        };
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| QpError::Parse(format!("block {name} row {r}: {e}")))?;
        if values.len() != cols {
            return Err(QpError::Parse(format!(
                "block {name} row {r}: expected {cols} values, got {}",
                values.len()
            )));
        }
        for (c, v) in values.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    Ok(m)
}
