//! Self-contained linear programming toolkit: a bounded-variable revised
//! simplex with exact dual extraction, a branch-and-bound layer for binary
//! variables, and a separable quadratic penalty handler used by the
//! consensus-penalized master problems.
//!
//! Everything else in this crate formulates its optimization problems as
//! [`LpInstance`] / [`MilpInstance`] values and solves them through
//! [`solve_lp`] / [`solve_milp`].

mod branch_bound;
mod dump;
mod quadratic;
mod simplex;
#[cfg(test)]
mod tests;

pub use branch_bound::solve_milp;
pub use dump::{write_lp_text, write_lp_text_file};
pub use quadratic::apply_separable_quadratic;
pub use simplex::{solve_lp, solve_lp_opts, Simplex};

use serde::{Deserialize, Serialize};

/// Sense of a linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// Errors produced by the LP/MILP layer.
///
/// Infeasible and unbounded problems are *statuses*, not errors; errors are
/// reserved for malformed input and numerical breakdown so that a wrong
/// answer is never returned silently.
#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid quadratic penalty: {0}")]
    InvalidPenalty(String),
    #[error("simplex iteration limit hit after {0} iterations")]
    IterationLimit(usize),
}

/// Tolerances and limits of the simplex kernel.
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance (scaled by `1 + max |rhs|`).
    pub feas_tol: f64,
    /// Reduced-cost threshold below which a column is not attractive.
    pub opt_tol: f64,
    /// Smallest pivot magnitude accepted during a basis change.
    pub pivot_tol: f64,
    /// Hard cap on simplex iterations; `0` means `20_000 + 10 * (rows + cols)`.
    pub max_iters: usize,
    /// Forced refactorization interval in pivots.
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iters: 0,
            refactor_every: 1000,
        }
    }
}

/// A linear program in sparse triplet form:
/// `min c'x + offset  s.t.  A x (<=|=|>=) b,  l <= x <= u`.
///
/// Bounds use `None` as the infinity sentinel; finite stand-ins for
/// unbounded variables are never used.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LpInstance {
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub col_names: Vec<String>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub row_names: Vec<String>,
    /// `(row, col, coefficient)` triplets; duplicates are summed.
    pub entries: Vec<(usize, usize, f64)>,
}

impl LpInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Adds a column and returns its index.
    pub fn add_col(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        lower: Option<f64>,
        upper: Option<f64>,
    ) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.col_names.push(name.into());
        self.objective.len() - 1
    }

    /// Adds a row and returns its index. Zero coefficients are dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: RowSense,
        rhs: f64,
        coefs: &[(usize, f64)],
    ) -> usize {
        let row = self.rhs.len();
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.row_names.push(name.into());
        for &(col, v) in coefs {
            if v != 0.0 {
                self.entries.push((row, col, v));
            }
        }
        row
    }

    pub fn set_bounds(&mut self, col: usize, lower: Option<f64>, upper: Option<f64>) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    /// Fixes a column to a single value.
    pub fn fix_col(&mut self, col: usize, value: f64) {
        self.lower[col] = Some(value);
        self.upper[col] = Some(value);
    }

    /// Checks the structural invariants: consistent dimensions, no NaN
    /// coefficients, ordered bounds, in-range triplet indices.
    pub fn check(&self) -> Result<(), LpError> {
        let n = self.n_cols();
        let m = self.n_rows();
        if self.lower.len() != n || self.upper.len() != n || self.col_names.len() != n {
            return Err(LpError::Malformed(format!(
                "column vectors disagree: obj {}, lower {}, upper {}, names {}",
                n,
                self.lower.len(),
                self.upper.len(),
                self.col_names.len()
            )));
        }
        if self.senses.len() != m || self.row_names.len() != m {
            return Err(LpError::Malformed(format!(
                "row vectors disagree: rhs {}, senses {}, names {}",
                m,
                self.senses.len(),
                self.row_names.len()
            )));
        }
        if !self.objective_offset.is_finite() {
            return Err(LpError::Malformed("objective offset is not finite".into()));
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::Malformed(format!(
                    "objective coefficient of column {} ({}) is not finite",
                    j, self.col_names[j]
                )));
            }
        }
        for b in &self.rhs {
            if !b.is_finite() {
                return Err(LpError::Malformed("rhs entry is not finite".into()));
            }
        }
        for j in 0..n {
            if let (Some(l), Some(u)) = (self.lower[j], self.upper[j]) {
                if l > u {
                    return Err(LpError::Malformed(format!(
                        "column {} ({}) has lower {} > upper {}",
                        j, self.col_names[j], l, u
                    )));
                }
            }
            if self.lower[j].map_or(false, |v| !v.is_finite())
                || self.upper[j].map_or(false, |v| !v.is_finite())
            {
                return Err(LpError::Malformed(format!(
                    "column {} has a non-finite explicit bound; use None for infinity",
                    j
                )));
            }
        }
        for &(r, c, v) in &self.entries {
            if r >= m || c >= n {
                return Err(LpError::Malformed(format!(
                    "triplet ({}, {}) outside {}x{} matrix",
                    r, c, m, n
                )));
            }
            if !v.is_finite() {
                return Err(LpError::Malformed(format!(
                    "coefficient at ({}, {}) is not finite",
                    r, c
                )));
            }
        }
        Ok(())
    }
}

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution of an [`LpInstance`].
///
/// On `Optimal` the following contracts hold (enforced by the solver, which
/// reports a numerical failure instead of returning a solution violating
/// them): primal residual `<= 1e-7 * (1 + max |rhs|)` and strong duality
/// `|objective - dual objective| <= 1e-6 * (1 + |objective|)`.
///
/// Dual sign convention for minimization: duals of `<=` rows are `<= 0`,
/// duals of `>=` rows are `>= 0`, equality rows are unrestricted. The dual
/// value of a row is the sensitivity of the optimum to its rhs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective: `y'b + sum of reduced costs at active bounds`.
    /// Equal to the primal objective at an optimum (strong duality).
    pub fn dual_objective(&self, lp: &LpInstance) -> f64 {
        let mut v: f64 = lp.objective_offset;
        for (i, y) in self.duals.iter().enumerate() {
            v += y * lp.rhs[i];
        }
        for j in 0..lp.n_cols() {
            let d = self.reduced_costs[j];
            if d == 0.0 {
                continue;
            }
            // The nonbasic bound a variable rests on is recovered from the
            // sign of its reduced cost in a minimization.
            if d > 0.0 {
                if let Some(l) = lp.lower[j] {
                    v += d * l;
                }
            } else if let Some(u) = lp.upper[j] {
                v += d * u;
            }
        }
        v
    }
}

/// An [`LpInstance`] plus the set of columns restricted to `{0, 1}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MilpInstance {
    pub lp: LpInstance,
    pub binaries: Vec<usize>,
}

impl MilpInstance {
    pub fn check(&self) -> Result<(), LpError> {
        self.lp.check()?;
        for &j in &self.binaries {
            if j >= self.lp.n_cols() {
                return Err(LpError::Malformed(format!(
                    "binary index {} outside column range {}",
                    j,
                    self.lp.n_cols()
                )));
            }
            let l = self.lp.lower[j].unwrap_or(f64::NEG_INFINITY);
            let u = self.lp.upper[j].unwrap_or(f64::INFINITY);
            if l < -1e-9 || u > 1.0 + 1e-9 {
                return Err(LpError::Malformed(format!(
                    "binary column {} has bounds [{}, {}] outside [0, 1]",
                    j, l, u
                )));
            }
        }
        Ok(())
    }
}

/// Solution of a [`MilpInstance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Whether every binary sits within `1e-6` of `{0, 1}`.
    pub integral: bool,
    /// Branch-and-bound nodes solved (1 for a pure LP).
    pub nodes: usize,
}

/// Integrality tolerance for binary variables.
pub const INT_TOL: f64 = 1e-6;

pub(crate) fn is_integral(v: f64) -> bool {
    (v - v.round()).abs() <= INT_TOL
}
