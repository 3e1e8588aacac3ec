//! Dense primal simplex for small problems of the form
//!
//! ```text
//! maximize c·w  subject to  A·w ≤ u,  w ≥ 0
//! ```
//!
//! Two phases: rows with a negative bound get an artificial variable and
//! phase I drives those to zero. Pivoting follows Bland's rule throughout,
//! so the solver terminates on degenerate problems and is deterministic.

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_MAX_PIVOTS: usize = 1_000_000;

// Entries smaller than this after a pivot are flushed to zero.
const FLUSH: f64 = 1e-14;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("pivot limit of {0} reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    num_vars: usize,
    objective: Vec<f64>,
    // row-major, rows × num_vars
    matrix: Vec<f64>,
    bounds: Vec<f64>,
}

impl LpProblem {
    /// `rows[i]` holds the coefficients of constraint `i`, `bounds[i]` its right-hand side.
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, bounds: Vec<f64>) -> Result<Self, SolverError> {
        let n = objective.len();
        if rows.len() != bounds.len() {
            return Err(SolverError::Malformed(format!(
                "{} constraint rows but {} bounds",
                rows.len(),
                bounds.len()
            )));
        }
        let mut matrix = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(SolverError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            matrix.extend(row);
        }
        LpProblem::from_dense(objective, matrix, bounds)
    }

    /// Same as [`LpProblem::new`] with the matrix given row-major.
    pub fn from_dense(objective: Vec<f64>, matrix: Vec<f64>, bounds: Vec<f64>) -> Result<Self, SolverError> {
        let n = objective.len();
        if matrix.len() != bounds.len() * n {
            return Err(SolverError::Malformed(format!(
                "matrix has {} entries, expected {}x{n}",
                matrix.len(),
                bounds.len()
            )));
        }
        if objective.iter().chain(&matrix).chain(&bounds).any(|v| !v.is_finite()) {
            return Err(SolverError::Malformed("non-finite coefficient".to_string()));
        }
        Ok(LpProblem {
            num_vars: n,
            objective,
            matrix,
            bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.bounds.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn coefficient(&self, row: usize, var: usize) -> f64 {
        self.matrix[row * self.num_vars + var]
    }

    /// `A·w` for a candidate point.
    pub fn row_activity(&self, w: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks(self.num_vars.max(1))
            .take(self.bounds.len())
            .map(|row| row.iter().zip(w).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Largest violation of `A·w ≤ u` and `w ≥ 0`.
    pub fn max_violation(&self, w: &[f64]) -> f64 {
        let rows = self
            .row_activity(w)
            .into_iter()
            .zip(&self.bounds)
            .map(|(lhs, u)| lhs - u);
        let signs = w.iter().map(|x| -x);
        rows.chain(signs).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `c·w` when optimal, NaN otherwise.
    pub value: f64,
    /// Optimal point; empty unless optimal.
    pub primal: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Optimality and feasibility tolerance.
    pub tol: f64,
    pub max_pivots: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_pivots: DEFAULT_MAX_PIVOTS,
        }
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    // (rows + 1) × (width + 1); the last row holds reduced costs, the last column the rhs
    data: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.width + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.width + 1;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..stride {
            self.data[pr * stride + c] *= inv;
        }
        self.data[pr * stride + pc] = 1.0;
        let (before, rest) = self.data.split_at_mut(pr * stride);
        let (pivot_row, after) = rest.split_at_mut(stride);
        let eliminate = |row: &mut [f64]| {
            let factor = row[pc];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= factor * p;
                    if v.abs() < FLUSH {
                        *v = 0.0;
                    }
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(stride).for_each(eliminate);
        after.chunks_mut(stride).for_each(eliminate);
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Loads `cost` into the objective row expressed in the current basis.
    fn set_objective(&mut self, cost: &[f64]) {
        let stride = self.width + 1;
        let obj = self.rows * stride;
        for c in 0..stride {
            self.data[obj + c] = if c < self.width { cost[c] } else { 0.0 };
        }
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..stride {
                    self.data[obj + c] -= cb * self.data[r * stride + c];
                }
            }
        }
    }

    /// Runs Bland-rule iterations over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize, opts: &SolverOptions) -> Result<bool, SolverError> {
        let tol = opts.tol;
        loop {
            let entering = (0..allowed).find(|&c| self.at(self.rows, c) > tol);
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > tol {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            let slack = 1e-12 * (1.0 + best.abs());
                            if ratio < best - slack
                                || (ratio <= best + slack && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leaving else {
                return Ok(false);
            };
            if self.pivots >= opts.max_pivots {
                return Err(SolverError::IterationLimit(opts.max_pivots));
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solves `p`; never returns a point that fails the post-hoc feasibility check.
pub fn solve(p: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, SolverError> {
    let n = p.num_vars;
    let m = p.bounds.len();
    let negative_rows: Vec<usize> = (0..m).filter(|&i| p.bounds[i] < 0.0).collect();
    let k = negative_rows.len();
    let width = n + m + k;
    let stride = width + 1;

    let mut t = Tableau {
        rows: m,
        width,
        data: vec![0.0; (m + 1) * stride],
        basis: vec![0; m],
        pivots: 0,
    };
    let mut art = 0;
    for i in 0..m {
        let flip = p.bounds[i] < 0.0;
        let s = if flip { -1.0 } else { 1.0 };
        let row = &mut t.data[i * stride..(i + 1) * stride];
        for j in 0..n {
            row[j] = s * p.coefficient(i, j);
        }
        row[n + i] = s;
        row[width] = s * p.bounds[i];
        if flip {
            row[n + m + art] = 1.0;
            t.basis[i] = n + m + art;
            art += 1;
        } else {
            t.basis[i] = n + i;
        }
    }

    if k > 0 {
        let mut phase1 = vec![0.0; width];
        for c in phase1.iter_mut().skip(n + m) {
            *c = -1.0;
        }
        t.set_objective(&phase1);
        t.optimize(width, opts)?;
        // objective row rhs holds −z; z = −Σ artificials
        let infeasibility = t.at(m, width);
        let scale = 1.0 + p.bounds.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if infeasibility > opts.tol * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                primal: Vec::new(),
                pivots: t.pivots,
            });
        }
        // Drive artificials out of the basis where possible; rows left with an
        // artificial basic are redundant and all-zero in the real columns.
        for r in 0..m {
            if t.basis[r] >= n + m {
                if let Some(c) = (0..n + m).find(|&c| t.at(r, c).abs() > opts.tol) {
                    t.pivot(r, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&p.objective);
    t.set_objective(&cost);
    if !t.optimize(n + m, opts)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NAN,
            primal: Vec::new(),
            pivots: t.pivots,
        });
    }

    let mut primal = vec![0.0; n];
    for r in 0..m {
        let b = t.basis[r];
        if b < n {
            primal[b] = t.rhs(r).max(0.0);
        }
    }
    let value = p.objective.iter().zip(&primal).map(|(c, w)| c * w).sum();

    let scale = 1.0 + p.bounds.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
    let violation = p.max_violation(&primal);
    if violation > 10.0 * opts.tol * scale {
        return Err(SolverError::Numerical(format!(
            "returned point violates constraints by {violation:e}"
        )));
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        primal,
        pivots: t.pivots,
    })
}
