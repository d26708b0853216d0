//! Self-contained linear programming and 0-1 branch-and-bound engine.
//!
//! Every lower-bounding and lower-level subproblem of the benchmark games
//! is solved here: a bounded-variable primal simplex (two-phase, with a
//! Bland's-rule fallback once pivoting degenerates) and a best-bound-first
//! branch-and-bound over binary variables. There are no cutting planes,
//! no presolve and no warm starts; instances are small enough that
//! correctness and determinism matter more than speed.

mod branch_bound;
mod simplex;

pub use branch_bound::solve_mip;

use thiserror::Error;

/// Absolute feasibility tolerance on constraint rows and variable bounds.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// A binary variable counts as integral within this distance of 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Absolute optimality gap at which branch-and-bound accepts an incumbent.
pub const GAP_TOL: f64 = 1e-6;
/// Pivot elements below this magnitude abort the solve.
pub const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// Constraint sense of one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    /// Sparse row coefficients as (variable index, value) pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => lhs <= self.rhs + tol,
            Sense::Eq => (lhs - self.rhs).abs() <= tol,
            Sense::Ge => lhs >= self.rhs - tol,
        }
    }
}

/// A linear program `min c'x  s.t.  rows, l <= x <= u`.
///
/// Bounds may be infinite in either direction.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New program with `num_vars` variables, zero objective and bounds `[0, +inf)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.objective.len() != self.num_vars
            || self.lower.len() != self.num_vars
            || self.upper.len() != self.num_vars
        {
            return Err(SolverError::InvalidProgram(
                "objective/bounds length does not match num_vars".into(),
            ));
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(SolverError::InvalidProgram(format!(
                    "objective coefficient {j} is not finite"
                )));
            }
        }
        for j in 0..self.num_vars {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(SolverError::InvalidProgram(format!(
                    "inconsistent bounds on variable {j}: [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        for (r, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(SolverError::InvalidProgram(format!(
                    "right-hand side of row {r} is not finite"
                )));
            }
            for &(j, v) in &con.coeffs {
                if j >= self.num_vars {
                    return Err(SolverError::InvalidProgram(format!(
                        "row {r} references variable {j} out of range"
                    )));
                }
                if !v.is_finite() {
                    return Err(SolverError::InvalidProgram(format!(
                        "coefficient on variable {j} in row {r} is not finite"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks rows and bounds independently of any solver state.
    pub fn point_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.num_vars {
            return false;
        }
        let in_bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol);
        in_bounds && self.constraints.iter().all(|c| c.satisfied(x, tol))
    }

    /// Plain-text dump with stable line ordering, for diffing.
    pub fn dump(&self) -> String {
        let mut out = String::from("minimize\n  ");
        out.push_str(&fmt_terms(&enumerate_dense(&self.objective)));
        out.push_str("\nsubject to\n");
        for (r, con) in self.constraints.iter().enumerate() {
            let mut sorted = con.coeffs.clone();
            sorted.sort_by_key(|&(j, _)| j);
            let op = match con.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            out.push_str(&format!(
                "  r{}: {} {} {}\n",
                r,
                fmt_terms(&sorted),
                op,
                con.rhs
            ));
        }
        out.push_str("bounds\n");
        for j in 0..self.num_vars {
            let (l, u) = (self.lower[j], self.upper[j]);
            let line = match (l.is_finite(), u.is_finite()) {
                (true, true) => format!("  {} <= x{} <= {}", l, j, u),
                (true, false) => format!("  x{} >= {}", j, l),
                (false, true) => format!("  x{} <= {}", j, u),
                (false, false) => format!("  x{} free", j),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }
}

fn enumerate_dense(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| (j, *c))
        .collect()
}

fn fmt_terms(terms: &[(usize, f64)]) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut s = String::new();
    for (k, &(j, v)) in terms.iter().enumerate() {
        if k == 0 {
            if v < 0.0 {
                s.push_str("- ");
            }
        } else if v < 0.0 {
            s.push_str(" - ");
        } else {
            s.push_str(" + ");
        }
        let a = v.abs();
        if a == 1.0 {
            s.push_str(&format!("x{j}"));
        } else {
            s.push_str(&format!("{a} x{j}"));
        }
    }
    s
}

/// A linear program plus a set of variables constrained to {0, 1}.
#[derive(Debug, Clone)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    /// Indices of binary variables, strictly increasing.
    pub binaries: Vec<usize>,
    /// Declares that every point with integral binaries has an integral
    /// objective value; branch-and-bound then prunes any node whose bound
    /// rounds up to the incumbent.
    pub objective_integral: bool,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram, binaries: Vec<usize>) -> Self {
        Self {
            lp,
            binaries,
            objective_integral: false,
        }
    }
}

impl MixedIntegerProgram {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.lp.validate()?;
        let mut prev = None;
        for &j in &self.binaries {
            if j >= self.lp.num_vars {
                return Err(SolverError::InvalidProgram(format!(
                    "binary marker {j} out of range"
                )));
            }
            if prev.is_some_and(|p| p >= j) {
                return Err(SolverError::InvalidProgram(
                    "binary markers must be strictly increasing".into(),
                ));
            }
            if self.lp.lower[j] < -FEASIBILITY_TOL || self.lp.upper[j] > 1.0 + FEASIBILITY_TOL {
                return Err(SolverError::InvalidProgram(format!(
                    "binary variable {j} has bounds outside [0, 1]"
                )));
            }
            prev = Some(j);
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut out = self.lp.dump();
        out.truncate(out.len() - "end\n".len());
        out.push_str("binaries\n ");
        for &j in &self.binaries {
            out.push_str(&format!(" x{j}"));
        }
        out.push_str("\nend\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Optimal point (empty when no point is available).
    pub point: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    /// Number of LP relaxations solved.
    pub nodes: u64,
}

/// Solves a pure LP. The returned solution is a vertex of the feasible set.
pub fn solve_lp(lp: &LinearProgram) -> Result<MipSolution, SolverError> {
    lp.validate()?;
    let res = simplex::solve(lp)?;
    Ok(match res.status {
        simplex::LpStatus::Optimal => MipSolution {
            status: MipStatus::Optimal,
            objective: res.objective,
            best_bound: res.objective,
            point: res.point,
            nodes: 0,
        },
        simplex::LpStatus::Infeasible => MipSolution {
            status: MipStatus::Infeasible,
            point: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            nodes: 0,
        },
        simplex::LpStatus::Unbounded => MipSolution {
            status: MipStatus::Unbounded,
            point: Vec::new(),
            objective: f64::NEG_INFINITY,
            best_bound: f64::NEG_INFINITY,
            nodes: 0,
        },
    })
}
