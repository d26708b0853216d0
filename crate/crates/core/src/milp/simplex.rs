//! Bounded-variable primal simplex with a two-phase start.
//!
//! Rows are rewritten as `a'x + s = b` with one slack per row; rows whose
//! slack cannot absorb the initial residual get an artificial variable and
//! are repaired in phase 1 by minimizing the total infeasibility. Nonbasic
//! variables sit at a finite bound (or at zero when free); the ratio test
//! covers basic variables hitting either bound plus the entering variable
//! flipping to its opposite bound. Dantzig pricing switches permanently to
//! Bland's rule after 500 consecutive degenerate pivots.

use super::{LinearProgram, Sense, SolverError, FEASIBILITY_TOL, PIVOT_TOL};

const DJ_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-10;
const BLAND_TRIGGER: u32 = 500;
const PHASE1_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult {
    pub status: LpStatus,
    /// Structural variables only; empty unless `Optimal`.
    pub point: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable, held at zero.
    FreeAtZero,
}

enum LoopExit {
    Optimal,
    Unbounded,
}

struct Simplex {
    rows: usize,
    cols: usize,
    n_struct: usize,
    /// Current tableau `B^{-1} A`, row-major `rows x cols`.
    tab: Vec<f64>,
    /// Values of the basic variables, row-aligned.
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    /// Reduced costs for the current phase.
    dj: Vec<f64>,
    /// Copy of the normalized pivot row during elimination.
    scratch: Vec<f64>,
    artificials: Vec<usize>,
    degenerate_run: u32,
    bland: bool,
    pivots: u64,
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Eq => (0.0, 0.0),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
    }
}

pub(crate) fn solve(lp: &LinearProgram) -> Result<LpResult, SolverError> {
    let mut sx = Simplex::build(lp);
    if !sx.artificials.is_empty() {
        sx.set_phase1_costs();
        match sx.run()? {
            LoopExit::Unbounded => {
                return Err(SolverError::NumericalBreakdown(
                    "phase-1 objective is bounded below by zero yet reported unbounded".into(),
                ))
            }
            LoopExit::Optimal => {}
        }
        if sx.phase1_infeasibility() > PHASE1_TOL {
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                point: Vec::new(),
                objective: f64::INFINITY,
            });
        }
        sx.pin_artificials();
    }
    sx.set_phase2_costs(lp);
    let exit = sx.run()?;
    match exit {
        LoopExit::Unbounded => Ok(LpResult {
            status: LpStatus::Unbounded,
            point: Vec::new(),
            objective: f64::NEG_INFINITY,
        }),
        LoopExit::Optimal => {
            let point = sx.extract_point(lp);
            let objective = lp.objective_value(&point);
            Ok(LpResult {
                status: LpStatus::Optimal,
                point,
                objective,
            })
        }
    }
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.constraints.len();

        let struct_state = |j: usize| {
            if lp.lower[j].is_finite() {
                VarState::AtLower
            } else if lp.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeAtZero
            }
        };
        let struct_value = |j: usize| match struct_state(j) {
            VarState::AtLower => lp.lower[j],
            VarState::AtUpper => lp.upper[j],
            _ => 0.0,
        };

        // First pass: initial residual of each row decides whether its slack
        // can start basic or an artificial is needed, which fixes the
        // column count exactly.
        let mut residuals = Vec::with_capacity(m);
        let mut needs_artificial = Vec::with_capacity(m);
        for con in &lp.constraints {
            let mut resid = con.rhs;
            for &(j, v) in &con.coeffs {
                resid -= v * struct_value(j);
            }
            let (sl, su) = slack_bounds(con.sense);
            residuals.push(resid);
            needs_artificial.push(resid < sl - FEASIBILITY_TOL || resid > su + FEASIBILITY_TOL);
        }
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let cols = n + m + n_art;

        let mut sx = Simplex {
            rows: m,
            cols,
            n_struct: n,
            tab: vec![0.0; m * cols],
            xb: vec![0.0; m],
            basis: vec![0; m],
            state: vec![VarState::AtLower; cols],
            lb: vec![0.0; cols],
            ub: vec![0.0; cols],
            cost: vec![0.0; cols],
            dj: vec![0.0; cols],
            scratch: vec![0.0; cols],
            artificials: Vec::new(),
            degenerate_run: 0,
            bland: false,
            pivots: 0,
        };
        sx.lb[..n].copy_from_slice(&lp.lower);
        sx.ub[..n].copy_from_slice(&lp.upper);
        for j in 0..n {
            sx.state[j] = struct_state(j);
        }
        for (r, con) in lp.constraints.iter().enumerate() {
            for &(j, v) in &con.coeffs {
                sx.tab[r * cols + j] += v;
            }
            let s = n + r;
            sx.tab[r * cols + s] = 1.0;
            let (sl, su) = slack_bounds(con.sense);
            sx.lb[s] = sl;
            sx.ub[s] = su;
            let resid = residuals[r];
            if !needs_artificial[r] {
                sx.basis[r] = s;
                sx.state[s] = VarState::Basic;
                sx.xb[r] = resid.clamp(sl, su.min(f64::MAX));
            } else {
                let clamped = if resid < sl { sl } else { su };
                sx.state[s] = if resid < sl {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                let art = n + m + sx.artificials.len();
                if resid < clamped {
                    // The artificial enters with a negative column; flipping
                    // the row keeps the tableau equal to B^{-1} A with the
                    // artificial's basis column at +1.
                    for j in 0..cols {
                        sx.tab[r * cols + j] = -sx.tab[r * cols + j];
                    }
                }
                sx.tab[r * cols + art] = 1.0;
                sx.lb[art] = 0.0;
                sx.ub[art] = f64::INFINITY;
                sx.basis[r] = art;
                sx.state[art] = VarState::Basic;
                sx.xb[r] = (resid - clamped).abs();
                sx.artificials.push(art);
            }
        }
        sx
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lb[j],
            VarState::AtUpper => self.ub[j],
            VarState::FreeAtZero => 0.0,
            VarState::Basic => unreachable!("basic variable has no bound value"),
        }
    }

    fn set_phase1_costs(&mut self) {
        self.cost.fill(0.0);
        for &a in &self.artificials {
            self.cost[a] = 1.0;
        }
        self.recompute_reduced_costs();
    }

    fn set_phase2_costs(&mut self, lp: &LinearProgram) {
        self.cost.fill(0.0);
        self.cost[..self.n_struct].copy_from_slice(&lp.objective);
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        self.dj.copy_from_slice(&self.cost);
        for r in 0..self.rows {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.tab[r * self.cols..(r + 1) * self.cols];
                for (d, t) in self.dj.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
    }

    fn phase1_infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for r in 0..self.rows {
            if self.cost[self.basis[r]] != 0.0 {
                total += self.xb[r];
            }
        }
        total
    }

    fn pin_artificials(&mut self) {
        for &a in &self.artificials.clone() {
            self.lb[a] = 0.0;
            self.ub[a] = 0.0;
        }
        // Residual infeasibility within PHASE1_TOL is rounded away.
        for r in 0..self.rows {
            if self.cost[self.basis[r]] != 0.0 && self.xb[r].abs() <= PHASE1_TOL {
                self.xb[r] = 0.0;
            }
        }
    }

    fn pick_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (col, dir, merit)
        for j in 0..self.cols {
            if self.state[j] == VarState::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.dj[j];
            let cand = match self.state[j] {
                VarState::AtLower if d < -DJ_TOL => Some((1.0, -d)),
                VarState::AtUpper if d > DJ_TOL => Some((-1.0, d)),
                VarState::FreeAtZero if d.abs() > DJ_TOL => Some((-d.signum(), d.abs())),
                _ => None,
            };
            if let Some((dir, merit)) = cand {
                if self.bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|(_, _, m)| merit > m) {
                    best = Some((j, dir, merit));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// One phase of the simplex loop on the current costs.
    fn run(&mut self) -> Result<LoopExit, SolverError> {
        let max_pivots = 20_000 + 40 * (self.rows as u64 + self.cols as u64);
        loop {
            if self.pivots > max_pivots {
                return Err(SolverError::NumericalBreakdown(format!(
                    "pivot limit {max_pivots} exceeded; the basis is likely cycling"
                )));
            }
            let Some((q, dir)) = self.pick_entering() else {
                return Ok(LoopExit::Optimal);
            };
            let mut best_t = f64::INFINITY;
            let mut leave: Option<usize> = None;
            for i in 0..self.rows {
                let a = self.tab[i * self.cols + q];
                let eff = dir * a;
                let t = if eff > 1e-11 {
                    let l = self.lb[self.basis[i]];
                    if l.is_finite() {
                        (self.xb[i] - l) / eff
                    } else {
                        continue;
                    }
                } else if eff < -1e-11 {
                    let u = self.ub[self.basis[i]];
                    if u.is_finite() {
                        (u - self.xb[i]) / (-eff)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let t = t.max(0.0);
                if t < best_t - RATIO_TIE {
                    best_t = t;
                    leave = Some(i);
                } else if t < best_t + RATIO_TIE {
                    if let Some(cur) = leave {
                        let better = if self.bland {
                            self.basis[i] < self.basis[cur]
                        } else {
                            self.tab[i * self.cols + q].abs() > self.tab[cur * self.cols + q].abs()
                        };
                        if better {
                            best_t = best_t.min(t);
                            leave = Some(i);
                        }
                    }
                }
            }
            let flip = self.ub[q] - self.lb[q];
            if flip.is_finite() && flip < best_t - RATIO_TIE {
                for i in 0..self.rows {
                    self.xb[i] -= dir * flip * self.tab[i * self.cols + q];
                }
                self.state[q] = match self.state[q] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    _ => unreachable!("flip applies to bounded nonbasic variables"),
                };
                self.note_step(flip);
                self.pivots += 1;
                continue;
            }
            let Some(r) = leave else {
                return Ok(LoopExit::Unbounded);
            };
            let piv = self.tab[r * self.cols + q];
            if piv.abs() < PIVOT_TOL {
                return Err(SolverError::NumericalBreakdown(format!(
                    "pivot element {piv:.3e} below {PIVOT_TOL:.0e} at row {r}, column {q}"
                )));
            }
            self.note_step(best_t);
            for i in 0..self.rows {
                self.xb[i] -= dir * best_t * self.tab[i * self.cols + q];
            }
            let entering_val = self.nonbasic_value(q) + dir * best_t;
            let leaving = self.basis[r];
            self.state[leaving] = if dir * piv > 0.0 {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.basis[r] = q;
            self.state[q] = VarState::Basic;
            self.xb[r] = entering_val;
            let inv = 1.0 / piv;
            let (rs, re) = (r * self.cols, (r + 1) * self.cols);
            for t in &mut self.tab[rs..re] {
                *t *= inv;
            }
            self.scratch.copy_from_slice(&self.tab[rs..re]);
            let dq = self.dj[q];
            if dq != 0.0 {
                for (d, &s) in self.dj.iter_mut().zip(&self.scratch) {
                    *d -= dq * s;
                }
            }
            self.dj[q] = 0.0;
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let is = i * self.cols;
                let f = self.tab[is + q];
                if f != 0.0 {
                    for (t, &s) in self.tab[is..is + self.cols].iter_mut().zip(&self.scratch) {
                        *t -= f * s;
                    }
                    self.tab[is + q] = 0.0;
                }
            }
            self.pivots += 1;
        }
    }

    fn note_step(&mut self, t: f64) {
        if t <= DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run >= BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
    }

    fn extract_point(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (j, v) in x.iter_mut().enumerate() {
            *v = match self.state[j] {
                VarState::Basic => 0.0, // filled below
                _ => self.nonbasic_value(j),
            };
        }
        for r in 0..self.rows {
            let j = self.basis[r];
            if j < self.n_struct {
                x[j] = self.xb[r];
            }
        }
        // Snap hairline bound violations from accumulated pivots.
        for (v, (&lo, &hi)) in x.iter_mut().zip(lp.lower.iter().zip(&lp.upper)) {
            if *v < lo && *v > lo - FEASIBILITY_TOL {
                *v = lo;
            } else if *v > hi && *v < hi + FEASIBILITY_TOL {
                *v = hi;
            }
        }
        x
    }
}
