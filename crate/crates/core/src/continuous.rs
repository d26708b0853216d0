//! Two-player continuous game with a nonconvex shared constraint.
//!
//! Player 1 minimizes `-2 y1 x2`, player 2 minimizes `x1 y2`, both over the
//! box `[0, 1]^2` intersected with `y1^r + y2^r <= 1` for an exponent
//! `r` in (0, 1) -- a nonconvex set. Subproblems are solved globally by an
//! exhaustive grid scan followed by two rounds of 4x local refinement
//! around the incumbent; with grid spacing `h` and Lipschitz constant `L`
//! on the box (here `L <= 3`), the incumbent value is within `L * h * sqrt(2)`
//! of the global optimum, and refinement shrinks `h` by 16x.

use crate::cutting_plane::{
    initialize_cuts_joint, solve_mnd, CutSet, SolveError, SolveReport, SolverConfig,
};
use crate::game::{GameError, LowerBound, NormalizedGame, Optimum};

/// Feasibility tolerance on the shared constraint.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Default grid resolution per axis; grid error ~1e-3 before refinement.
pub const DEFAULT_RESOLUTION: usize = 1024;

const REFINE_ROUNDS: usize = 2;
const REFINE_FACTOR: usize = 4;

#[derive(Debug, Clone)]
pub struct PowerConstraintGame {
    /// Exponent of the shared constraint, in (0, 1).
    pub exponent: f64,
    /// Grid resolution per axis for the global subsolver.
    pub resolution: usize,
    dims: [usize; 2],
}

impl Default for PowerConstraintGame {
    fn default() -> Self {
        Self::new(0.5, DEFAULT_RESOLUTION)
    }
}

impl PowerConstraintGame {
    pub fn new(exponent: f64, resolution: usize) -> Self {
        assert!(
            exponent > 0.0 && exponent < 1.0,
            "exponent must lie in (0, 1)"
        );
        assert!(resolution >= 64, "resolution must be at least 64");
        Self {
            exponent,
            resolution,
            dims: [1, 1],
        }
    }

    fn in_constraint(&self, y1: f64, y2: f64) -> bool {
        if !(-CONSTRAINT_TOL..=1.0 + CONSTRAINT_TOL).contains(&y1)
            || !(-CONSTRAINT_TOL..=1.0 + CONSTRAINT_TOL).contains(&y2)
        {
            return false;
        }
        y1.max(0.0).powf(self.exponent) + y2.max(0.0).powf(self.exponent) <= 1.0 + CONSTRAINT_TOL
    }

    /// Cut value `sum_i g_i(x, y'_i)` at `x = y` for a stored cut `y'`.
    fn cut_rhs(y: (f64, f64), y_prime: &[f64]) -> f64 {
        -2.0 * y_prime[0] * y.1 + y.0 * y_prime[1]
    }
}

/// Result of one 2-D grid minimization.
#[derive(Debug, Clone, Copy)]
pub struct GridOptimum {
    pub point: (f64, f64),
    /// Minimized value; for a lower-bounding solve this includes the `-w` term.
    pub value: f64,
    /// Epigraph value implied by the cuts at the optimum (0 when no cuts).
    pub w: f64,
}

/// Global grid minimization over the feasible subset of `[0, 1]^2`.
///
/// When `cuts` is nonempty the minimized function is
/// `objective(y) - min_cut (-2 y'_1 y_2 + y_1 y'_2)`, which eliminates the
/// epigraph variable of the lower-bounding problem analytically: the cut
/// bound is tight at any optimum of that problem. The full grid scan runs
/// at `resolution` steps per axis, then the neighborhood of the incumbent
/// is re-scanned [`REFINE_ROUNDS`] times at [`REFINE_FACTOR`]x resolution.
/// The incumbent only ever improves, and deterministically prefers the
/// lowest-index grid point on ties.
pub fn global_solve_2d<F, C>(
    objective: F,
    constraint: C,
    cuts: &CutSet,
    resolution: usize,
) -> Result<GridOptimum, GameError>
where
    F: Fn(f64, f64) -> f64,
    C: Fn(f64, f64) -> bool,
{
    let w_at = |y1: f64, y2: f64| -> f64 {
        cuts.points()
            .iter()
            .map(|p| PowerConstraintGame::cut_rhs((y1, y2), p))
            .fold(f64::INFINITY, f64::min)
    };
    let eval = |y1: f64, y2: f64| -> f64 {
        if cuts.is_empty() {
            objective(y1, y2)
        } else {
            objective(y1, y2) - w_at(y1, y2)
        }
    };

    let mut best: Option<((f64, f64), f64)> = None;
    let h = 1.0 / resolution as f64;
    for i in 0..=resolution {
        let y1 = i as f64 * h;
        for j in 0..=resolution {
            let y2 = j as f64 * h;
            if !constraint(y1, y2) {
                continue;
            }
            let v = eval(y1, y2);
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some(((y1, y2), v));
            }
        }
    }
    let (mut point, mut value) = best.ok_or(GameError::Infeasible)?;

    let mut span = h;
    for _ in 0..REFINE_ROUNDS {
        let step = span / REFINE_FACTOR as f64;
        let steps = 2 * REFINE_FACTOR;
        let x0 = (point.0 - span).max(0.0);
        let y0 = (point.1 - span).max(0.0);
        for i in 0..=steps {
            let y1 = (x0 + i as f64 * step).min(1.0);
            for j in 0..=steps {
                let y2 = (y0 + j as f64 * step).min(1.0);
                if !constraint(y1, y2) {
                    continue;
                }
                let v = eval(y1, y2);
                if v < value {
                    point = (y1, y2);
                    value = v;
                }
            }
        }
        span = step;
    }

    let w = if cuts.is_empty() {
        0.0
    } else {
        w_at(point.0, point.1)
    };
    Ok(GridOptimum { point, value, w })
}

fn grid_1d<F, C>(objective: F, constraint: C, resolution: usize) -> Result<(f64, f64), GameError>
where
    F: Fn(f64) -> f64,
    C: Fn(f64) -> bool,
{
    let mut best: Option<(f64, f64)> = None;
    let h = 1.0 / resolution as f64;
    for i in 0..=resolution {
        let t = i as f64 * h;
        if !constraint(t) {
            continue;
        }
        let v = objective(t);
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((t, v));
        }
    }
    let (mut point, mut value) = best.ok_or(GameError::Infeasible)?;
    let mut span = h;
    for _ in 0..REFINE_ROUNDS {
        let step = span / REFINE_FACTOR as f64;
        let lo = (point - span).max(0.0);
        for i in 0..=(2 * REFINE_FACTOR) {
            let t = (lo + i as f64 * step).min(1.0);
            if !constraint(t) {
                continue;
            }
            let v = objective(t);
            if v < value {
                point = t;
                value = v;
            }
        }
        span = step;
    }
    Ok((point, value))
}

impl NormalizedGame for PowerConstraintGame {
    fn num_players(&self) -> usize {
        2
    }

    fn player_dims(&self) -> &[usize] {
        &self.dims
    }

    fn player_objective(&self, player: usize, shared: &[f64], own: &[f64]) -> f64 {
        match player {
            0 => -2.0 * own[0] * shared[1],
            1 => shared[0] * own[0],
            _ => panic!("two-player game"),
        }
    }

    fn is_feasible(&self, point: &[f64]) -> bool {
        point.len() == 2 && self.in_constraint(point[0], point[1])
    }

    fn solve_joint(&self, _node_limit: u64) -> Result<Optimum, GameError> {
        let opt = global_solve_2d(
            |y1, y2| -y1 * y2,
            |y1, y2| self.in_constraint(y1, y2),
            &CutSet::new(),
            self.resolution,
        )?;
        Ok(Optimum {
            point: vec![opt.point.0, opt.point.1],
            value: opt.value,
            nodes: 0,
        })
    }

    fn solve_lower_bounding(
        &self,
        cuts: &CutSet,
        _node_limit: u64,
    ) -> Result<LowerBound, GameError> {
        let opt = global_solve_2d(
            |y1, y2| -y1 * y2,
            |y1, y2| self.in_constraint(y1, y2),
            cuts,
            self.resolution,
        )?;
        Ok(LowerBound {
            point: vec![opt.point.0, opt.point.1],
            w: opt.w,
            value: opt.value,
            nodes: 0,
        })
    }

    fn solve_lower_level(&self, shared: &[f64], _node_limit: u64) -> Result<Optimum, GameError> {
        let (x1, x2) = (shared[0], shared[1]);
        let opt = global_solve_2d(
            |y1, y2| -2.0 * y1 * x2 + x1 * y2,
            |y1, y2| self.in_constraint(y1, y2),
            &CutSet::new(),
            self.resolution,
        )?;
        Ok(Optimum {
            point: vec![opt.point.0, opt.point.1],
            value: opt.value,
            nodes: 0,
        })
    }

    fn solve_best_response(
        &self,
        player: usize,
        shared: &[f64],
        _node_limit: u64,
    ) -> Result<Optimum, GameError> {
        let (x1, x2) = (shared[0], shared[1]);
        let (point, value) = match player {
            0 => grid_1d(
                |y1| -2.0 * y1 * x2,
                |y1| self.in_constraint(y1, x2),
                self.resolution,
            )?,
            1 => grid_1d(
                |y2| x1 * y2,
                |y2| self.in_constraint(x1, y2),
                self.resolution,
            )?,
            _ => panic!("two-player game"),
        };
        Ok(Optimum {
            point: vec![point],
            value,
            nodes: 0,
        })
    }
}

/// Runs the cutting-plane loop on the default game, seeded with the joint
/// optimizer: one full iteration ending in the epsilon-gap test with a zero
/// upper bound at `y* = (1, 0)`.
pub fn run_example_trace() -> Result<SolveReport, SolveError> {
    run_example_trace_with(&SolverConfig::default(), DEFAULT_RESOLUTION)
}

pub fn run_example_trace_with(
    config: &SolverConfig,
    resolution: usize,
) -> Result<SolveReport, SolveError> {
    let game = PowerConstraintGame::new(0.5, resolution);
    let cuts = initialize_cuts_joint(&game, config.node_limit)?;
    solve_mnd(&game, cuts, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutting_plane::Termination;
    use crate::game::per_player_disequilibrium;

    const GRID_TOL: f64 = 2e-3;

    #[test]
    fn objectives_and_feasibility_at_reference_points() {
        let game = PowerConstraintGame::default();
        // g1 = -2 * 1 * 0 = 0 and g2 = 1 * 0 = 0 at the corner.
        assert_eq!(
            crate::game::aggregate_objective(&game, &[1.0, 0.0]).unwrap(),
            0.0
        );
        // sqrt(1/4) + sqrt(1/4) = 1 is on the boundary; (1, 1) is outside.
        assert!(game.is_feasible(&[0.25, 0.25]));
        assert!(!game.is_feasible(&[1.0, 1.0]));
    }

    #[test]
    fn joint_problem_optimum() {
        let game = PowerConstraintGame::default();
        let joint = game.solve_joint(0).unwrap();
        assert!((joint.point[0] - 0.25).abs() < GRID_TOL);
        assert!((joint.point[1] - 0.25).abs() < GRID_TOL);
        assert!((joint.value + 1.0 / 16.0).abs() < GRID_TOL);
    }

    #[test]
    fn lower_bounding_with_joint_cut() {
        let game = PowerConstraintGame::default();
        let cuts = CutSet::from_points(vec![vec![0.25, 0.25]]);
        let lb = game.solve_lower_bounding(&cuts, 0).unwrap();
        assert!((lb.point[0] - 1.0).abs() < GRID_TOL);
        assert!(lb.point[1].abs() < GRID_TOL);
        assert!((lb.w - 0.25).abs() < GRID_TOL);
        assert!((lb.value + 0.25).abs() < GRID_TOL);
    }

    #[test]
    fn lower_level_at_corner() {
        let game = PowerConstraintGame::default();
        let opt = game.solve_lower_level(&[1.0, 0.0], 0).unwrap();
        assert!(opt.value.abs() < GRID_TOL);
        assert!(opt.point[1].abs() < GRID_TOL);
    }

    #[test]
    fn example_trace_one_iteration() {
        let report = run_example_trace().unwrap();
        assert_eq!(report.status, Termination::ToleranceReached);
        assert_eq!(report.num_iterations(), 1);
        assert!(report.delta_upper <= 1e-6);
        assert!((report.point[0] - 1.0).abs() < GRID_TOL);
        assert!(report.point[1].abs() < GRID_TOL);
        let rec = &report.iterations[0];
        assert!((rec.w - 0.25).abs() < GRID_TOL);
        assert!((rec.delta_lower + 0.25).abs() < GRID_TOL);
        assert!(rec.g_lower_level.abs() < GRID_TOL);
    }

    #[test]
    fn tighter_epsilon_and_finer_grid_agree() {
        let config = SolverConfig {
            epsilon: 1e-9,
            ..SolverConfig::default()
        };
        let report = run_example_trace_with(&config, 2048).unwrap();
        assert!(report.status.converged());
        assert!((report.point[0] - 1.0).abs() < 1e-3);
        assert!(report.point[1].abs() < 1e-3);
        assert!(report.delta_upper <= 1e-6);
    }

    #[test]
    fn returned_points_satisfy_the_constraint() {
        let game = PowerConstraintGame::default();
        let report = run_example_trace().unwrap();
        assert!(game.is_feasible(&report.point));
        for rec in &report.iterations {
            assert!(game.is_feasible(&rec.point));
        }
    }

    #[test]
    fn result_passes_best_response_check() {
        let game = PowerConstraintGame::default();
        let report = run_example_trace().unwrap();
        let regrets = per_player_disequilibrium(&game, &report.point, 0).unwrap();
        for r in regrets {
            assert!(r.abs() <= 1e-6, "regret {r}");
        }
    }

    #[test]
    fn refinement_never_worsens() {
        let game = PowerConstraintGame::default();
        // Coarse vs fine resolution on the joint problem: finer never worse.
        let coarse = PowerConstraintGame::new(0.5, 64).solve_joint(0).unwrap();
        let fine = game.solve_joint(0).unwrap();
        assert!(fine.value <= coarse.value + 1e-12);
    }

    #[test]
    fn infeasible_scan_reports() {
        let r = global_solve_2d(|_, _| 0.0, |_, _| false, &CutSet::new(), 64);
        assert!(matches!(r, Err(GameError::Infeasible)));
    }
}
