//! Game model shared by every solver component.
//!
//! Games are stored in the jointly constrained encoding: all players share
//! one host set `Y`, and the parametric copy `x` of the joint decision is
//! implicit (`x = y`). A game exposes its objectives and feasibility test
//! plus global subproblem solves; how those solves happen (MILP engine,
//! grid search) is up to the implementor.

use thiserror::Error;

use crate::cutting_plane::CutSet;
use crate::milp::SolverError;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("node limit {limit} exhausted before the subproblem was solved to optimality")]
    NodeLimit { limit: u64 },
    #[error("enumeration budget exceeded: {binaries} binaries > {max}")]
    EnumerationBudget { binaries: usize, max: usize },
    #[error(transparent)]
    Engine(#[from] SolverError),
}

/// A globally solved subproblem: one optimizer and its value.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub point: Vec<f64>,
    pub value: f64,
    /// LP relaxations solved to certify global optimality (0 for grid solvers).
    pub nodes: u64,
}

/// Solution of the lower-bounding relaxation.
#[derive(Debug, Clone)]
pub struct LowerBound {
    /// Joint decision `y` (with `x = y` implied).
    pub point: Vec<f64>,
    /// Value of the epigraph variable bounded by the cuts.
    pub w: f64,
    /// Objective value `sum_i g_i(y, y_i) - w`; a lower bound on the
    /// minimum normalized disequilibrium.
    pub value: f64,
    pub nodes: u64,
}

/// A generalized game in the jointly constrained encoding, together with
/// global solvers for the subproblems the cutting-plane loop needs.
///
/// All methods must be pure: instances are immutable after construction and
/// safe to share across threads.
pub trait NormalizedGame: Sync {
    fn num_players(&self) -> usize;

    /// Per-player decision dimensions; the joint vector concatenates the
    /// blocks in player order.
    fn player_dims(&self) -> &[usize];

    fn total_dim(&self) -> usize {
        self.player_dims().iter().sum()
    }

    /// Player `i`'s objective `g_i(x, y_i)` where `shared` is the joint copy
    /// of everyone's decisions and `own` is the player's block.
    fn player_objective(&self, player: usize, shared: &[f64], own: &[f64]) -> f64;

    /// Membership in the host set `Y` (per-player plus shared constraints).
    fn is_feasible(&self, point: &[f64]) -> bool;

    /// Global optimum of the joint problem `min_y sum_i g_i(y, y_i)` over `Y`.
    fn solve_joint(&self, node_limit: u64) -> Result<Optimum, GameError>;

    /// Global optimum of the cut relaxation
    /// `min sum_i g_i(y, y_i) - w  s.t.  y in Y,  w <= sum_i g_i(y, y'_i)`
    /// for every cut point `y'`.
    fn solve_lower_bounding(&self, cuts: &CutSet, node_limit: u64)
        -> Result<LowerBound, GameError>;

    /// Global optimum of the lower-level problem
    /// `min_{y' in Y} sum_i g_i(x, y'_i)` at fixed `shared = x`.
    fn solve_lower_level(&self, shared: &[f64], node_limit: u64) -> Result<Optimum, GameError>;

    /// Global best response of one player at fixed `shared = x`: minimizes
    /// `g_i(x, y_i)` over the player's own block with everyone else pinned.
    /// The returned point is the player's block only.
    fn solve_best_response(
        &self,
        player: usize,
        shared: &[f64],
        node_limit: u64,
    ) -> Result<Optimum, GameError>;
}

/// Offset of player `i`'s block in the joint vector.
pub fn block_range(dims: &[usize], player: usize) -> std::ops::Range<usize> {
    let start: usize = dims[..player].iter().sum();
    start..start + dims[player]
}

fn check_dim<G: NormalizedGame + ?Sized>(game: &G, p: &[f64]) -> Result<(), GameError> {
    let expected = game.total_dim();
    if p.len() != expected {
        return Err(GameError::DimensionMismatch {
            expected,
            got: p.len(),
        });
    }
    Ok(())
}

/// `sum_i g_i(x, y_i)` evaluated at `x = y = p`.
pub fn aggregate_objective<G: NormalizedGame + ?Sized>(
    game: &G,
    p: &[f64],
) -> Result<f64, GameError> {
    check_dim(game, p)?;
    let dims = game.player_dims();
    let mut total = 0.0;
    for i in 0..game.num_players() {
        total += game.player_objective(i, p, &p[block_range(dims, i)]);
    }
    Ok(total)
}

/// Per-player regrets `g_i(x, y_i) - g_i^*(x)` at `x = y = p`, each
/// nonnegative up to the subsolver tolerance. A maximum entry at or below
/// the verification tolerance certifies `p` as a generalized Nash
/// equilibrium.
pub fn per_player_disequilibrium<G: NormalizedGame + ?Sized>(
    game: &G,
    p: &[f64],
    node_limit: u64,
) -> Result<Vec<f64>, GameError> {
    check_dim(game, p)?;
    let dims = game.player_dims();
    let mut regrets = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let own = &p[block_range(dims, i)];
        let current = game.player_objective(i, p, own);
        let best = game.solve_best_response(i, p, node_limit)?;
        regrets.push(current - best.value);
    }
    Ok(regrets)
}

/// Normalized disequilibrium `sum_i g_i(x, y_i) - g^N(x)` at `x = y = p`,
/// given the lower-level value `g_n` computed elsewhere. Nonnegative for
/// every feasible `p`.
pub fn normalized_disequilibrium<G: NormalizedGame + ?Sized>(
    game: &G,
    p: &[f64],
    g_n: f64,
) -> Result<f64, GameError> {
    Ok(aggregate_objective(game, p)? - g_n)
}

/// Aggregation rule turning per-player regrets into one disequilibrium
/// number. Both variants are zero exactly when every component is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisequilibriumMeasure {
    Sum,
    Max,
}

impl DisequilibriumMeasure {
    pub fn apply(&self, v: &[f64]) -> f64 {
        match self {
            DisequilibriumMeasure::Sum => v.iter().sum(),
            DisequilibriumMeasure::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn block_ranges_partition_the_joint_vector() {
        let dims = [2usize, 3, 1];
        assert_eq!(block_range(&dims, 0), 0..2);
        assert_eq!(block_range(&dims, 1), 2..5);
        assert_eq!(block_range(&dims, 2), 5..6);
    }

    #[test]
    fn measure_on_empty_max_is_neg_infinity() {
        // Degenerate zero-player case; Sum gives 0.
        assert_eq!(DisequilibriumMeasure::Sum.apply(&[]), 0.0);
        assert_eq!(DisequilibriumMeasure::Max.apply(&[]), f64::NEG_INFINITY);
    }

    proptest! {
        // Zero exactly at the all-zero vector, nonnegative elsewhere on
        // nonnegative inputs -- for both variants.
        #[test]
        fn measure_axioms(v in proptest::collection::vec(0.0f64..1e6, 1..8)) {
            for m in [DisequilibriumMeasure::Sum, DisequilibriumMeasure::Max] {
                let val = m.apply(&v);
                prop_assert!(val >= 0.0);
                if v.iter().all(|&x| x == 0.0) {
                    prop_assert_eq!(val, 0.0);
                } else {
                    prop_assert!(val > 0.0);
                }
            }
        }

        #[test]
        fn measures_detect_any_positive_entry(
            v in proptest::collection::vec(0.0f64..10.0, 1..8),
            idx in 0usize..8,
            bump in 1e-9f64..5.0,
        ) {
            let mut v = v;
            let idx = idx % v.len();
            v[idx] += bump;
            for m in [DisequilibriumMeasure::Sum, DisequilibriumMeasure::Max] {
                prop_assert!(m.apply(&v) > 0.0);
            }
        }
    }
}
