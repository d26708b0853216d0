//! equicut: normalized Nash equilibria of nonconvex generalized games.
//!
//! A cutting-plane loop drives the minimum normalized disequilibrium of a
//! jointly constrained game to zero (or certifies how far from equilibrium
//! the game is), using globally solved subproblems: a lower-bounding
//! relaxation over a growing cut set and the lower-level best-joint-response
//! problem. Everything is self-contained -- subproblems run on the built-in
//! simplex/branch-and-bound engine in [`milp`] or, for the continuous
//! two-player example, on an exhaustive grid solver.
//!
//! - [`game`]: the game abstraction, feasibility and disequilibrium measures
//! - [`milp`]: bounded-variable simplex and 0-1 branch-and-bound
//! - [`cutting_plane`]: the solver loop, cut management, reports
//! - [`knapsack`]: the Nash-Cournot knapsack family, instance generator,
//!   MILP encodings, brute-force oracle and equilibrium verification
//! - [`continuous`]: the two-player power-constraint game and grid solver
//! - [`kkt`]: the complementarity reformulation and its failure witness
//! - [`batch`]: seeded experiment batches, CSV/JSON/histogram outputs

pub mod batch;
pub mod continuous;
pub mod cutting_plane;
pub mod game;
pub mod kkt;
pub mod knapsack;
pub mod milp;

pub use cutting_plane::{
    initialize_cuts_joint, solve_mnd, solve_mnd_with_observer, CutSet, SolveReport, SolverConfig,
    Termination,
};
pub use game::{
    aggregate_objective, normalized_disequilibrium, per_player_disequilibrium,
    DisequilibriumMeasure, GameError, NormalizedGame,
};
pub use knapsack::{generate_instance, GeneratorConfig, KnapsackGame, KnapsackGameInstance};
