//! Cutting-plane solver for minimum normalized disequilibrium.
//!
//! The loop alternates two global subproblems: a lower-bounding relaxation
//! whose epigraph variable `w` is constrained by one linear cut per known
//! lower-level point, and the lower-level problem itself, which evaluates
//! the best joint response `g^N(x)` at the relaxation's iterate. When the
//! relaxation's `w` is already dominated by `g^N(x)` the iterate is an
//! exact normalized equilibrium; otherwise the fresh lower-level point is
//! appended as a cut, the incumbent upper bound is refreshed, and the loop
//! stops once the gap `delta_U - max(delta_L, 0)` falls below epsilon.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::game::{aggregate_objective, GameError, NormalizedGame};

/// Slack absorbed by the `w <= g^N(x)` test; both sides come from subsolves
/// with an absolute gap of 1e-6, so an exact comparison would spuriously
/// fail.
pub const EQUILIBRIUM_TEST_TOL: f64 = 1e-7;

/// Coordinates closer than this are treated as the same cut point.
const CUT_DEDUP_TOL: f64 = 1e-9;

/// Finite set of lower-level points generating cuts, deduplicated and in
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct CutSet {
    points: Vec<Vec<f64>>,
}

impl CutSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        let mut set = Self::new();
        for p in points {
            set.push(p);
        }
        set
    }

    /// Appends a point unless an equal one is already present. Returns
    /// whether the point was inserted.
    pub fn push(&mut self, point: Vec<f64>) -> bool {
        if self.contains(&point) {
            return false;
        }
        self.points.push(point);
        true
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.points.iter().any(|p| {
            p.len() == point.len()
                && p.iter()
                    .zip(point)
                    .all(|(a, b)| (a - b).abs() <= CUT_DEDUP_TOL)
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Termination tolerance on `delta_U - max(delta_L, 0)`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Node budget handed to each subproblem solve.
    pub node_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iterations: 100,
            node_limit: 10_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(SolveError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The `w <= g^N(x)` test passed: the returned point is an exact
    /// normalized equilibrium up to subsolver tolerance.
    EquilibriumFound,
    /// The epsilon-gap test passed; the returned point carries the best
    /// upper bound seen.
    ToleranceReached,
    IterationLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EquilibriumFound => "equilibrium_found",
            Termination::ToleranceReached => "tolerance_reached",
            Termination::IterationLimit => "iteration_limit",
        }
    }

    /// Whether the run certified a point within the configured tolerance.
    pub fn converged(&self) -> bool {
        !matches!(self, Termination::IterationLimit)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the iteration trace.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    /// 1-based major iteration.
    pub iteration: usize,
    /// Lower-bounding iterate `y` (with `x = y`).
    pub point: Vec<f64>,
    pub w: f64,
    pub delta_lower: f64,
    /// Lower-level value `g^N(x)` at the iterate.
    pub g_lower_level: f64,
    /// Incumbent upper bound after this iteration.
    pub delta_upper: f64,
    /// Cut count after any append this iteration.
    pub cut_count: usize,
    pub wall_time_s: f64,
    pub lbp_nodes: u64,
    pub llp_nodes: u64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: Termination,
    /// Final joint decision `y*` (`x* = y*`).
    pub point: Vec<f64>,
    /// `w` from the final lower-bounding solve.
    pub final_w: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub iterations: Vec<IterationRecord>,
    /// On [`Termination::EquilibriumFound`] the loop returns before the
    /// upper-bound update, so the reported `delta_upper` is computed after
    /// the fact from the same iterate; this flags that.
    pub delta_upper_post_hoc: bool,
}

impl SolveReport {
    pub fn num_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn delta_lower_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.delta_lower).collect()
    }

    pub fn delta_upper_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.delta_upper).collect()
    }

    /// Trace as line-delimited JSON records.
    pub fn trace_lines(&self) -> String {
        let mut out = String::new();
        for rec in &self.iterations {
            out.push_str(&serde_json::to_string(rec).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("the initial cut set must not be empty")]
    EmptyCutSet,
    #[error("initial cut {index} is not feasible in the host set")]
    InfeasibleCut { index: usize },
    #[error("iteration {iteration}: {source}")]
    Subproblem { iteration: usize, source: GameError },
    #[error(
        "iteration {iteration}: lower-level point duplicates an existing cut while w > g^N(x); \
         subsolver tolerances are inconsistent"
    )]
    DuplicateCut { iteration: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Seeds the cut set with one global optimizer of the joint problem.
pub fn initialize_cuts_joint<G: NormalizedGame + ?Sized>(
    game: &G,
    node_limit: u64,
) -> Result<CutSet, GameError> {
    let joint = game.solve_joint(node_limit)?;
    Ok(CutSet::from_points(vec![joint.point]))
}

/// Runs the cutting-plane loop to an epsilon-optimal minimum normalized
/// disequilibrium point.
pub fn solve_mnd<G: NormalizedGame + ?Sized>(
    game: &G,
    cuts: CutSet,
    config: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    solve_mnd_with_observer(game, cuts, config, |_| {})
}

/// Same as [`solve_mnd`] but streams each [`IterationRecord`] to the
/// observer as it is produced.
pub fn solve_mnd_with_observer<G, F>(
    game: &G,
    mut cuts: CutSet,
    config: &SolverConfig,
    mut observer: F,
) -> Result<SolveReport, SolveError>
where
    G: NormalizedGame + ?Sized,
    F: FnMut(&IterationRecord),
{
    config.validate()?;
    if cuts.is_empty() {
        return Err(SolveError::EmptyCutSet);
    }
    for (index, p) in cuts.points().iter().enumerate() {
        if !game.is_feasible(p) {
            return Err(SolveError::InfeasibleCut { index });
        }
    }

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut delta_upper = f64::INFINITY;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut last_w = f64::NAN;
    let mut last_delta_lower = f64::NEG_INFINITY;

    for iteration in 1..=config.max_iterations {
        let started = Instant::now();
        let ctx = |source: GameError| SolveError::Subproblem { iteration, source };

        let lbp = game
            .solve_lower_bounding(&cuts, config.node_limit)
            .map_err(ctx)?;
        let delta_lower = lbp.value;
        last_w = lbp.w;
        last_delta_lower = delta_lower;

        let llp = game
            .solve_lower_level(&lbp.point, config.node_limit)
            .map_err(ctx)?;
        let g_n = llp.value;
        let aggregate = aggregate_objective(game, &lbp.point).map_err(ctx)?;
        let candidate = aggregate - g_n;

        if lbp.w <= g_n + EQUILIBRIUM_TEST_TOL {
            // Exact equilibrium certified before any upper-bound update; the
            // reported delta_U is computed post hoc from this same point.
            let record = IterationRecord {
                iteration,
                point: lbp.point.clone(),
                w: lbp.w,
                delta_lower,
                g_lower_level: g_n,
                delta_upper: candidate,
                cut_count: cuts.len(),
                wall_time_s: started.elapsed().as_secs_f64(),
                lbp_nodes: lbp.nodes,
                llp_nodes: llp.nodes,
            };
            observer(&record);
            records.push(record);
            return Ok(SolveReport {
                status: Termination::EquilibriumFound,
                point: lbp.point,
                final_w: lbp.w,
                delta_lower,
                delta_upper: candidate,
                iterations: records,
                delta_upper_post_hoc: true,
            });
        }

        if !cuts.push(llp.point.clone()) {
            return Err(SolveError::DuplicateCut { iteration });
        }

        if candidate < delta_upper {
            delta_upper = candidate;
            incumbent = Some(lbp.point.clone());
        }

        let record = IterationRecord {
            iteration,
            point: lbp.point,
            w: lbp.w,
            delta_lower,
            g_lower_level: g_n,
            delta_upper,
            cut_count: cuts.len(),
            wall_time_s: started.elapsed().as_secs_f64(),
            lbp_nodes: lbp.nodes,
            llp_nodes: llp.nodes,
        };
        observer(&record);
        records.push(record);

        if delta_upper - delta_lower.max(0.0) < config.epsilon {
            let point = incumbent.expect("upper bound was updated at least once");
            return Ok(SolveReport {
                status: Termination::ToleranceReached,
                point,
                final_w: last_w,
                delta_lower: last_delta_lower,
                delta_upper,
                iterations: records,
                delta_upper_post_hoc: false,
            });
        }
    }

    let point = incumbent.expect("max_iterations >= 1 guarantees an incumbent");
    Ok(SolveReport {
        status: Termination::IterationLimit,
        point,
        final_w: last_w,
        delta_lower: last_delta_lower,
        delta_upper,
        iterations: records,
        delta_upper_post_hoc: false,
    })
}
