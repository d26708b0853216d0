//! Discretely constrained Nash-Cournot knapsack games.
//!
//! Each of `|J|` players picks a 0/1 participation vector over `|L|`
//! markets. Market `l` has a linear inverse demand `alpha_l - beta_l * q`
//! in the total participation `q`; player `j` pays `c_jl` to enter market
//! `l`, consumes `a_jl` of a private budget `b_j`, and `d_jl` of a shared
//! per-market cap `e_l`. All parameters are integers, so every objective
//! and bound in this module is exact in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutting_plane::CutSet;
use crate::game::{GameError, LowerBound, NormalizedGame, Optimum};
use crate::milp::{
    solve_mip, Constraint, LinearProgram, MipSolution, MipStatus, MixedIntegerProgram, Sense,
    INTEGRALITY_TOL,
};

/// Parameter scale of the random-instance protocol.
pub const DEFAULT_GAMMA: i64 = 1_000;
/// Brute-force enumeration refuses instances with more binaries than this.
pub const BRUTE_FORCE_MAX_BINARIES: usize = 16;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// One game instance. Arrays indexed `[player][market]` are row-major by
/// player, matching the JSON schema
/// `{players, markets, alpha[], beta[], c[][], a[][], b[], d[][], e[], seed, gamma}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnapsackGameInstance {
    pub players: usize,
    pub markets: usize,
    /// Inverse-demand intercept per market, in `[1, players * gamma]`.
    pub alpha: Vec<i64>,
    /// Inverse-demand slope per market, in `[1, gamma]`.
    pub beta: Vec<i64>,
    /// Participation cost per (player, market).
    pub c: Vec<Vec<i64>>,
    /// Private resource consumption per (player, market).
    pub a: Vec<Vec<i64>>,
    /// Private budget per player, at least `max_l a[j][l]`.
    pub b: Vec<i64>,
    /// Shared resource consumption per (player, market).
    pub d: Vec<Vec<i64>>,
    /// Shared cap per market, at least `max_j d[j][l]`.
    pub e: Vec<i64>,
    pub seed: u64,
    pub gamma: i64,
}

/// Configuration of the random-instance generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub players: usize,
    pub markets: usize,
    pub gamma: i64,
}

impl GeneratorConfig {
    pub fn new(seed: u64, players: usize, markets: usize) -> Self {
        Self {
            seed,
            players,
            markets,
            gamma: DEFAULT_GAMMA,
        }
    }
}

/// Draws one instance. Deterministic in the seed: parameters come from a
/// ChaCha8 stream (seeded via rand's SplitMix64-based `seed_from_u64`) in
/// the fixed order alpha per market, beta per market, then the `c`, `a`,
/// `d` matrices row-major by player; `b` and `e` are the row maxima of `a`
/// and the column maxima of `d`.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<KnapsackGameInstance, InstanceError> {
    if cfg.players == 0 || cfg.markets == 0 || cfg.gamma < 1 {
        return Err(InstanceError::Invalid(
            "players, markets and gamma must all be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (nj, nl, g) = (cfg.players, cfg.markets, cfg.gamma);
    let randint = |rng: &mut ChaCha8Rng, hi: i64| rng.random_range(1..=hi);

    let alpha: Vec<i64> = (0..nl).map(|_| randint(&mut rng, nj as i64 * g)).collect();
    let beta: Vec<i64> = (0..nl).map(|_| randint(&mut rng, g)).collect();
    let c: Vec<Vec<i64>> = (0..nj)
        .map(|_| (0..nl).map(|_| randint(&mut rng, g)).collect())
        .collect();
    let a: Vec<Vec<i64>> = (0..nj)
        .map(|_| (0..nl).map(|_| randint(&mut rng, g)).collect())
        .collect();
    let b: Vec<i64> = a
        .iter()
        .map(|row| *row.iter().max().expect("markets >= 1"))
        .collect();
    let d: Vec<Vec<i64>> = (0..nj)
        .map(|_| (0..nl).map(|_| randint(&mut rng, g)).collect())
        .collect();
    let e: Vec<i64> = (0..nl)
        .map(|l| (0..nj).map(|j| d[j][l]).max().expect("players >= 1"))
        .collect();

    let inst = KnapsackGameInstance {
        players: nj,
        markets: nl,
        alpha,
        beta,
        c,
        a,
        b,
        d,
        e,
        seed: cfg.seed,
        gamma: g,
    };
    inst.validate()?;
    Ok(inst)
}

impl KnapsackGameInstance {
    pub fn num_binaries(&self) -> usize {
        self.players * self.markets
    }

    /// Index of `y[j][l]` in the flat joint decision vector.
    pub fn var(&self, j: usize, l: usize) -> usize {
        j * self.markets + l
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let err = |msg: String| Err(InstanceError::Invalid(msg));
        let (nj, nl) = (self.players, self.markets);
        if nj == 0 || nl == 0 {
            return err("players and markets must be positive".into());
        }
        if self.gamma < 1 {
            return err("gamma must be at least 1".into());
        }
        if self.alpha.len() != nl || self.beta.len() != nl || self.e.len() != nl {
            return err("alpha, beta and e must have one entry per market".into());
        }
        if self.b.len() != nj {
            return err("b must have one entry per player".into());
        }
        for (name, m) in [("c", &self.c), ("a", &self.a), ("d", &self.d)] {
            if m.len() != nj || m.iter().any(|row| row.len() != nl) {
                return err(format!("{name} must be a players x markets matrix"));
            }
            if m.iter().flatten().any(|&v| v < 1 || v > self.gamma) {
                return err(format!("{name} entries must lie in [1, gamma]"));
            }
        }
        for (l, &al) in self.alpha.iter().enumerate() {
            if al < 1 || al > nj as i64 * self.gamma {
                return err(format!("alpha[{l}] must lie in [1, players * gamma]"));
            }
        }
        if self.beta.iter().any(|&v| v < 1 || v > self.gamma) {
            return err("beta entries must lie in [1, gamma]".into());
        }
        for j in 0..nj {
            let max_a = *self.a[j].iter().max().expect("markets >= 1");
            if self.b[j] < max_a {
                return err(format!(
                    "b[{j}] = {} is below max_l a[{j}][l] = {max_a}; player {j} cannot enter every market",
                    self.b[j]
                ));
            }
        }
        for l in 0..nl {
            let max_d = (0..nj).map(|j| self.d[j][l]).max().expect("players >= 1");
            if self.e[l] < max_d {
                return err(format!(
                    "e[{l}] = {} is below max_j d[j][{l}] = {max_d}; some player cannot enter market {l}",
                    self.e[l]
                ));
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceParseError> {
        let inst: KnapsackGameInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Player `j`'s cost at the 0/1 profile `y`, own participation included
    /// in each market total. Exact integer arithmetic.
    pub fn player_value_bits(&self, y: &[u8], j: usize) -> i64 {
        let mut total = 0i64;
        for l in 0..self.markets {
            if y[self.var(j, l)] == 1 {
                let q: i64 = (0..self.players).map(|i| y[self.var(i, l)] as i64).sum();
                total += self.c[j][l] - self.alpha[l] + self.beta[l] * q;
            }
        }
        total
    }

    /// `sum_j` of [`Self::player_value_bits`]; the joint objective.
    pub fn aggregate_bits(&self, y: &[u8]) -> i64 {
        (0..self.players)
            .map(|j| self.player_value_bits(y, j))
            .sum()
    }

    /// `sum_j f_j(y_{-j}, y'_j)`: every player deviates to their block of
    /// `y_prime` while the coupling stays at `y`. This is the exact value a
    /// cut generated from `y_prime` enforces on `w` at the point `y`.
    pub fn cross_value_bits(&self, y: &[u8], y_prime: &[u8]) -> i64 {
        let mut total = 0i64;
        for j in 0..self.players {
            for l in 0..self.markets {
                if y_prime[self.var(j, l)] == 1 {
                    let others: i64 = (0..self.players)
                        .filter(|&i| i != j)
                        .map(|i| y[self.var(i, l)] as i64)
                        .sum();
                    total += self.c[j][l] - self.alpha[l] + self.beta[l] * (1 + others);
                }
            }
        }
        total
    }

    pub fn feasible_bits(&self, y: &[u8]) -> bool {
        for j in 0..self.players {
            let used: i64 = (0..self.markets)
                .map(|l| self.a[j][l] * y[self.var(j, l)] as i64)
                .sum();
            if used > self.b[j] {
                return false;
            }
        }
        for l in 0..self.markets {
            let used: i64 = (0..self.players)
                .map(|j| self.d[j][l] * y[self.var(j, l)] as i64)
                .sum();
            if used > self.e[l] {
                return false;
            }
        }
        true
    }

    /// All feasible 0/1 profiles in mask order (low player/market indices in
    /// the low bits). Refuses instances beyond [`BRUTE_FORCE_MAX_BINARIES`].
    pub fn enumerate_feasible(&self) -> Result<Vec<Vec<u8>>, GameError> {
        let n = self.num_binaries();
        if n > BRUTE_FORCE_MAX_BINARIES {
            return Err(GameError::EnumerationBudget {
                binaries: n,
                max: BRUTE_FORCE_MAX_BINARIES,
            });
        }
        let mut out = Vec::new();
        for mask in 0u32..(1u32 << n) {
            let y: Vec<u8> = (0..n).map(|v| ((mask >> v) & 1) as u8).collect();
            if self.feasible_bits(&y) {
                out.push(y);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Error)]
pub enum InstanceParseError {
    #[error("instance JSON is malformed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

/// Largest number of the `weights` that fit into `capacity` together:
/// the ascending-prefix packing is cardinality-maximal.
fn max_packing(weights: impl Iterator<Item = i64>, capacity: i64) -> usize {
    let mut w: Vec<i64> = weights.collect();
    w.sort_unstable();
    let mut used = 0i64;
    let mut count = 0;
    for v in w {
        if used + v > capacity {
            break;
        }
        used += v;
        count += 1;
    }
    count
}

/// Per-market bound on how many players can participate at once, implied
/// by the shared capacity row.
fn market_cardinality(inst: &KnapsackGameInstance, l: usize) -> usize {
    max_packing((0..inst.players).map(|j| inst.d[j][l]), inst.e[l])
}

/// Per-player bound on how many markets the budget admits at once.
fn player_cardinality(inst: &KnapsackGameInstance, j: usize) -> usize {
    max_packing(inst.a[j].iter().copied(), inst.b[j])
}

/// Appends rows implied by the budget and shared-cap data: cardinality
/// bounds (at most `max_packing` ones per row) and conflict cliques (items
/// heavier than half a capacity are pairwise exclusive). All are satisfied
/// by every 0/1 feasible point and tighten the LP relaxation, which
/// otherwise spreads fractional participation far beyond any integral
/// packing.
fn push_tightening_rows(
    inst: &KnapsackGameInstance,
    lp: &mut LinearProgram,
    var: impl Fn(usize, usize) -> usize,
) {
    let (nj, nl) = (inst.players, inst.markets);
    for j in 0..nj {
        let cap = player_cardinality(inst, j);
        if cap < nl {
            let coeffs = (0..nl).map(|l| (var(j, l), 1.0)).collect();
            lp.constraints
                .push(Constraint::new(coeffs, Sense::Le, cap as f64));
        }
        let clique: Vec<usize> = (0..nl).filter(|&l| 2 * inst.a[j][l] > inst.b[j]).collect();
        if clique.len() >= 2 {
            let coeffs = clique.iter().map(|&l| (var(j, l), 1.0)).collect();
            lp.constraints.push(Constraint::new(coeffs, Sense::Le, 1.0));
        }
    }
    for l in 0..nl {
        let cap = market_cardinality(inst, l);
        if cap < nj {
            let coeffs = (0..nj).map(|j| (var(j, l), 1.0)).collect();
            lp.constraints
                .push(Constraint::new(coeffs, Sense::Le, cap as f64));
        }
        let clique: Vec<usize> = (0..nj).filter(|&j| 2 * inst.d[j][l] > inst.e[l]).collect();
        if clique.len() >= 2 {
            let coeffs = clique.iter().map(|&j| (var(j, l), 1.0)).collect();
            lp.constraints.push(Constraint::new(coeffs, Sense::Le, 1.0));
        }
    }
}

fn snap_bits(point: &[f64]) -> Vec<u8> {
    point.iter().map(|&v| u8::from(v >= 0.5)).collect()
}

fn bits_to_point(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| b as f64).collect()
}

// ---------------------------------------------------------------------------
// MILP encodings
// ---------------------------------------------------------------------------

/// Index of the epigraph variable `w` in the lower-bounding program.
pub fn lbp_w_index(inst: &KnapsackGameInstance) -> usize {
    2 * inst.num_binaries() + inst.markets
}

/// Shared core of the joint problem and the lower-bounding problem:
/// variables `y[j][l]` (binaries), unit-step binaries `u[l][k]` and
/// continuous totals `z[l]`, with the convex quadratic `beta_l * z_l^2`
/// written exactly on integers as `beta_l * sum_k (2k - 1) u[l][k]` under
/// the ordering `u[l][k] >= u[l][k+1]`.
///
/// Layout: `y` at `j * markets + l`, then `u` at `ny + l * players + k`,
/// then `z` at `2 * ny + l`, then (LBP only) `w` last.
fn build_quadratic_core(inst: &KnapsackGameInstance, with_w: bool) -> MixedIntegerProgram {
    let (nj, nl) = (inst.players, inst.markets);
    let ny = inst.num_binaries();
    let u_off = ny;
    let z_off = 2 * ny;
    let num_vars = 2 * ny + nl + usize::from(with_w);

    let mut lp = LinearProgram::new(num_vars);
    for j in 0..nj {
        for l in 0..nl {
            lp.upper[inst.var(j, l)] = 1.0;
            lp.objective[inst.var(j, l)] = inst.c[j][l] as f64;
        }
    }
    for l in 0..nl {
        let cap = market_cardinality(inst, l);
        for k in 0..nj {
            let u = u_off + l * nj + k;
            lp.upper[u] = if k < cap { 1.0 } else { 0.0 };
            lp.objective[u] = (inst.beta[l] * (2 * k as i64 + 1)) as f64;
        }
        let z = z_off + l;
        lp.upper[z] = cap as f64;
        lp.objective[z] = -(inst.alpha[l] as f64);
    }
    if with_w {
        let w = num_vars - 1;
        lp.lower[w] = f64::NEG_INFINITY;
        lp.upper[w] = f64::INFINITY;
        lp.objective[w] = -1.0;
    }

    for j in 0..nj {
        let coeffs = (0..nl)
            .map(|l| (inst.var(j, l), inst.a[j][l] as f64))
            .collect();
        lp.constraints
            .push(Constraint::new(coeffs, Sense::Le, inst.b[j] as f64));
    }
    for l in 0..nl {
        let coeffs = (0..nj)
            .map(|j| (inst.var(j, l), inst.d[j][l] as f64))
            .collect();
        lp.constraints
            .push(Constraint::new(coeffs, Sense::Le, inst.e[l] as f64));
    }
    for l in 0..nl {
        let mut coeffs: Vec<(usize, f64)> = (0..nj).map(|j| (inst.var(j, l), 1.0)).collect();
        coeffs.push((z_off + l, -1.0));
        lp.constraints.push(Constraint::new(coeffs, Sense::Eq, 0.0));
    }
    for l in 0..nl {
        let mut coeffs: Vec<(usize, f64)> = (0..nj).map(|k| (u_off + l * nj + k, 1.0)).collect();
        coeffs.push((z_off + l, -1.0));
        lp.constraints.push(Constraint::new(coeffs, Sense::Eq, 0.0));
    }
    for l in 0..nl {
        for k in 0..nj.saturating_sub(1) {
            let coeffs = vec![(u_off + l * nj + k, 1.0), (u_off + l * nj + k + 1, -1.0)];
            lp.constraints.push(Constraint::new(coeffs, Sense::Ge, 0.0));
        }
    }
    push_tightening_rows(inst, &mut lp, |j, l| inst.var(j, l));

    // The u variables stay continuous in [0, 1]: at any point with
    // integral y the strictly increasing step costs force them onto the
    // integral staircase anyway, and declaring them binary only adds
    // useless branching candidates.
    MixedIntegerProgram {
        lp,
        binaries: (0..ny).collect(),
        objective_integral: true,
    }
}

/// The joint problem `min_y sum_j f_j(y)` over the host set, as a MILP.
pub fn build_joint(inst: &KnapsackGameInstance) -> MixedIntegerProgram {
    build_quadratic_core(inst, false)
}

/// The lower-bounding problem: the joint core plus the epigraph variable
/// `w` (objective `-w`) and one linear cut per member of the cut set.
///
/// A cut from `y'` enforces
/// `w <= sum_{j,l} (c_jl - alpha_l + beta_l) y'_jl + beta_l y'_jl sum_{i != j} y_il`,
/// using `y'^2 = y'` on binaries; the quadratic coupling term is linear in
/// the decision `y`.
pub fn build_lbp(inst: &KnapsackGameInstance, cuts: &CutSet) -> MixedIntegerProgram {
    let mut mip = build_quadratic_core(inst, true);
    let (nj, nl) = (inst.players, inst.markets);
    let w = lbp_w_index(inst);
    for cut in cuts.points() {
        let yp = snap_bits(cut);
        let mut constant = 0i64;
        for j in 0..nj {
            for l in 0..nl {
                if yp[inst.var(j, l)] == 1 {
                    constant += inst.c[j][l] - inst.alpha[l] + inst.beta[l];
                }
            }
        }
        let mut coeffs: Vec<(usize, f64)> = vec![(w, 1.0)];
        for i in 0..nj {
            for l in 0..nl {
                let others: i64 = (0..nj)
                    .filter(|&j| j != i)
                    .map(|j| yp[inst.var(j, l)] as i64)
                    .sum();
                if others != 0 {
                    coeffs.push((inst.var(i, l), -(inst.beta[l] * others) as f64));
                }
            }
        }
        mip.lp
            .constraints
            .push(Constraint::new(coeffs, Sense::Le, constant as f64));
    }
    mip
}

/// The lower-level problem at coupling `y`: a pure 0-1 program over `y'`
/// with objective coefficient `c_jl - alpha_l + beta_l + beta_l * sum_{i != j} y_il`
/// on `y'_jl`, under the same budget and shared rows.
pub fn build_llp(inst: &KnapsackGameInstance, y: &[f64]) -> MixedIntegerProgram {
    let bits = snap_bits(y);
    let (nj, nl) = (inst.players, inst.markets);
    let ny = inst.num_binaries();
    let mut lp = LinearProgram::new(ny);
    for j in 0..nj {
        for l in 0..nl {
            let others: i64 = (0..nj)
                .filter(|&i| i != j)
                .map(|i| bits[inst.var(i, l)] as i64)
                .sum();
            let v = inst.var(j, l);
            lp.upper[v] = 1.0;
            lp.objective[v] =
                (inst.c[j][l] - inst.alpha[l] + inst.beta[l] + inst.beta[l] * others) as f64;
        }
    }
    for j in 0..nj {
        let coeffs = (0..nl)
            .map(|l| (inst.var(j, l), inst.a[j][l] as f64))
            .collect();
        lp.constraints
            .push(Constraint::new(coeffs, Sense::Le, inst.b[j] as f64));
    }
    for l in 0..nl {
        let coeffs = (0..nj)
            .map(|j| (inst.var(j, l), inst.d[j][l] as f64))
            .collect();
        lp.constraints
            .push(Constraint::new(coeffs, Sense::Le, inst.e[l] as f64));
    }
    push_tightening_rows(inst, &mut lp, |j, l| inst.var(j, l));
    MixedIntegerProgram {
        lp,
        binaries: (0..ny).collect(),
        objective_integral: true,
    }
}

/// Best-response 0-1 program of `player` with everyone else pinned at `y`:
/// the player's budget row plus the residual shared capacity per market.
pub fn build_best_response(
    inst: &KnapsackGameInstance,
    player: usize,
    y: &[f64],
) -> MixedIntegerProgram {
    let bits = snap_bits(y);
    let (nj, nl) = (inst.players, inst.markets);
    let mut lp = LinearProgram::new(nl);
    for l in 0..nl {
        let others: i64 = (0..nj)
            .filter(|&i| i != player)
            .map(|i| bits[inst.var(i, l)] as i64)
            .sum();
        lp.upper[l] = 1.0;
        lp.objective[l] =
            (inst.c[player][l] - inst.alpha[l] + inst.beta[l] + inst.beta[l] * others) as f64;
    }
    let coeffs = (0..nl).map(|l| (l, inst.a[player][l] as f64)).collect();
    lp.constraints
        .push(Constraint::new(coeffs, Sense::Le, inst.b[player] as f64));
    for l in 0..nl {
        let used_by_others: i64 = (0..nj)
            .filter(|&i| i != player)
            .map(|i| inst.d[i][l] * bits[inst.var(i, l)] as i64)
            .sum();
        lp.constraints.push(Constraint::new(
            vec![(l, inst.d[player][l] as f64)],
            Sense::Le,
            (inst.e[l] - used_by_others) as f64,
        ));
    }
    MixedIntegerProgram {
        lp,
        binaries: (0..nl).collect(),
        objective_integral: true,
    }
}

/// Builds the full variable vector of the lower-bounding program for a 0/1
/// participation profile: staircase `u`, exact totals `z`, and `w = 0`.
/// Intended for objective-equivalence checks and debugging.
pub fn lbp_point_for_assignment(inst: &KnapsackGameInstance, y: &[u8]) -> Vec<f64> {
    let (nj, nl) = (inst.players, inst.markets);
    let ny = inst.num_binaries();
    let mut point = vec![0.0; 2 * ny + nl + 1];
    for (v, &bit) in y.iter().enumerate() {
        point[v] = bit as f64;
    }
    for l in 0..nl {
        let t: usize = (0..nj).map(|j| y[inst.var(j, l)] as usize).sum();
        for k in 0..t {
            point[ny + l * nj + k] = 1.0;
        }
        point[2 * ny + l] = t as f64;
    }
    point
}

// ---------------------------------------------------------------------------
// Oracles and verification
// ---------------------------------------------------------------------------

/// Exact minimum normalized disequilibrium by double enumeration:
/// `min_{y in Y} [sum_j f_j(y) - min_{y' in Y} sum_j f_j(y_{-j}, y'_j)]`.
///
/// The inner minimum depends on `y` only through the coupling profile
/// `(sum_{i != j} y_il)_{jl}`, so it is cached per profile.
pub fn brute_force_mnd(inst: &KnapsackGameInstance) -> Result<(f64, Vec<f64>), GameError> {
    let feasible = inst.enumerate_feasible()?;
    if feasible.is_empty() {
        return Err(GameError::Infeasible);
    }
    let mut cache: std::collections::HashMap<Vec<i64>, i64> = std::collections::HashMap::new();
    let mut best: Option<(i64, &Vec<u8>)> = None;
    for y in &feasible {
        let profile: Vec<i64> = (0..inst.players)
            .flat_map(|j| {
                (0..inst.markets).map(move |l| {
                    (0..inst.players)
                        .filter(|&i| i != j)
                        .map(|i| y[inst.var(i, l)] as i64)
                        .sum()
                })
            })
            .collect();
        let inner = *cache.entry(profile).or_insert_with(|| {
            feasible
                .iter()
                .map(|yp| inst.cross_value_bits(y, yp))
                .min()
                .expect("feasible set is nonempty")
        });
        let delta = inst.aggregate_bits(y) - inner;
        if best.is_none_or(|(bd, _)| delta < bd) {
            best = Some((delta, y));
        }
    }
    let (delta, point) = best.expect("feasible set is nonempty");
    Ok((delta as f64, bits_to_point(point)))
}

fn expect_optimal(sol: MipSolution, node_limit: u64) -> Result<MipSolution, GameError> {
    match sol.status {
        MipStatus::Optimal => Ok(sol),
        MipStatus::Infeasible => Err(GameError::Infeasible),
        MipStatus::Unbounded => Err(GameError::Unbounded),
        MipStatus::NodeLimit => Err(GameError::NodeLimit { limit: node_limit }),
    }
}

/// True iff no player can improve their objective by more than `tol` with a
/// unilateral deviation (best responses solved as 0-1 programs with the
/// shared rows enforced).
pub fn verify_gne(
    inst: &KnapsackGameInstance,
    y: &[f64],
    tol: f64,
    node_limit: u64,
) -> Result<bool, GameError> {
    let bits = snap_bits(y);
    if !inst.feasible_bits(&bits) {
        return Err(GameError::Infeasible);
    }
    for j in 0..inst.players {
        let current = inst.player_value_bits(&bits, j) as f64;
        let br = expect_optimal(
            solve_mip(&build_best_response(inst, j, y), node_limit)?,
            node_limit,
        )?;
        if current - br.objective > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Game trait adapter
// ---------------------------------------------------------------------------

/// [`KnapsackGameInstance`] wired up as a [`NormalizedGame`]: subproblems
/// are solved by the built-in MILP engine and returned points are snapped
/// to exact 0/1 so all downstream arithmetic stays integral.
#[derive(Debug, Clone)]
pub struct KnapsackGame {
    instance: KnapsackGameInstance,
    dims: Vec<usize>,
}

impl KnapsackGame {
    pub fn new(instance: KnapsackGameInstance) -> Result<Self, InstanceError> {
        instance.validate()?;
        let dims = vec![instance.markets; instance.players];
        Ok(Self { instance, dims })
    }

    pub fn instance(&self) -> &KnapsackGameInstance {
        &self.instance
    }

    fn snap_y(&self, point: &[f64]) -> Vec<f64> {
        bits_to_point(&snap_bits(&point[..self.instance.num_binaries()]))
    }
}

impl NormalizedGame for KnapsackGame {
    fn num_players(&self) -> usize {
        self.instance.players
    }

    fn player_dims(&self) -> &[usize] {
        &self.dims
    }

    fn player_objective(&self, player: usize, shared: &[f64], own: &[f64]) -> f64 {
        let inst = &self.instance;
        let mut total = 0.0;
        for l in 0..inst.markets {
            let others: f64 = (0..inst.players)
                .filter(|&i| i != player)
                .map(|i| shared[inst.var(i, l)])
                .sum();
            total += (inst.c[player][l] as f64 - inst.alpha[l] as f64
                + inst.beta[l] as f64 * (own[l] + others))
                * own[l];
        }
        total
    }

    fn is_feasible(&self, point: &[f64]) -> bool {
        if point.len() != self.instance.num_binaries() {
            return false;
        }
        let integral = point.iter().all(|&v| {
            let r = v.round();
            (v - r).abs() <= INTEGRALITY_TOL && (r == 0.0 || r == 1.0)
        });
        integral && self.instance.feasible_bits(&snap_bits(point))
    }

    fn solve_joint(&self, node_limit: u64) -> Result<Optimum, GameError> {
        let sol = expect_optimal(
            solve_mip(&build_joint(&self.instance), node_limit)?,
            node_limit,
        )?;
        Ok(Optimum {
            point: self.snap_y(&sol.point),
            value: sol.objective,
            nodes: sol.nodes,
        })
    }

    fn solve_lower_bounding(
        &self,
        cuts: &CutSet,
        node_limit: u64,
    ) -> Result<LowerBound, GameError> {
        let mip = build_lbp(&self.instance, cuts);
        let sol = expect_optimal(solve_mip(&mip, node_limit)?, node_limit)?;
        let w = sol.point[lbp_w_index(&self.instance)];
        Ok(LowerBound {
            point: self.snap_y(&sol.point),
            w,
            value: sol.objective,
            nodes: sol.nodes,
        })
    }

    fn solve_lower_level(&self, shared: &[f64], node_limit: u64) -> Result<Optimum, GameError> {
        let mip = build_llp(&self.instance, shared);
        let sol = expect_optimal(solve_mip(&mip, node_limit)?, node_limit)?;
        Ok(Optimum {
            point: self.snap_y(&sol.point),
            value: sol.objective,
            nodes: sol.nodes,
        })
    }

    fn solve_best_response(
        &self,
        player: usize,
        shared: &[f64],
        node_limit: u64,
    ) -> Result<Optimum, GameError> {
        let mip = build_best_response(&self.instance, player, shared);
        let sol = expect_optimal(solve_mip(&mip, node_limit)?, node_limit)?;
        Ok(Optimum {
            point: bits_to_point(&snap_bits(&sol.point)),
            value: sol.objective,
            nodes: sol.nodes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{aggregate_objective, per_player_disequilibrium};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn golden() -> KnapsackGameInstance {
        generate_instance(&GeneratorConfig::new(1, 2, 2)).unwrap()
    }

    /// Hand-built 2-player, 1-market instance where entering the market is
    /// profitable but the shared cap admits only one player.
    fn contested_market() -> KnapsackGameInstance {
        let inst = KnapsackGameInstance {
            players: 2,
            markets: 1,
            alpha: vec![10],
            beta: vec![1],
            c: vec![vec![2], vec![2]],
            a: vec![vec![1], vec![1]],
            b: vec![1, 1],
            d: vec![vec![1], vec![1]],
            e: vec![1],
            seed: 0,
            gamma: 10,
        };
        inst.validate().unwrap();
        inst
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = GeneratorConfig::new(7, 3, 4);
        assert_eq!(
            generate_instance(&cfg).unwrap(),
            generate_instance(&cfg).unwrap()
        );
    }

    #[test]
    fn budgets_and_caps_are_tight_maxima() {
        for seed in 0..10 {
            let inst = generate_instance(&GeneratorConfig::new(seed, 4, 5)).unwrap();
            for j in 0..inst.players {
                assert_eq!(inst.b[j], *inst.a[j].iter().max().unwrap());
            }
            for l in 0..inst.markets {
                assert_eq!(
                    inst.e[l],
                    (0..inst.players).map(|j| inst.d[j][l]).max().unwrap()
                );
            }
        }
    }

    #[test]
    fn golden_instance_values() {
        let inst = golden();
        assert_eq!(inst.alpha, vec![805, 161]);
        assert_eq!(inst.beta, vec![597, 220]);
        assert_eq!(inst.c, vec![vec![284, 711], vec![462, 153]]);
        assert_eq!(inst.a, vec![vec![875, 707], vec![484, 578]]);
        assert_eq!(inst.b, vec![875, 578]);
        assert_eq!(inst.d, vec![vec![100, 264], vec![454, 281]]);
        assert_eq!(inst.e, vec![454, 281]);
    }

    #[test]
    fn aggregate_matches_term_by_term_evaluation() {
        // On the golden instance at y = (1,0 | 0,1): each market hosts one
        // player, so f_0 = c_00 - alpha_0 + beta_0 = 76 and
        // f_1 = c_11 - alpha_1 + beta_1 = 212.
        let game = KnapsackGame::new(golden()).unwrap();
        let p = [1.0, 0.0, 0.0, 1.0];
        assert!(game.is_feasible(&p));
        assert_eq!(aggregate_objective(&game, &p).unwrap(), 288.0);
        // All-zeros: every term carries a factor y_jl.
        assert_eq!(aggregate_objective(&game, &[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_a_usage_error() {
        let game = KnapsackGame::new(golden()).unwrap();
        assert!(matches!(
            aggregate_objective(&game, &[0.0; 3]),
            Err(GameError::DimensionMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn lbp_objective_equals_quadratic_form_on_assignments() {
        let inst = generate_instance(&GeneratorConfig::new(3, 3, 3)).unwrap();
        let cuts = CutSet::from_points(vec![vec![0.0; inst.num_binaries()]]);
        let mip = build_lbp(&inst, &cuts);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let y: Vec<u8> = (0..inst.num_binaries())
                .map(|_| rng.random_range(0..=1))
                .collect();
            let point = lbp_point_for_assignment(&inst, &y);
            // Quadratic form: sum c y + sum_l (-alpha z + beta z^2), w = 0.
            let mut quad = 0i64;
            for j in 0..inst.players {
                for l in 0..inst.markets {
                    quad += inst.c[j][l] * y[inst.var(j, l)] as i64;
                }
            }
            for l in 0..inst.markets {
                let z: i64 = (0..inst.players).map(|j| y[inst.var(j, l)] as i64).sum();
                quad += -inst.alpha[l] * z + inst.beta[l] * z * z;
            }
            assert_eq!(mip.lp.objective_value(&point), quad as f64);
        }
    }

    #[test]
    fn lbp_variable_count() {
        let inst = generate_instance(&GeneratorConfig::new(2, 3, 4)).unwrap();
        let cuts = CutSet::from_points(vec![vec![0.0; inst.num_binaries()]]);
        let mip = build_lbp(&inst, &cuts);
        let (nj, nl) = (inst.players, inst.markets);
        assert_eq!(mip.lp.num_vars, nj * nl + nl * nj + nl + 1);
        assert_eq!(lbp_w_index(&inst), mip.lp.num_vars - 1);
        assert_eq!(mip.binaries.len(), nj * nl);
        assert!(mip.objective_integral);
    }

    #[test]
    fn cut_row_constant_at_zero_coupling() {
        // With y = 0 the coupling terms vanish and the cut bounds w by
        // sum (c - alpha + beta) y'.
        let inst = golden();
        let yp = vec![1.0, 0.0, 0.0, 1.0];
        let cuts = CutSet::from_points(vec![yp]);
        let mip = build_lbp(&inst, &cuts);
        let cut = mip.lp.constraints.last().unwrap();
        assert_eq!(cut.rhs, 288.0);
        assert_eq!(cut.sense, Sense::Le);
        let w = lbp_w_index(&inst);
        assert!(cut.coeffs.contains(&(w, 1.0)));
    }

    #[test]
    fn cut_bound_equals_cross_value_on_every_feasible_pair() {
        let inst = generate_instance(&GeneratorConfig::new(9, 2, 3)).unwrap();
        let feasible = inst.enumerate_feasible().unwrap();
        let w = lbp_w_index(&inst);
        for yp in feasible.iter().take(12) {
            let cuts = CutSet::from_points(vec![bits_to_point(yp)]);
            let mip = build_lbp(&inst, &cuts);
            let cut = mip.lp.constraints.last().unwrap();
            for y in &feasible {
                // Cut row: w + sum coef * y_il <= rhs, so the bound on w at
                // y is rhs - sum coef * y_il.
                let mut bound = cut.rhs;
                for &(idx, coef) in &cut.coeffs {
                    if idx != w {
                        bound -= coef * y[idx] as f64;
                    }
                }
                assert_eq!(bound, inst.cross_value_bits(y, yp) as f64);
            }
        }
    }

    #[test]
    fn llp_coefficients_at_zero_coupling() {
        let inst = golden();
        let mip = build_llp(&inst, &[0.0; 4]);
        for j in 0..inst.players {
            for l in 0..inst.markets {
                let expected = (inst.c[j][l] - inst.alpha[l] + inst.beta[l]) as f64;
                assert_eq!(mip.lp.objective[inst.var(j, l)], expected);
            }
        }
    }

    #[test]
    fn llp_coefficient_formula_matches_term_expansion() {
        // Expanding player j's deviation objective at coupling y gives
        // (c - alpha + beta + beta * sum_{i != j} y_il) on y'_jl.
        let inst = golden();
        let y = [1.0, 0.0, 0.0, 1.0];
        let mip = build_llp(&inst, &y);
        for j in 0..inst.players {
            for l in 0..inst.markets {
                let others: i64 = (0..inst.players)
                    .filter(|&i| i != j)
                    .map(|i| y[inst.var(i, l)] as i64)
                    .sum();
                let expected =
                    (inst.c[j][l] - inst.alpha[l] + inst.beta[l] + inst.beta[l] * others) as f64;
                assert_eq!(mip.lp.objective[inst.var(j, l)], expected);
            }
        }
    }

    #[test]
    fn joint_solve_matches_enumeration() {
        for seed in [0u64, 3, 7] {
            let inst = generate_instance(&GeneratorConfig::new(seed, 3, 3)).unwrap();
            let sol = solve_mip(&build_joint(&inst), 1_000_000).unwrap();
            assert_eq!(sol.status, MipStatus::Optimal);
            let oracle = inst
                .enumerate_feasible()
                .unwrap()
                .iter()
                .map(|y| inst.aggregate_bits(y))
                .min()
                .unwrap();
            assert_eq!(sol.objective, oracle as f64, "seed {seed}");
        }
    }

    #[test]
    fn lbp_solve_matches_enumeration_with_analytic_w() {
        // At any fixed y the optimal w is the smallest cut bound, so the
        // lower-bounding optimum is min_y [agg(y) - min_cut cross(y, y')].
        let inst = generate_instance(&GeneratorConfig::new(11, 2, 3)).unwrap();
        let feasible = inst.enumerate_feasible().unwrap();
        let cut_points: Vec<Vec<u8>> = feasible.iter().take(3).cloned().collect();
        let cuts = CutSet::from_points(cut_points.iter().map(|c| bits_to_point(c)).collect());
        let sol = solve_mip(&build_lbp(&inst, &cuts), 1_000_000).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        let oracle = feasible
            .iter()
            .map(|y| {
                let w = cut_points
                    .iter()
                    .map(|yp| inst.cross_value_bits(y, yp))
                    .min()
                    .unwrap();
                inst.aggregate_bits(y) - w
            })
            .min()
            .unwrap();
        assert_eq!(sol.objective, oracle as f64);
    }

    #[test]
    fn llp_solve_matches_enumeration() {
        let inst = golden();
        let feasible = inst.enumerate_feasible().unwrap();
        for y in &feasible {
            let mip = build_llp(&inst, &bits_to_point(y));
            let sol = solve_mip(&mip, 1_000_000).unwrap();
            assert_eq!(sol.status, MipStatus::Optimal);
            let oracle = feasible
                .iter()
                .map(|yp| inst.cross_value_bits(y, yp))
                .min()
                .unwrap();
            assert_eq!(sol.objective, oracle as f64);
        }
    }

    #[test]
    fn brute_force_is_nonnegative_and_zero_on_dominant_costs() {
        // Golden instance: every entry coefficient c - alpha + beta is
        // positive, so all-zeros is optimal for both levels.
        let (delta, point) = brute_force_mnd(&golden()).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(point, vec![0.0; 4]);
        for seed in 0..8 {
            let inst = generate_instance(&GeneratorConfig::new(seed, 2, 3)).unwrap();
            let (delta, _) = brute_force_mnd(&inst).unwrap();
            assert!(delta >= 0.0);
        }
    }

    #[test]
    fn brute_force_budget_guard() {
        let inst = generate_instance(&GeneratorConfig::new(0, 5, 5)).unwrap();
        assert!(matches!(
            brute_force_mnd(&inst),
            Err(GameError::EnumerationBudget {
                binaries: 25,
                max: 16
            })
        ));
    }

    #[test]
    fn all_zeros_fails_verification_when_entry_is_profitable() {
        let inst = contested_market();
        // c + beta < alpha and the cap is slack at all-zeros: either player
        // improves by entering.
        assert!(!verify_gne(&inst, &[0.0, 0.0], 1e-6, 1_000_000).unwrap());
        // One player holding the market is an equilibrium: the cap blocks
        // the other player and exiting costs 7.
        assert!(verify_gne(&inst, &[1.0, 0.0], 1e-6, 1_000_000).unwrap());
        let (delta, _) = brute_force_mnd(&inst).unwrap();
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn per_player_regrets_match_enumeration() {
        let inst = golden();
        let game = KnapsackGame::new(inst.clone()).unwrap();
        let p = [1.0, 0.0, 0.0, 1.0];
        let regrets = per_player_disequilibrium(&game, &p, 1_000_000).unwrap();
        // Enumeration oracle over each player's own patterns.
        let bits: Vec<u8> = p.iter().map(|&v| v as u8).collect();
        for j in 0..inst.players {
            let current = inst.player_value_bits(&bits, j);
            let mut best = i64::MAX;
            let mut trial = bits.clone();
            for mask in 0u32..(1 << inst.markets) {
                for l in 0..inst.markets {
                    trial[inst.var(j, l)] = ((mask >> l) & 1) as u8;
                }
                if inst.feasible_bits(&trial) {
                    best = best.min(inst.player_value_bits(&trial, j));
                }
            }
            assert_eq!(regrets[j], (current - best) as f64);
            assert!(regrets[j] >= 0.0);
        }
        assert_eq!(regrets, vec![76.0, 212.0]);
    }

    #[test]
    fn max_regret_bounded_by_normalized_disequilibrium() {
        // On every feasible point of a few tiny instances, the largest
        // per-player regret is at most the normalized disequilibrium.
        for seed in 0..4 {
            let inst = generate_instance(&GeneratorConfig::new(seed, 2, 2)).unwrap();
            let feasible = inst.enumerate_feasible().unwrap();
            for y in &feasible {
                let g_n = feasible
                    .iter()
                    .map(|yp| inst.cross_value_bits(y, yp))
                    .min()
                    .unwrap();
                let normalized = (inst.aggregate_bits(y) - g_n) as f64;
                assert!(normalized >= 0.0);
                let mut max_regret = 0i64;
                for j in 0..inst.players {
                    let current = inst.player_value_bits(y, j);
                    let mut best = current;
                    let mut trial = y.clone();
                    for mask in 0u32..(1 << inst.markets) {
                        for l in 0..inst.markets {
                            trial[inst.var(j, l)] = ((mask >> l) & 1) as u8;
                        }
                        if inst.feasible_bits(&trial) {
                            best = best.min(inst.player_value_bits(&trial, j));
                        }
                    }
                    max_regret = max_regret.max(current - best);
                }
                assert!(
                    max_regret as f64 <= normalized + 1e-9,
                    "seed {seed}: regret {max_regret} > normalized {normalized}"
                );
            }
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let inst = golden();
        let text = inst.to_json_string();
        let back = KnapsackGameInstance::from_json_str(&text).unwrap();
        assert_eq!(inst, back);

        let mut broken = inst.clone();
        broken.b[0] = broken.a[0].iter().max().unwrap() - 1;
        let text = serde_json::to_string(&broken).unwrap();
        let err = KnapsackGameInstance::from_json_str(&text).unwrap_err();
        assert!(matches!(err, InstanceParseError::Invalid(_)));

        assert!(matches!(
            KnapsackGameInstance::from_json_str("{\"players\": 2,"),
            Err(InstanceParseError::Json(_))
        ));
    }
}
