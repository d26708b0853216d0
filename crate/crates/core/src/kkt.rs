//! Complementarity reformulation of the knapsack game and its failure mode.
//!
//! Relaxing each binary to `y in [0, 1]` with the complementarity equation
//! `y (1 - y) = 0` makes every player a smooth nonlinear program, and the
//! concatenated first-order KKT system looks like a solvable target for
//! complementarity methods. It is vacuous here: for any feasible 0/1
//! profile, multipliers satisfying the whole system can be written down in
//! closed form, so KKT feasibility carries no equilibrium information.
//! [`demonstrate_failure`] exhibits the gap by pairing a valid certificate
//! with a profitable unilateral deviation.

use serde::Serialize;
use thiserror::Error;

use crate::game::GameError;
use crate::knapsack::KnapsackGameInstance;

#[derive(Debug, Error)]
pub enum KktError {
    #[error("the point violates a budget or shared constraint (or is not 0/1)")]
    InfeasiblePoint,
    #[error("no counterexample: every feasible point of this instance is an equilibrium")]
    NoCounterexample,
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Multipliers for the concatenated KKT system, one entry per constraint:
/// `pi` for budgets, `gamma` (free sign) for the complementarity equations,
/// `mu`/`nu` for the upper/lower variable bounds, `omega` for shared caps.
#[derive(Debug, Clone, Serialize)]
pub struct KktCertificate {
    pub pi: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
}

/// Maximum absolute violation per equation group of the KKT system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KktResiduals {
    /// Stationarity of each player's Lagrangian in `y_jl`.
    pub stationarity: f64,
    /// Budget rows: primal slack sign, `pi >= 0`, and their product.
    pub budget: f64,
    /// `gamma_jl * y_jl * (1 - y_jl) = 0`.
    pub binary_complementarity: f64,
    /// Upper bounds `y <= 1` against `mu`.
    pub upper_bound: f64,
    /// Lower bounds `y >= 0` against `nu`.
    pub lower_bound: f64,
    /// Shared caps against `omega`.
    pub shared_cap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.budget)
            .max(self.binary_complementarity)
            .max(self.upper_bound)
            .max(self.lower_bound)
            .max(self.shared_cap)
    }

    pub fn worst_group(&self) -> &'static str {
        let groups = [
            (self.stationarity, "stationarity"),
            (self.budget, "budget"),
            (self.binary_complementarity, "binary_complementarity"),
            (self.upper_bound, "upper_bound"),
            (self.lower_bound, "lower_bound"),
            (self.shared_cap, "shared_cap"),
        ];
        groups
            .iter()
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .map(|&(_, name)| name)
            .unwrap_or("stationarity")
    }
}

fn to_bits(inst: &KnapsackGameInstance, point: &[f64]) -> Result<Vec<u8>, KktError> {
    if point.len() != inst.num_binaries() {
        return Err(KktError::InfeasiblePoint);
    }
    let mut bits = Vec::with_capacity(point.len());
    for &v in point {
        let r = v.round();
        if (v - r).abs() > 1e-6 || (r != 0.0 && r != 1.0) {
            return Err(KktError::InfeasiblePoint);
        }
        bits.push(r as u8);
    }
    if !inst.feasible_bits(&bits) {
        return Err(KktError::InfeasiblePoint);
    }
    Ok(bits)
}

fn coupling(inst: &KnapsackGameInstance, bits: &[u8], j: usize, l: usize) -> i64 {
    (0..inst.players)
        .filter(|&i| i != j)
        .map(|i| bits[inst.var(i, l)] as i64)
        .sum()
}

/// Closed-form multipliers making any feasible 0/1 profile KKT-feasible.
///
/// The degrees of freedom the construction leaves open (`pi`, `omega`, and
/// the bound multiplier on the active side) are pinned to zero; `gamma`
/// then absorbs the entire stationarity row:
/// for `y_jl = 0`, `gamma_jl = -(alpha_l - c_jl - beta_l * s_jl)`, and
/// for `y_jl = 1`, `gamma_jl = alpha_l - c_jl - beta_l * s_jl - 2 beta_l`,
/// where `s_jl` is the other players' participation in market `l`.
pub fn construct_multipliers(
    inst: &KnapsackGameInstance,
    y_hat: &[f64],
) -> Result<KktCertificate, KktError> {
    let bits = to_bits(inst, y_hat)?;
    let (nj, nl) = (inst.players, inst.markets);
    let mut gamma = vec![vec![0.0; nl]; nj];
    for j in 0..nj {
        for l in 0..nl {
            let s = coupling(inst, &bits, j, l) as f64;
            let base = inst.alpha[l] as f64 - inst.c[j][l] as f64 - inst.beta[l] as f64 * s;
            gamma[j][l] = if bits[inst.var(j, l)] == 0 {
                -base
            } else {
                base - 2.0 * inst.beta[l] as f64
            };
        }
    }
    Ok(KktCertificate {
        pi: vec![0.0; nj],
        gamma,
        mu: vec![vec![0.0; nl]; nj],
        nu: vec![vec![0.0; nl]; nj],
        omega: vec![0.0; nl],
    })
}

/// Evaluates every equation group of the KKT system at `(y_hat, cert)` and
/// returns the per-group maximum violations.
pub fn verify_kkt(
    inst: &KnapsackGameInstance,
    y_hat: &[f64],
    cert: &KktCertificate,
) -> KktResiduals {
    let (nj, nl) = (inst.players, inst.markets);
    let y = |j: usize, l: usize| y_hat[inst.var(j, l)];

    let mut res = KktResiduals {
        stationarity: 0.0,
        budget: 0.0,
        binary_complementarity: 0.0,
        upper_bound: 0.0,
        lower_bound: 0.0,
        shared_cap: 0.0,
    };

    for j in 0..nj {
        for l in 0..nl {
            let s: f64 = (0..nj).filter(|&i| i != j).map(|i| y(i, l)).sum();
            let (alpha, beta) = (inst.alpha[l] as f64, inst.beta[l] as f64);
            let station = alpha
                - inst.c[j][l] as f64
                - beta * s
                - 2.0 * beta * y(j, l)
                - cert.pi[j] * inst.a[j][l] as f64
                + cert.gamma[j][l]
                - 2.0 * cert.gamma[j][l] * y(j, l)
                - cert.mu[j][l]
                + cert.nu[j][l]
                - cert.omega[l] * inst.d[j][l] as f64;
            res.stationarity = res.stationarity.max(station.abs());

            res.binary_complementarity = res
                .binary_complementarity
                .max((cert.gamma[j][l] * y(j, l) * (1.0 - y(j, l))).abs());

            let upper_slack = 1.0 - y(j, l);
            res.upper_bound = res
                .upper_bound
                .max((-upper_slack).max(0.0))
                .max((-cert.mu[j][l]).max(0.0))
                .max((cert.mu[j][l] * upper_slack).abs());

            res.lower_bound = res
                .lower_bound
                .max((-y(j, l)).max(0.0))
                .max((-cert.nu[j][l]).max(0.0))
                .max((cert.nu[j][l] * y(j, l)).abs());
        }
    }
    for j in 0..nj {
        let slack = inst.b[j] as f64 - (0..nl).map(|l| inst.a[j][l] as f64 * y(j, l)).sum::<f64>();
        res.budget = res
            .budget
            .max((-slack).max(0.0))
            .max((-cert.pi[j]).max(0.0))
            .max((cert.pi[j] * slack).abs());
    }
    for l in 0..nl {
        let slack = inst.e[l] as f64 - (0..nj).map(|j| inst.d[j][l] as f64 * y(j, l)).sum::<f64>();
        res.shared_cap = res
            .shared_cap
            .max((-slack).max(0.0))
            .max((-cert.omega[l]).max(0.0))
            .max((cert.omega[l] * slack).abs());
    }
    res
}

/// A KKT-feasible point that is not an equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct FailureWitness {
    pub point: Vec<f64>,
    pub certificate: KktCertificate,
    pub residuals: KktResiduals,
    /// Largest unilateral objective improvement available at the point.
    pub disequilibrium: f64,
}

/// Best unilateral improvement of `player` at `bits`, by enumeration of the
/// player's own 0/1 patterns under the budget and residual shared caps.
fn best_improvement(inst: &KnapsackGameInstance, bits: &[u8], player: usize) -> i64 {
    let nl = inst.markets;
    let current = inst.player_value_bits(bits, player);
    let mut best = current;
    let mut trial = bits.to_vec();
    for mask in 0u32..(1u32 << nl) {
        for l in 0..nl {
            trial[inst.var(player, l)] = ((mask >> l) & 1) as u8;
        }
        if inst.feasible_bits(&trial) {
            best = best.min(inst.player_value_bits(&trial, player));
        }
    }
    current - best
}

/// Scans the feasible profiles of a small instance for one whose KKT
/// certificate is exact while some player still has a profitable deviation.
/// Returns [`KktError::NoCounterexample`] when every feasible point is an
/// equilibrium, which does happen on some instances.
pub fn demonstrate_failure(inst: &KnapsackGameInstance) -> Result<FailureWitness, KktError> {
    let feasible = inst.enumerate_feasible()?;
    for bits in &feasible {
        let max_dev = (0..inst.players)
            .map(|j| best_improvement(inst, bits, j))
            .max()
            .unwrap_or(0);
        if max_dev > 0 {
            let point: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
            let certificate = construct_multipliers(inst, &point)?;
            let residuals = verify_kkt(inst, &point, &certificate);
            return Ok(FailureWitness {
                point,
                certificate,
                residuals,
                disequilibrium: max_dev as f64,
            });
        }
    }
    Err(KktError::NoCounterexample)
}

/// Certificate dump keyed by multiplier family, residuals per group.
pub fn certificate_json(cert: &KktCertificate, residuals: &KktResiduals) -> String {
    let value = serde_json::json!({
        "pi": cert.pi,
        "gamma": cert.gamma,
        "mu": cert.mu,
        "nu": cert.nu,
        "omega": cert.omega,
        "residuals": residuals,
    });
    serde_json::to_string_pretty(&value).expect("certificate serializes")
}
