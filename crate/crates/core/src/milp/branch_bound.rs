//! Best-bound-first branch-and-bound over binary variables.
//!
//! Branching picks the most fractional binary (ties to the lowest index);
//! node selection is best bound first with FIFO tie-breaking, so identical
//! inputs explore identical trees. Every incumbent is re-checked against
//! the original rows independently of the tree before it is accepted.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{self, LpStatus};
use super::{
    MipSolution, MipStatus, MixedIntegerProgram, SolverError, FEASIBILITY_TOL, GAP_TOL,
    INTEGRALITY_TOL,
};

struct Node {
    bound: f64,
    /// Branching decisions as (variable, fixed value).
    fixes: Vec<(usize, f64)>,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest bound pops first,
        // then the oldest node (FIFO).
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves a 0-1 mixed-integer program to the absolute gap [`GAP_TOL`].
///
/// `node_limit` caps the number of LP relaxations solved; when it is hit the
/// solution carries the incumbent and the proven bound with status
/// [`MipStatus::NodeLimit`].
pub fn solve_mip(mip: &MixedIntegerProgram, node_limit: u64) -> Result<MipSolution, SolverError> {
    mip.validate()?;
    let mut base = mip.lp.clone();
    for &j in &mip.binaries {
        base.lower[j] = base.lower[j].max(0.0);
        base.upper[j] = base.upper[j].min(1.0);
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        fixes: Vec::new(),
        seq: 0,
    });
    let mut seq = 1u64;
    let mut nodes = 0u64;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    let mut open_bound: Option<f64> = None;
    let mut hit_limit = false;
    // With an integral objective, any node whose bound exceeds inc - 1 is
    // already proven unable to improve on the incumbent.
    let prune_level = |inc: f64| {
        if mip.objective_integral && inc.is_finite() {
            inc - 1.0 + GAP_TOL
        } else {
            inc - GAP_TOL
        }
    };

    while let Some(node) = heap.pop() {
        if node.bound >= prune_level(inc_obj) {
            // Best-first: every open node is at least this bound.
            open_bound = Some(node.bound);
            break;
        }
        if nodes >= node_limit {
            hit_limit = true;
            open_bound = Some(node.bound);
            break;
        }
        debug_assert!(
            node.bound <= inc_obj + GAP_TOL,
            "tree bound {} above incumbent {}",
            node.bound,
            inc_obj
        );
        let mut lp = base.clone();
        for &(j, v) in &node.fixes {
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        nodes += 1;
        let res = simplex::solve(&lp)?;
        match res.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.fixes.is_empty() {
                    return Ok(MipSolution {
                        status: MipStatus::Unbounded,
                        point: Vec::new(),
                        objective: f64::NEG_INFINITY,
                        best_bound: f64::NEG_INFINITY,
                        nodes,
                    });
                }
                return Err(SolverError::NumericalBreakdown(
                    "child LP unbounded although the root relaxation was bounded".into(),
                ));
            }
            LpStatus::Optimal => {}
        }
        let bound = res.objective;
        if bound >= prune_level(inc_obj) {
            continue;
        }
        let mut pick: Option<(usize, f64)> = None;
        for &j in &mip.binaries {
            let f = (res.point[j] - res.point[j].round()).abs();
            if f > INTEGRALITY_TOL && pick.is_none_or(|(_, bf)| f > bf) {
                pick = Some((j, f));
            }
        }
        match pick {
            None => {
                let mut pt = res.point;
                for &j in &mip.binaries {
                    pt[j] = pt[j].round();
                }
                if !mip.lp.point_feasible(&pt, FEASIBILITY_TOL) {
                    return Err(SolverError::NumericalBreakdown(
                        "integral relaxation point failed the independent feasibility re-check"
                            .into(),
                    ));
                }
                let obj = mip.lp.objective_value(&pt);
                if obj < inc_obj {
                    inc_obj = obj;
                    incumbent = Some(pt);
                }
            }
            Some((j, _)) => {
                for v in [0.0, 1.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Node { bound, fixes, seq });
                    seq += 1;
                }
            }
        }
    }

    // An open-node bound rounds up to the nearest integral objective value.
    let proof = |b: f64| {
        if mip.objective_integral && b.is_finite() {
            (b - GAP_TOL).ceil()
        } else {
            b
        }
    };
    if hit_limit {
        let bound = proof(open_bound.unwrap_or(f64::NEG_INFINITY)).min(inc_obj);
        return Ok(MipSolution {
            status: MipStatus::NodeLimit,
            point: incumbent.unwrap_or_default(),
            objective: inc_obj,
            best_bound: bound,
            nodes,
        });
    }
    match incumbent {
        Some(pt) => {
            let best_bound = open_bound.map_or(inc_obj, proof).min(inc_obj);
            Ok(MipSolution {
                status: MipStatus::Optimal,
                point: pt,
                objective: inc_obj,
                best_bound,
                nodes,
            })
        }
        None => Ok(MipSolution {
            status: MipStatus::Infeasible,
            point: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            nodes,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{
        solve_mip, Constraint, LinearProgram, MipStatus, MixedIntegerProgram, Sense,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_program(n: usize) -> MixedIntegerProgram {
        let mut lp = LinearProgram::new(n);
        lp.upper = vec![1.0; n];
        MixedIntegerProgram::new(lp, (0..n).collect())
    }

    #[test]
    fn single_binary() {
        // min -2x over x in {0,1}
        let mut mip = binary_program(1);
        mip.lp.objective = vec![-2.0];
        let s = solve_mip(&mip, 1000).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert_eq!(s.point, vec![1.0]);
        assert!((s.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn integral_relaxation_solves_at_root() {
        // min -x - y s.t. x <= 1, y <= 0: relaxation is already integral.
        let mut mip = binary_program(2);
        mip.lp.objective = vec![-1.0, -1.0];
        mip.lp
            .constraints
            .push(Constraint::new(vec![(1, 1.0)], Sense::Le, 0.0));
        let s = solve_mip(&mip, 1000).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert_eq!(s.nodes, 1);
        assert_eq!(s.point, vec![1.0, 0.0]);
    }

    #[test]
    fn node_limit_reports_incumbent_and_bound() {
        let mut mip = binary_program(10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for c in mip.lp.objective.iter_mut() {
            *c = rng.random_range(-9..=9) as f64;
        }
        let coeffs: Vec<(usize, f64)> = (0..10)
            .map(|j| (j, rng.random_range(1..=9) as f64))
            .collect();
        mip.lp
            .constraints
            .push(Constraint::new(coeffs, Sense::Le, 11.0));
        let full = solve_mip(&mip, u64::MAX).unwrap();
        assert_eq!(full.status, MipStatus::Optimal);
        let clipped = solve_mip(&mip, 1).unwrap();
        assert_eq!(clipped.status, MipStatus::NodeLimit);
        assert!(clipped.best_bound <= full.objective + 1e-9);
    }

    #[test]
    fn matches_enumeration_on_random_knapsacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..25 {
            let n = rng.random_range(3..=12);
            let mut mip = binary_program(n);
            for c in mip.lp.objective.iter_mut() {
                *c = rng.random_range(-9..=9) as f64;
            }
            let rows = rng.random_range(1..=3);
            for _ in 0..rows {
                let coeffs: Vec<(usize, f64)> = (0..n)
                    .map(|j| (j, rng.random_range(-4..=9) as f64))
                    .collect();
                let rhs = rng.random_range(0..=20) as f64;
                mip.lp
                    .constraints
                    .push(Constraint::new(coeffs, Sense::Le, rhs));
            }
            let s = solve_mip(&mip, 1_000_000).unwrap();
            // Exhaustive oracle over all 0/1 points.
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
                if mip.lp.point_feasible(&x, 1e-9) {
                    best = best.min(mip.lp.objective_value(&x));
                }
            }
            if best.is_infinite() {
                assert_eq!(s.status, MipStatus::Infeasible, "case {case}");
            } else {
                assert_eq!(s.status, MipStatus::Optimal, "case {case}");
                assert!(
                    (s.objective - best).abs() < 1e-9,
                    "case {case}: engine {} vs enumeration {}",
                    s.objective,
                    best
                );
                assert!(mip.lp.point_feasible(&s.point, 1e-9));
            }
        }
    }

    #[test]
    fn deterministic_replay() {
        let mut mip = binary_program(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in mip.lp.objective.iter_mut() {
            *c = rng.random_range(-9..=9) as f64;
        }
        let coeffs: Vec<(usize, f64)> = (0..8)
            .map(|j| (j, rng.random_range(1..=9) as f64))
            .collect();
        mip.lp
            .constraints
            .push(Constraint::new(coeffs, Sense::Le, 13.0));
        let a = solve_mip(&mip, u64::MAX).unwrap();
        let b = solve_mip(&mip, u64::MAX).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.point, b.point);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn weak_duality_on_exit() {
        let mut mip = binary_program(9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for c in mip.lp.objective.iter_mut() {
            *c = rng.random_range(-9..=9) as f64;
        }
        let coeffs: Vec<(usize, f64)> = (0..9)
            .map(|j| (j, rng.random_range(1..=9) as f64))
            .collect();
        mip.lp
            .constraints
            .push(Constraint::new(coeffs, Sense::Ge, 6.0));
        let s = solve_mip(&mip, u64::MAX).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert!(s.best_bound <= s.objective + 1e-9);
        assert!((s.best_bound - s.objective).abs() <= 1e-6);
    }
}
