//! Exact DP checked against enumeration of every deterministic policy on
//! micro instances (one resource with a single unit, T ≤ 3, |S| ≤ 3).

use nrm_core::instances::{gen_random_small, RandomBounds};
use nrm_core::oracle::{exact_dp, exact_policy_value};
use nrm_core::policies::{BidPricePolicy, Decision};
use nrm_core::Instance;

/// Cells where a serve decision is possible: (t, c, s).
fn decision_cells(inst: &Instance) -> Vec<(usize, u32, usize)> {
    let mut cells = Vec::new();
    for t in 0..inst.horizon() {
        for c in 0..=inst.resources[0].capacity {
            for s in 0..inst.num_states() {
                if let Some(j) = inst.arrival.state_type[s] {
                    if c >= inst.types[j].consumes[0] as u32 {
                        cells.push((t, c, s));
                    }
                }
            }
        }
    }
    cells
}

/// Expected reward of the policy serving exactly the cells whose bit is set.
fn evaluate(inst: &Instance, cells: &[(usize, u32, usize)], mask: u64) -> f64 {
    let arr = &inst.arrival;
    let (h, ns) = (inst.horizon(), inst.num_states());
    let cap = inst.resources[0].capacity as usize;
    let serves = |t: usize, c: usize, s: usize| {
        cells.iter().position(|&cell| cell == (t, c as u32, s)).is_some_and(|k| mask >> k & 1 == 1)
    };
    // v[c][s]: value with the period-t arrival already seen
    let mut next = vec![vec![0.0; ns]; cap + 1];
    for t in (0..h).rev() {
        let mut cur = vec![vec![0.0; ns]; cap + 1];
        for c in 0..=cap {
            for s in 0..ns {
                let cont = |c2: usize| -> f64 {
                    match arr.row(t, s) {
                        Some(row) => row.iter().enumerate().map(|(s2, p)| p * next[c2][s2]).sum(),
                        None => 0.0,
                    }
                };
                cur[c][s] = match arr.state_type[s] {
                    Some(j) if serves(t, c, s) => {
                        let ty = &inst.types[j];
                        ty.reward + cont(c - ty.consumes[0] as usize)
                    }
                    _ => cont(c),
                };
            }
        }
        next = cur;
    }
    arr.initial.iter().enumerate().map(|(s, p)| p * next[cap][s]).sum()
}

#[test]
fn dp_equals_best_enumerated_policy() {
    let mut checked = 0;
    for seed in 0..60 {
        let inst = gen_random_small(seed, RandomBounds::new(1, 3, 3, 3, 1));
        let cells = decision_cells(&inst);
        if cells.len() > 16 {
            continue;
        }
        let (best_mask, best) = (0..1u64 << cells.len())
            .map(|mask| (mask, evaluate(&inst, &cells, mask)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (dp, _) = exact_dp(&inst).unwrap();
        assert!((dp - best).abs() <= 1e-12 * best.abs().max(1.0), "seed {seed}: DP {dp}, enumeration {best}");

        // The oracle's policy evaluator agrees with the enumerator on the maximiser.
        let policy = |t: usize, s: usize, c: &[u32]| {
            let k = cells.iter().position(|&cell| cell == (t, c[0], s));
            let serve = k.is_some_and(|k| best_mask >> k & 1 == 1);
            Decision { serve, opportunity_cost: 0.0, feasible: k.is_some() }
        };
        let value = exact_policy_value(&inst, &policy).unwrap();
        assert!((value - best).abs() <= 1e-12 * best.abs().max(1.0), "seed {seed}");

        let bbp = exact_policy_value(&inst, &BidPricePolicy::new(&inst)).unwrap();
        assert!(bbp <= best + 1e-12, "seed {seed}: bid-price {bbp} beats the optimum {best}");
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} instances small enough");
}
