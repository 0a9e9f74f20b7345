//! Bid-price control and the baselines it is compared against.

use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::lp::AdpWeights;
use crate::model::{fits, Instance, MarkovArrival};

/// ν^t_j(s) for t in 0..=T, stored `nu[t][j][s]`; the last slice is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidPriceTable {
    pub nu: Vec<Vec<Vec<f64>>>,
}

impl BidPriceTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numbers serialise")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub serve: bool,
    pub opportunity_cost: f64,
    pub feasible: bool,
}

impl Decision {
    /// Nobody arrived: nothing to decide.
    pub const NOOP: Decision = Decision { serve: false, opportunity_cost: 0.0, feasible: true };
}

/// Per-resource bid (1/C_i) Σ_{j∈B_i} ν_j(s') averaged over s' ~ p_t(s, ·).
pub(crate) fn expected_resource_bids(instance: &Instance, t: usize, s: usize, nu_next: &[Vec<f64>]) -> Vec<f64> {
    let arr = &instance.arrival;
    (0..instance.m())
        .map(|i| {
            let cap = instance.resources[i].capacity;
            let users = instance.consumers_of(i);
            if cap == 0 || users.is_empty() {
                return 0.0;
            }
            arr.expect(t, s, |s2| users.iter().map(|&j| nu_next[j][s2]).sum::<f64>()) / cap as f64
        })
        .collect()
}

fn opportunity_cost_of(instance: &Instance, t: usize, s: usize, j: usize, nu_next: &[Vec<f64>]) -> f64 {
    let eb = expected_resource_bids(instance, t, s, nu_next);
    instance.types[j].consumes.iter().zip(&eb).filter(|(&a, _)| a == 1).map(|(_, b)| b).sum()
}

pub fn compute_bid_prices(instance: &Instance) -> BidPriceTable {
    let arr = &instance.arrival;
    let (horizon, ns, n) = (arr.horizon, arr.num_states(), instance.n());
    let mut nu = vec![vec![vec![0.0; ns]; n]; horizon + 1];
    for t in (0..horizon).rev() {
        let (head, tail) = nu.split_at_mut(t + 1);
        let next = &tail[0];
        let cur = &mut head[t];
        for s in 0..ns {
            for j in 0..n {
                cur[j][s] = arr.expect(t, s, |s2| next[j][s2]);
            }
            if let Some(j) = arr.state_type[s] {
                let opp = opportunity_cost_of(instance, t, s, j, next);
                cur[j][s] += (instance.types[j].reward - opp).max(0.0);
            }
        }
    }
    BidPriceTable { nu }
}

pub fn opportunity_cost(table: &BidPriceTable, instance: &Instance, t: usize, s: usize) -> Result<f64> {
    let j = instance.arrival.state_type[s].ok_or(NrmError::NullState { period: t, state: s })?;
    Ok(opportunity_cost_of(instance, t, s, j, &table.nu[t + 1]))
}

/// Serve iff the request fits and pays at least its opportunity cost.
pub fn decide_bid_price(table: &BidPriceTable, instance: &Instance, t: usize, s: usize, c: &[u32]) -> Decision {
    let Some(j) = instance.arrival.state_type[s] else { return Decision::NOOP };
    let ty = &instance.types[j];
    let feasible = fits(c, &ty.consumes);
    let opp = opportunity_cost_of(instance, t, s, j, &table.nu[t + 1]);
    Decision { serve: feasible && ty.reward >= opp, opportunity_cost: opp, feasible }
}

/// Σ_s p₁(s) Σ_j ν¹_j(s).
pub fn lower_bound_value(table: &BidPriceTable, arrival: &MarkovArrival) -> f64 {
    arrival.initial.iter().enumerate().map(|(s, &p)| p * table.nu[0].iter().map(|row| row[s]).sum::<f64>()).sum()
}

/// β̂^t_i(s) = (1/C_i) Σ_{j∈B_i} ν^t_j(s) and θ̂^t(s) = Σ_j ν^t_j(s).
pub fn construct_lp_solution(nu: &[Vec<Vec<f64>>], instance: &Instance) -> AdpWeights {
    let (horizon, ns, m) = (instance.horizon(), instance.num_states(), instance.m());
    let mut weights = AdpWeights::zeros(horizon, ns, m);
    let users: Vec<Vec<usize>> = (0..m).map(|i| instance.consumers_of(i)).collect();
    for t in 0..=horizon {
        for s in 0..ns {
            weights.theta[t][s] = nu[t].iter().map(|row| row[s]).sum();
            for i in 0..m {
                let cap = instance.resources[i].capacity;
                if cap > 0 {
                    weights.beta[t][s][i] = users[i].iter().map(|&j| nu[t][j][s]).sum::<f64>() / cap as f64;
                }
            }
        }
    }
    weights
}

/// Serve iff feasible and r ≥ E Σ_i a_i β^{t+1}_i(s').
pub fn decide_adp_heuristic(weights: &AdpWeights, instance: &Instance, t: usize, s: usize, c: &[u32]) -> Decision {
    let Some(j) = instance.arrival.state_type[s] else { return Decision::NOOP };
    let ty = &instance.types[j];
    let feasible = fits(c, &ty.consumes);
    let opp: f64 = ty
        .consumes
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == 1)
        .map(|(i, _)| instance.arrival.expect(t, s, |s2| weights.beta[t + 1][s2][i]))
        .sum();
    Decision { serve: feasible && ty.reward >= opp, opportunity_cost: opp, feasible }
}

pub fn decide_greedy(instance: &Instance, _t: usize, s: usize, c: &[u32]) -> Decision {
    let Some(j) = instance.arrival.state_type[s] else { return Decision::NOOP };
    let ty = &instance.types[j];
    let feasible = fits(c, &ty.consumes);
    Decision { serve: feasible && ty.reward > 0.0, opportunity_cost: 0.0, feasible }
}

/// A deterministic accept/reject rule over (period, arrival state, capacities).
pub trait Policy: Sync {
    fn decide(&self, t: usize, s: usize, c: &[u32]) -> Decision;
}

impl<F: Fn(usize, usize, &[u32]) -> Decision + Sync> Policy for F {
    fn decide(&self, t: usize, s: usize, c: &[u32]) -> Decision {
        self(t, s, c)
    }
}

pub struct BidPricePolicy<'a> {
    pub table: BidPriceTable,
    pub instance: &'a Instance,
}

impl<'a> BidPricePolicy<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        BidPricePolicy { table: compute_bid_prices(instance), instance }
    }
}

impl Policy for BidPricePolicy<'_> {
    fn decide(&self, t: usize, s: usize, c: &[u32]) -> Decision {
        decide_bid_price(&self.table, self.instance, t, s, c)
    }
}

pub struct AdpHeuristicPolicy<'a> {
    pub weights: AdpWeights,
    pub instance: &'a Instance,
}

impl Policy for AdpHeuristicPolicy<'_> {
    fn decide(&self, t: usize, s: usize, c: &[u32]) -> Decision {
        decide_adp_heuristic(&self.weights, self.instance, t, s, c)
    }
}

pub struct GreedyPolicy<'a>(pub &'a Instance);

impl Policy for GreedyPolicy<'_> {
    fn decide(&self, t: usize, s: usize, c: &[u32]) -> Decision {
        decide_greedy(self.0, t, s, c)
    }
}

pub struct NeverServe;

impl Policy for NeverServe {
    fn decide(&self, _t: usize, _s: usize, _c: &[u32]) -> Decision {
        Decision { serve: false, opportunity_cost: 0.0, feasible: true }
    }
}
