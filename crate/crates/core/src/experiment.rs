//! The hub-and-spoke experiment grid: LP bound, bid-price and ADP-heuristic
//! policies, simulated with common random numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::{gen_airline, AirlineConfig, Setting};
use crate::lp::solve_adp_bound;
use crate::policies::{AdpHeuristicPolicy, BidPricePolicy};
use crate::simulate::{monte_carlo, splitmix64};

/// (mu, sigma) of the demand distribution, in table order.
pub const TABLE_CONFIGS: [(f64, f64); 8] = [
    (30.0, 15.0),
    (40.0, 15.0),
    (50.0, 15.0),
    (60.0, 15.0),
    (40.0, 10.0),
    (40.0, 15.0),
    (40.0, 25.0),
    (40.0, 30.0),
];

pub const DEFAULT_REPS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub mu: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub upper_bound: f64,
    pub bbp: f64,
    pub adp: f64,
    /// (UB - policy) / UB, as a fraction.
    pub bbp_gap: f64,
    pub adp_gap: f64,
    pub bbp_se: f64,
    pub adp_se: f64,
}

pub fn gap(upper: f64, value: f64) -> f64 {
    if upper == 0.0 {
        0.0
    } else {
        (upper - value) / upper
    }
}

/// Instance seed of row `k`; rows draw fresh fares and mixes.
pub fn config_seed(seed: u64, k: usize) -> u64 {
    splitmix64(seed ^ (k as u64).wrapping_mul(0x1000_0001))
}

pub fn run_config(setting: Setting, config: &AirlineConfig, reps: usize, sim_seed: u64) -> Result<ExperimentRow> {
    let instance = gen_airline(setting, config)?;
    let (upper_bound, weights) = solve_adp_bound(&instance)?;
    let bbp = monte_carlo(&instance, &BidPricePolicy::new(&instance), reps, sim_seed)?;
    let adp = monte_carlo(&instance, &AdpHeuristicPolicy { weights, instance: &instance }, reps, sim_seed)?;
    Ok(ExperimentRow {
        mu: config.mu,
        sigma: config.sigma,
        horizon: instance.horizon(),
        upper_bound,
        bbp: bbp.mean,
        adp: adp.mean,
        bbp_gap: gap(upper_bound, bbp.mean),
        adp_gap: gap(upper_bound, adp.mean),
        bbp_se: bbp.std_error,
        adp_se: adp.std_error,
    })
}

pub fn reproduce(setting: Setting, seed: u64, reps: usize, kappa: f64) -> Result<Vec<ExperimentRow>> {
    TABLE_CONFIGS
        .par_iter()
        .enumerate()
        .map(|(k, &(mu, sigma))| {
            let mut config = AirlineConfig::new(mu, sigma, config_seed(seed, k));
            config.capacity_kappa = kappa;
            run_config(setting, &config, reps, seed)
        })
        .collect()
}

/// `x` rounded to six significant digits, in plain notation.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let mag = rounded.abs().log10().floor() as i32;
    let prec = (5 - mag).max(0) as usize;
    format!("{rounded:.prec$}")
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("mu,sigma,T,upper_bound,bbp,adp,bbp_gap,adp_gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sig6(r.mu),
            sig6(r.sigma),
            r.horizon,
            sig6(r.upper_bound),
            sig6(r.bbp),
            sig6(r.adp),
            sig6(r.bbp_gap),
            sig6(r.adp_gap)
        ));
    }
    out
}

pub fn average_bbp_gap(rows: &[ExperimentRow]) -> f64 {
    rows.iter().map(|r| r.bbp_gap).sum::<f64>() / rows.len() as f64
}
