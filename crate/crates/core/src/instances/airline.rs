//! Hub-and-spoke airline network: one hub, four spokes, eight legs, twenty
//! origin–destination pairs, and a low/high fare class per pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{NrmError, Result};
use crate::model::{state_marginals, CustomerType, Instance, MarkovArrival, Resource};

const SPOKES: usize = 4;
const LOCATIONS: usize = SPOKES + 1;
const HUB: usize = 0;

/// Horizons listed next to the standard (mu, sigma) experiment grid. Only
/// (40, 10) agrees with the 0.9-quantile rule; the rest are kept to flag the
/// disagreement, never to override it.
const TABULATED_HORIZONS: [((f64, f64), usize); 7] = [
    ((30.0, 15.0), 56),
    ((40.0, 15.0), 66),
    ((50.0, 15.0), 76),
    ((60.0, 15.0), 86),
    ((40.0, 10.0), 53),
    ((40.0, 25.0), 79),
    ((40.0, 30.0), 92),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Arrivals independent of the previous customer (beyond survival).
    A,
    /// Next OD pair drawn conditionally on the previous one.
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirlineConfig {
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
    pub capacity_kappa: f64,
    pub horizon_override: Option<usize>,
}

/// Leg capacity as a multiple of expected leg demand. At 1.25 the LP bounds
/// land on the scale of the published experiment tables.
pub const DEFAULT_CAPACITY_KAPPA: f64 = 1.25;

impl AirlineConfig {
    pub fn new(mu: f64, sigma: f64, seed: u64) -> Self {
        AirlineConfig { mu, sigma, seed, capacity_kappa: DEFAULT_CAPACITY_KAPPA, horizon_override: None }
    }
}

/// Smallest T with P(D <= T) >= 0.9 for D ~ Normal(mu, sigma).
pub fn airline_horizon(mu: f64, sigma: f64) -> Result<usize> {
    let normal = Normal::new(mu, sigma).map_err(|e| NrmError::Generation(format!("demand distribution: {e}")))?;
    let mut t = 1usize;
    while normal.cdf(t as f64) < 0.9 {
        t += 1;
    }
    Ok(t)
}

fn od_pairs() -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(LOCATIONS * SPOKES);
    for o in 0..LOCATIONS {
        for d in 0..LOCATIONS {
            if o != d {
                out.push((o, d));
            }
        }
    }
    out
}

/// Legs 0..4 fly spoke k+1 -> hub, legs 4..8 fly hub -> spoke k+1.
fn legs_used(o: usize, d: usize) -> Vec<u8> {
    let mut a = vec![0u8; 2 * SPOKES];
    if o != HUB {
        a[o - 1] = 1;
    }
    if d != HUB {
        a[SPOKES + d - 1] = 1;
    }
    a
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x / sum).collect()
}

pub fn gen_airline(setting: Setting, config: &AirlineConfig) -> Result<Instance> {
    if !(config.sigma > 0.0) {
        return Err(NrmError::Generation(format!("sigma must be positive, got {}", config.sigma)));
    }
    if !(config.capacity_kappa > 0.0) {
        return Err(NrmError::Generation(format!("capacity kappa must be positive, got {}", config.capacity_kappa)));
    }
    let rule = airline_horizon(config.mu, config.sigma)?;
    let horizon = config.horizon_override.unwrap_or(rule);
    if horizon == 0 {
        return Err(NrmError::Generation("horizon override must be at least 1".into()));
    }
    if config.horizon_override.is_none() {
        if let Some(&(_, listed)) = TABULATED_HORIZONS
            .iter()
            .find(|((mu, sigma), _)| *mu == config.mu && *sigma == config.sigma)
        {
            if listed != rule {
                log::warn!(
                    "(mu, sigma) = ({}, {}): quantile rule gives T={rule}, the tabulated horizon is {listed}; using {rule} (set a horizon override to change)",
                    config.mu,
                    config.sigma
                );
            }
        }
    }

    let normal = Normal::new(config.mu, config.sigma).expect("validated above");
    // survival[t] = P(D >= t + 1) for 0-based period t
    let survival: Vec<f64> = (1..=horizon).map(|t| (1.0 - normal.cdf(t as f64)).clamp(0.0, 1.0)).collect();
    let rho: Vec<f64> = (0..horizon - 1)
        .map(|t| if survival[t] > 0.0 { (survival[t + 1] / survival[t]).clamp(0.0, 1.0) } else { 0.0 })
        .collect();

    let ods = od_pairs();
    let n_od = ods.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let low: Vec<f64> = (0..n_od).map(|_| rng.gen::<f64>()).collect();
    let mut types = Vec::with_capacity(2 * n_od);
    for (k, &(o, d)) in ods.iter().enumerate() {
        let a = legs_used(o, d);
        types.push(CustomerType { reward: low[k], consumes: a.clone() });
        types.push(CustomerType { reward: 2.0 * low[k], consumes: a });
    }

    // OD mix per period (Setting A), and per (previous OD, period) for Setting B.
    let od_mix: Vec<Vec<f64>> = (0..horizon).map(|_| normalized((0..n_od).map(|_| rng.gen()).collect())).collect();
    let cond_mix: Vec<Vec<Vec<f64>>> = match setting {
        Setting::A => Vec::new(),
        Setting::B => (1..horizon)
            .map(|_| (0..n_od).map(|_| normalized((0..n_od).map(|_| rng.gen()).collect())).collect())
            .collect(),
    };

    // Later customers lean towards the high fare.
    let high_share = |t: usize| 0.5 + (t + 1) as f64 / (2.0 * horizon as f64);
    let type_mix = |od: &[f64], t: usize| -> Vec<f64> {
        let h = high_share(t);
        let mut out = vec![0.0; 1 + 2 * n_od];
        for (k, &p) in od.iter().enumerate() {
            out[1 + 2 * k] = p * (1.0 - h);
            out[2 + 2 * k] = p * h;
        }
        out
    };

    let ns = 1 + 2 * n_od;
    let initial = type_mix(&od_mix[0], 0);
    let mut transitions = Vec::with_capacity(horizon - 1);
    for t in 0..horizon - 1 {
        let mut absorbing = vec![0.0; ns];
        absorbing[0] = 1.0;
        let mut mat = vec![absorbing];
        for s in 1..ns {
            let prev_od = (s - 1) / 2;
            let od = match setting {
                Setting::A => &od_mix[t + 1],
                Setting::B => &cond_mix[t][prev_od],
            };
            let mut row = type_mix(od, t + 1);
            for p in row.iter_mut() {
                *p *= rho[t];
            }
            row[0] = 1.0 - rho[t];
            mat.push(row);
        }
        transitions.push(mat);
    }

    let mut state_names = vec!["none".to_string()];
    let mut state_type = vec![None];
    for (k, &(o, d)) in ods.iter().enumerate() {
        for (f, fare) in ["low", "high"].iter().enumerate() {
            state_names.push(format!("{o}-{d}:{fare}"));
            state_type.push(Some(2 * k + f));
        }
    }

    let arrival = MarkovArrival { horizon, state_names, initial, transitions, state_type };

    // Capacity follows expected leg demand.
    let marg = state_marginals(&arrival);
    let n_legs = 2 * SPOKES;
    let mut load = vec![0.0; n_legs];
    for row in &marg {
        for (s, &p) in row.iter().enumerate() {
            if let Some(j) = arrival.state_type[s] {
                for (i, l) in load.iter_mut().enumerate() {
                    *l += p * types[j].consumes[i] as f64;
                }
            }
        }
    }
    let resources = (0..n_legs)
        .map(|i| {
            let name = if i < SPOKES { format!("{}-{HUB}", i + 1) } else { format!("{HUB}-{}", i - SPOKES + 1) };
            let cap = (config.capacity_kappa * load[i]).ceil().max(1.0) as u32;
            Resource { name, capacity: cap }
        })
        .collect();

    Instance { resources, types, arrival, choice: None }.validated()
}
