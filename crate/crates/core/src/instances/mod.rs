//! Instance sources: hand fixtures, arrival encodings, random and airline generators.

mod airline;
mod io;

pub use airline::{airline_horizon, gen_airline, AirlineConfig, Setting, DEFAULT_CAPACITY_KAPPA};
pub use io::{from_json, read_instance, to_json, write_instance, SCHEMA_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::model::{CustomerType, Instance, MarkovArrival, Resource, ROW_REJECT_TOL};

/// Two alternating customers competing for one seat: type 0 pays 5, type 1
/// pays 2, and whoever shows up first is followed by the other.
pub fn tiny1() -> Instance {
    Instance {
        resources: vec![Resource { name: "seat".into(), capacity: 1 }],
        types: vec![
            CustomerType { reward: 5.0, consumes: vec![1] },
            CustomerType { reward: 2.0, consumes: vec![1] },
        ],
        arrival: MarkovArrival {
            horizon: 2,
            state_names: vec!["A".into(), "B".into()],
            initial: vec![0.5, 0.5],
            transitions: vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            state_type: vec![Some(0), Some(1)],
        },
        choice: None,
    }
}

/// Random total demand through per-period survival rates.
///
/// `rho[t]` is the probability that another customer follows the one seen in
/// period `t`; `lambdas[t]` is the type mix of a period-`t` arrival.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSpec {
    pub rho: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
}

fn check_lambdas(lambdas: &[Vec<f64>], n: usize) -> Result<()> {
    if lambdas.is_empty() {
        return Err(NrmError::Generation("need at least one period of type probabilities".into()));
    }
    for (t, row) in lambdas.iter().enumerate() {
        if row.len() != n {
            return Err(NrmError::Generation(format!("lambda row {t} has {} entries for {n} types", row.len())));
        }
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(NrmError::Generation(format!("lambda row {t} has entries outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_REJECT_TOL {
            return Err(NrmError::Generation(format!("lambda row {t} sums to {sum}")));
        }
    }
    Ok(())
}

/// States are {0} ∪ {1..=n}: state 0 means demand has run out (absorbing,
/// no arrival) and state k carries type k-1.
pub fn encode_high_variance(spec: &SurvivalSpec, types: Vec<CustomerType>, resources: Vec<Resource>) -> Result<Instance> {
    let n = types.len();
    check_lambdas(&spec.lambdas, n)?;
    let horizon = spec.lambdas.len();
    if spec.rho.len() + 1 != horizon {
        return Err(NrmError::Generation(format!(
            "{} survival rates for a horizon of {horizon}; expected {}",
            spec.rho.len(),
            horizon - 1
        )));
    }
    if let Some(r) = spec.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(NrmError::Generation(format!("survival rate {r} outside [0, 1]")));
    }

    let ns = n + 1;
    let mut initial = vec![0.0; ns];
    initial[1..].copy_from_slice(&spec.lambdas[0]);

    let transitions = (0..horizon - 1)
        .map(|t| {
            let rho = spec.rho[t];
            let mut typed = vec![0.0; ns];
            typed[0] = 1.0 - rho;
            for (j, &lam) in spec.lambdas[t + 1].iter().enumerate() {
                typed[j + 1] = rho * lam;
            }
            let mut absorbing = vec![0.0; ns];
            absorbing[0] = 1.0;
            std::iter::once(absorbing).chain(std::iter::repeat(typed).take(n)).collect()
        })
        .collect();

    let mut state_type = vec![None];
    state_type.extend((0..n).map(Some));
    let inst = Instance {
        resources,
        types,
        arrival: MarkovArrival {
            horizon,
            state_names: (0..ns).map(|s| s.to_string()).collect(),
            initial,
            transitions,
            state_type,
        },
        choice: None,
    };
    inst.validated()
}

/// Independent arrivals: one state per type and state-independent rows.
pub fn encode_independent(lambdas: &[Vec<f64>], types: Vec<CustomerType>, resources: Vec<Resource>) -> Result<Instance> {
    let n = types.len();
    check_lambdas(lambdas, n)?;
    let horizon = lambdas.len();
    let transitions = (0..horizon - 1).map(|t| vec![lambdas[t + 1].clone(); n]).collect();
    let inst = Instance {
        resources,
        types,
        arrival: MarkovArrival {
            horizon,
            state_names: (0..n).map(|j| format!("type{j}")).collect(),
            initial: lambdas[0].clone(),
            transitions,
            state_type: (0..n).map(Some).collect(),
        },
        choice: None,
    };
    inst.validated()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomBounds {
    pub max_m: usize,
    pub max_n: usize,
    pub max_horizon: usize,
    pub max_states: usize,
    pub max_capacity: u32,
}

impl RandomBounds {
    pub fn new(max_m: usize, max_n: usize, max_horizon: usize, max_states: usize, max_capacity: u32) -> Self {
        RandomBounds { max_m, max_n, max_horizon, max_states, max_capacity }
    }
}

/// Random probability vector with occasional exact zeros.
pub(crate) fn random_distribution(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..len)] = 1.0;
    }
    let sum: f64 = w.iter().sum();
    w.iter().map(|x| x / sum).collect()
}

/// Small random instance within `bounds`; the property-test workhorse.
pub fn gen_random_small(seed: u64, bounds: RandomBounds) -> Instance {
    assert!(
        bounds.max_m >= 1 && bounds.max_n >= 1 && bounds.max_horizon >= 1 && bounds.max_states >= 1 && bounds.max_capacity >= 1,
        "random bounds must be at least 1"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=bounds.max_m);
    let n = rng.gen_range(1..=bounds.max_n);
    let horizon = rng.gen_range(1..=bounds.max_horizon);
    let ns = rng.gen_range(1..=bounds.max_states);

    let resources = (0..m)
        .map(|i| Resource { name: format!("r{i}"), capacity: rng.gen_range(1..=bounds.max_capacity) })
        .collect();
    let types = (0..n)
        .map(|_| CustomerType {
            reward: rng.gen_range(0.0..10.0),
            consumes: (0..m).map(|_| rng.gen_bool(0.5) as u8).collect(),
        })
        .collect();
    let state_type = (0..ns)
        .map(|_| if rng.gen_bool(0.15) { None } else { Some(rng.gen_range(0..n)) })
        .collect();
    let initial = random_distribution(&mut rng, ns);
    let transitions = (0..horizon - 1)
        .map(|_| (0..ns).map(|_| random_distribution(&mut rng, ns)).collect())
        .collect();

    Instance {
        resources,
        types,
        arrival: MarkovArrival {
            horizon,
            state_names: (0..ns).map(|s| format!("s{s}")).collect(),
            initial,
            transitions,
            state_type,
        },
        choice: None,
    }
}
