//! Seeded Monte-Carlo evaluation of policies.
//!
//! Randomness comes from splitmix64: replication r of a run with base seed b
//! uses the stream seeded by splitmix64(b ^ r), so replications can be run in
//! any order (or in parallel) and still produce identical results.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assortment::{AssortmentPolicy, ChoiceModel};
use crate::error::{NrmError, Result};
use crate::model::{fits, Instance, MarkovArrival};
use crate::policies::Policy;

pub const GENERATOR_ID: &str = "splitmix64";

/// Separates the purchase-sampling stream from the arrival stream.
const CHOICE_SALT: u64 = 0x5bd1_e995_0c0f_fee5;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-style uniform stream: the k-th draw is splitmix64(seed + k·γ).
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = splitmix64(self.state);
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        out
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Index drawn by inverse CDF; rounding slack falls on the last positive entry.
fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub seed: u64,
}

pub fn sample_trajectory(arrival: &MarkovArrival, seed: u64) -> Trajectory {
    let mut rng = SplitMix64::new(seed);
    let mut states = Vec::with_capacity(arrival.horizon);
    if arrival.horizon > 0 {
        let mut s = inverse_cdf(&arrival.initial, rng.uniform());
        states.push(s);
        for mat in arrival.transitions.iter().take(arrival.horizon - 1) {
            s = inverse_cdf(&mat[s], rng.uniform());
            states.push(s);
        }
    }
    Trajectory { states, seed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub state: usize,
    /// Served type (accept/reject) or purchased product minus one (assortment); `None` if nothing sold.
    pub sold: Option<usize>,
    pub offered: Option<Vec<usize>>,
    pub capacity_after: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub reward: f64,
    pub trace: Vec<Step>,
}

fn consume(c: &mut [u32], a: &[u8]) {
    for (ci, &ai) in c.iter_mut().zip(a) {
        *ci -= ai as u32;
    }
}

pub fn run_policy(instance: &Instance, policy: &dyn Policy, traj: &Trajectory) -> Result<RunOutcome> {
    let mut c = instance.capacities();
    let mut reward = 0.0;
    let mut trace = Vec::with_capacity(traj.states.len());
    for (t, &s) in traj.states.iter().enumerate() {
        let mut sold = None;
        if let Some(j) = instance.arrival.state_type[s] {
            if policy.decide(t, s, &c).serve {
                let ty = &instance.types[j];
                if !fits(&c, &ty.consumes) {
                    return Err(NrmError::InfeasibleAction(format!("served type {j} at period {t} with capacities {c:?}")));
                }
                consume(&mut c, &ty.consumes);
                reward += ty.reward;
                sold = Some(j);
            }
        }
        trace.push(Step { t, state: s, sold, offered: None, capacity_after: c.clone() });
    }
    Ok(RunOutcome { reward, trace })
}

/// Assortment run: the customer's pick is drawn from φ(offered, s) with a
/// second stream derived from the trajectory seed.
pub fn run_assort_policy(
    instance: &Instance,
    choice: &ChoiceModel,
    policy: &dyn AssortmentPolicy,
    traj: &Trajectory,
) -> Result<RunOutcome> {
    let mut rng = SplitMix64::new(splitmix64(traj.seed ^ CHOICE_SALT));
    let mut c = instance.capacities();
    let mut reward = 0.0;
    let mut trace = Vec::with_capacity(traj.states.len());
    for (t, &s) in traj.states.iter().enumerate() {
        let set = policy.offer(t, s, &c);
        if set.first() != Some(&0) || set.iter().any(|&j| j > 0 && !fits(&c, &instance.types[j - 1].consumes)) {
            return Err(NrmError::InfeasibleAction(format!("offered {set:?} at period {t} with capacities {c:?}")));
        }
        let probs = choice.choice_probs(s, &set)?;
        let pick = set[inverse_cdf(&probs, rng.uniform())];
        let mut sold = None;
        if pick > 0 {
            let ty = &instance.types[pick - 1];
            consume(&mut c, &ty.consumes);
            reward += ty.reward;
            sold = Some(pick - 1);
        }
        trace.push(Step { t, state: s, sold, offered: Some(set), capacity_after: c.clone() });
    }
    Ok(RunOutcome { reward, trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub k: usize,
    pub base_seed: u64,
    pub generator: String,
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rewards: Vec<f64>,
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

impl SimResult {
    pub fn from_rewards(rewards: Vec<f64>, base_seed: u64) -> Self {
        let k = rewards.len();
        let mean = pairwise_sum(&rewards) / k as f64;
        let std_error = if k > 1 {
            let sq: Vec<f64> = rewards.iter().map(|r| (r - mean).powi(2)).collect();
            (pairwise_sum(&sq) / (k - 1) as f64).sqrt() / (k as f64).sqrt()
        } else {
            0.0
        };
        SimResult {
            k,
            base_seed,
            generator: GENERATOR_ID.into(),
            mean,
            std_error,
            ci_low: mean - 1.96 * std_error,
            ci_high: mean + 1.96 * std_error,
            rewards,
        }
    }
}

pub fn replication_seed(base_seed: u64, r: usize) -> u64 {
    splitmix64(base_seed ^ r as u64)
}

fn check_reps(k: usize) -> Result<()> {
    if k == 0 {
        return Err(NrmError::Invalid("need at least one replication".into()));
    }
    Ok(())
}

pub fn monte_carlo(instance: &Instance, policy: &dyn Policy, k: usize, base_seed: u64) -> Result<SimResult> {
    check_reps(k)?;
    let rewards = (0..k)
        .into_par_iter()
        .map(|r| {
            let traj = sample_trajectory(&instance.arrival, replication_seed(base_seed, r));
            run_policy(instance, policy, &traj).map(|o| o.reward)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimResult::from_rewards(rewards, base_seed))
}

pub fn monte_carlo_assort(
    instance: &Instance,
    choice: &ChoiceModel,
    policy: &dyn AssortmentPolicy,
    k: usize,
    base_seed: u64,
) -> Result<SimResult> {
    check_reps(k)?;
    let rewards = (0..k)
        .into_par_iter()
        .map(|r| {
            let traj = sample_trajectory(&instance.arrival, replication_seed(base_seed, r));
            run_assort_policy(instance, choice, policy, &traj).map(|o| o.reward)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimResult::from_rewards(rewards, base_seed))
}

/// One row per (replication, period): rep,t,state,sold,offered,capacities.
pub fn trace_csv(outcomes: &[RunOutcome]) -> String {
    let mut out = String::from("rep,t,state,sold,offered,capacity\n");
    for (r, o) in outcomes.iter().enumerate() {
        for st in &o.trace {
            let sold = st.sold.map(|j| j.to_string()).unwrap_or_default();
            let offered = st.offered.as_ref().map(|a| join(a, " ")).unwrap_or_default();
            let _ = writeln!(out, "{r},{},{},{sold},{offered},{}", st.t, st.state, join(&st.capacity_after, " "));
        }
    }
    out
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}
