//! Assortment offers: the customer in state s picks one product from the
//! offered set A with probability φ_j(A, s).
//!
//! Product indices follow the choice-model convention: product 0 is "no
//! purchase" (no reward, no capacity) and product k >= 1 is customer type k-1
//! of the instance.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::instances::random_distribution;
use crate::model::{fits, CustomerType, Instance, MarkovArrival, Resource};
use crate::policies::expected_resource_bids;

/// Largest family enumerated per state before we refuse (or use the MNL shortcut).
pub const DEFAULT_FAMILY_CAP: usize = 4096;

const PROB_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllSubsets {
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Family {
    /// Every subset of the products (plus product 0).
    All(AllSubsets),
    /// Sorted index lists, each starting with 0.
    Explicit(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phi {
    /// `table[s][a][k]`: probability of the k-th member of family entry a.
    Table(Vec<Vec<Vec<f64>>>),
    /// `weights[s][j]` for j = 0..=n; φ_j(A,s) = v_j / (v_0 + Σ_{A∖0} v).
    Mnl { weights: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceModel {
    pub family: Family,
    pub phi: Phi,
}

/// Family enumerated in lexicographic order with φ laid out per state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedChoice {
    pub sets: Vec<Vec<usize>>,
    /// `probs[s][a][k]`, aligned with `sets[a][k]`.
    pub probs: Vec<Vec<Vec<f64>>>,
    index: HashMap<Vec<usize>, usize>,
}

impl ExpandedChoice {
    pub fn position(&self, set: &[usize]) -> Option<usize> {
        self.index.get(set).copied()
    }
}

fn mnl_probs(weights: &[f64], set: &[usize]) -> Vec<f64> {
    let denom = weights[0] + set.iter().filter(|&&j| j > 0).map(|&j| weights[j]).sum::<f64>();
    set.iter().map(|&j| weights[j] / denom).collect()
}

fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (0u64..1 << n)
        .map(|mask| std::iter::once(0).chain((0..n).filter(|b| mask >> b & 1 == 1).map(|b| b + 1)).collect())
        .collect()
}

impl ChoiceModel {
    pub fn mnl_all(weights: Vec<Vec<f64>>) -> Self {
        ChoiceModel { family: Family::All(AllSubsets::All), phi: Phi::Mnl { weights } }
    }

    fn family_size(&self, n: usize) -> u128 {
        match &self.family {
            Family::All(_) => 1u128 << n.min(127),
            Family::Explicit(sets) => sets.len() as u128,
        }
    }

    /// Enumerate F (at most `cap` members) with choice probabilities.
    pub fn expand(&self, instance: &Instance, cap: usize) -> Result<ExpandedChoice> {
        let n = instance.n();
        let size = self.family_size(n);
        if size > cap as u128 {
            return Err(NrmError::FamilyTooLarge { size: size.min(usize::MAX as u128) as usize, cap });
        }
        let sets = match &self.family {
            Family::All(_) => all_subsets(n),
            Family::Explicit(sets) => sets.clone(),
        };
        let ns = instance.num_states();
        let probs: Vec<Vec<Vec<f64>>> = (0..ns)
            .map(|s| {
                sets.iter()
                    .enumerate()
                    .map(|(a, set)| match &self.phi {
                        Phi::Table(table) => table[s][a].clone(),
                        Phi::Mnl { weights } => mnl_probs(&weights[s], set),
                    })
                    .collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..sets.len()).collect();
        order.sort_by(|&a, &b| sets[a].cmp(&sets[b]));
        let sorted_sets: Vec<Vec<usize>> = order.iter().map(|&a| sets[a].clone()).collect();
        let sorted_probs = probs.into_iter().map(|ps| order.iter().map(|&a| ps[a].clone()).collect()).collect();
        let index = sorted_sets.iter().enumerate().map(|(a, set)| (set.clone(), a)).collect();
        Ok(ExpandedChoice { sets: sorted_sets, probs: sorted_probs, index })
    }

    /// φ(A, s) for one assortment, aligned with `set`.
    pub fn choice_probs(&self, s: usize, set: &[usize]) -> Result<Vec<f64>> {
        match (&self.phi, &self.family) {
            (Phi::Mnl { weights }, _) => Ok(mnl_probs(&weights[s], set)),
            (Phi::Table(table), Family::Explicit(sets)) => sets
                .iter()
                .position(|x| x.as_slice() == set)
                .map(|a| table[s][a].clone())
                .ok_or_else(|| NrmError::Invalid(format!("assortment {set:?} is not in the family"))),
            (Phi::Table(table), Family::All(_)) => {
                let mask = set.iter().filter(|&&j| j > 0).fold(0usize, |m, &j| m | 1 << (j - 1));
                Ok(table[s][mask].clone())
            }
        }
    }
}

/// Structural problems with a choice block; reported through `validate`.
pub fn choice_errors(instance: &Instance, choice: &ChoiceModel) -> Vec<String> {
    let mut errs = Vec::new();
    let n = instance.n();
    let ns = instance.num_states();
    let sets: Vec<Vec<usize>> = match &choice.family {
        Family::All(_) if n > 20 => Vec::new(),
        Family::All(_) => all_subsets(n),
        Family::Explicit(sets) => {
            for set in sets {
                if set.first() != Some(&0) {
                    errs.push(format!("assortment {set:?} does not contain product 0"));
                } else if set.windows(2).any(|w| w[0] >= w[1]) {
                    errs.push(format!("assortment {set:?} is not strictly increasing"));
                } else if set.iter().any(|&j| j > n) {
                    errs.push(format!("assortment {set:?} names a product beyond {n}"));
                }
            }
            if !sets.iter().any(|set| set.as_slice() == [0]) {
                errs.push("family lacks the no-purchase assortment {0}".into());
            }
            sets.clone()
        }
    };
    if !errs.is_empty() {
        return errs;
    }
    match &choice.phi {
        Phi::Mnl { weights } => {
            if weights.len() != ns {
                errs.push(format!("MNL weights given for {} states, expected {ns}", weights.len()));
            }
            for (s, w) in weights.iter().enumerate() {
                if w.len() != n + 1 {
                    errs.push(format!("MNL weights of state {s} have {} entries, expected {}", w.len(), n + 1));
                } else if w.iter().any(|v| !v.is_finite() || *v < 0.0) || !(w[0] > 0.0) {
                    errs.push(format!("MNL weights of state {s} must be nonnegative with a positive no-purchase weight"));
                }
            }
        }
        Phi::Table(table) => {
            if table.len() != ns {
                errs.push(format!("choice table covers {} states, expected {ns}", table.len()));
                return errs;
            }
            for (s, per_set) in table.iter().enumerate() {
                if per_set.len() != sets.len() {
                    errs.push(format!("choice table of state {s} has {} assortments, family has {}", per_set.len(), sets.len()));
                    continue;
                }
                for (set, probs) in sets.iter().zip(per_set) {
                    if probs.len() != set.len() {
                        errs.push(format!("state {s}, assortment {set:?}: {} probabilities for {} products", probs.len(), set.len()));
                    } else if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        errs.push(format!("state {s}, assortment {set:?}: probability outside [0, 1]"));
                    } else {
                        let sum: f64 = probs.iter().sum();
                        if (sum - 1.0).abs() > PROB_TOL {
                            errs.push(format!("state {s}, assortment {set:?}: choice probabilities sum to {sum}"));
                        }
                    }
                }
            }
        }
    }
    errs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutabilityReport {
    pub ok: bool,
    pub violation: Option<String>,
}

/// Exhaustive check of the substitution inequalities and downward closure.
pub fn check_substitutability(choice: &ChoiceModel, instance: &Instance) -> Result<SubstitutabilityReport> {
    let ex = choice.expand(instance, DEFAULT_FAMILY_CAP)?;
    let n = instance.n();
    let fail = |msg: String| Ok(SubstitutabilityReport { ok: false, violation: Some(msg) });
    for set in &ex.sets {
        for (k, &j) in set.iter().enumerate().skip(1) {
            let mut smaller = set.clone();
            smaller.remove(k);
            if ex.position(&smaller).is_none() {
                return fail(format!("family is not downward closed: {set:?} is present but {smaller:?} (without {j}) is not"));
            }
        }
    }
    for s in 0..instance.num_states() {
        for (a, set) in ex.sets.iter().enumerate() {
            for extra in 1..=n {
                if set.contains(&extra) {
                    continue;
                }
                let mut bigger = set.clone();
                bigger.push(extra);
                bigger.sort_unstable();
                let Some(b) = ex.position(&bigger) else { continue };
                for (k, &j) in set.iter().enumerate() {
                    let before = ex.probs[s][a][k];
                    let kb = bigger.iter().position(|&x| x == j).expect("superset");
                    let after = ex.probs[s][b][kb];
                    if after > before + 1e-12 {
                        return fail(format!(
                            "state {s}: adding product {extra} to {set:?} raises the choice probability of product {j} from {before} to {after}"
                        ));
                    }
                }
            }
        }
    }
    Ok(SubstitutabilityReport { ok: true, violation: None })
}

/// Value of offering `set` at adjusted rewards `zplus` (indexed by type).
#[inline]
fn adjusted_value(set: &[usize], probs: &[f64], zplus: &[f64]) -> f64 {
    set.iter().zip(probs).filter(|(&j, _)| j > 0).map(|(&j, &p)| p * zplus[j - 1]).sum()
}

/// First (lexicographically smallest) maximiser over the expanded family.
pub(crate) fn argmax_enumerate(ex: &ExpandedChoice, s: usize, zplus: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (a, set) in ex.sets.iter().enumerate() {
        let v = adjusted_value(set, &ex.probs[s][a], zplus);
        if v > best.1 {
            best = (a, v);
        }
    }
    best
}

/// Revenue-ordered search for MNL over all subsets: the optimum is a prefix
/// of the products sorted by adjusted reward.
pub fn argmax_revenue_ordered(weights: &[f64], zplus: &[f64]) -> (Vec<usize>, f64) {
    let mut order: Vec<usize> = (0..zplus.len()).filter(|&j| zplus[j] > 0.0).collect();
    order.sort_by(|&a, &b| zplus[b].total_cmp(&zplus[a]).then(a.cmp(&b)));
    let mut best_set = vec![0];
    let mut best = 0.0;
    let (mut num, mut den) = (0.0, weights[0]);
    for (k, &j) in order.iter().enumerate() {
        num += weights[j + 1] * zplus[j];
        den += weights[j + 1];
        let v = num / den;
        let mut cand: Vec<usize> = std::iter::once(0).chain(order[..=k].iter().map(|&j| j + 1)).collect();
        cand.sort_unstable();
        if v > best || (v == best && cand < best_set) {
            best = v;
            best_set = cand;
        }
    }
    (best_set, best)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArgmaxStrategy {
    /// Enumerate when F fits under the cap, else use the MNL shortcut if it applies.
    #[default]
    Auto,
    Enumerate,
    RevenueOrdered,
}

/// Positive parts of r_j - opp_j(t, s) for every product, given ν^{t+1}.
fn adjusted_rewards(instance: &Instance, t: usize, s: usize, nu_next: &[Vec<f64>]) -> Vec<f64> {
    let eb = expected_resource_bids(instance, t, s, nu_next);
    instance
        .types
        .iter()
        .map(|ty| {
            let opp: f64 = ty.consumes.iter().zip(&eb).filter(|(&a, _)| a == 1).map(|(_, b)| b).sum();
            (ty.reward - opp).max(0.0)
        })
        .collect()
}

struct Chooser<'a> {
    expanded: Option<ExpandedChoice>,
    mnl: Option<&'a [Vec<f64>]>,
}

impl<'a> Chooser<'a> {
    fn new(instance: &Instance, choice: &'a ChoiceModel, strategy: ArgmaxStrategy) -> Result<Self> {
        let mnl = match (&choice.family, &choice.phi) {
            (Family::All(_), Phi::Mnl { weights }) => Some(weights.as_slice()),
            _ => None,
        };
        let expanded = match strategy {
            ArgmaxStrategy::RevenueOrdered if mnl.is_some() => None,
            ArgmaxStrategy::RevenueOrdered => {
                return Err(NrmError::Invalid("revenue-ordered search needs MNL choice over all subsets".into()))
            }
            ArgmaxStrategy::Enumerate => Some(choice.expand(instance, DEFAULT_FAMILY_CAP)?),
            ArgmaxStrategy::Auto => match choice.expand(instance, DEFAULT_FAMILY_CAP) {
                Ok(ex) => Some(ex),
                Err(e) if mnl.is_none() => return Err(e),
                Err(_) => None,
            },
        };
        Ok(Chooser { expanded, mnl })
    }

    /// (Â, φ(Â, s), value)
    fn best(&self, s: usize, zplus: &[f64]) -> (Vec<usize>, Vec<f64>, f64) {
        match (&self.expanded, self.mnl) {
            (Some(ex), _) => {
                let (a, v) = argmax_enumerate(ex, s, zplus);
                (ex.sets[a].clone(), ex.probs[s][a].clone(), v)
            }
            (None, Some(w)) => {
                let (set, v) = argmax_revenue_ordered(&w[s], zplus);
                let probs = mnl_probs(&w[s], &set);
                (set, probs, v)
            }
            (None, None) => unreachable!("constructor guarantees one of the two"),
        }
    }
}

/// argmax over F of Σ_{j∈A} φ_j(A,s)[r_j − opp_j]⁺, with `nu_next[j][s']` = ν^{t+1}.
pub fn best_adjusted_assortment(
    instance: &Instance,
    choice: &ChoiceModel,
    t: usize,
    s: usize,
    nu_next: &[Vec<f64>],
    strategy: ArgmaxStrategy,
) -> Result<(Vec<usize>, f64)> {
    let chooser = Chooser::new(instance, choice, strategy)?;
    let zplus = adjusted_rewards(instance, t, s, nu_next);
    let (set, _, v) = chooser.best(s, &zplus);
    Ok((set, v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssortBidPriceTable {
    /// `nu[t][j][s]` for t in 0..=T.
    pub nu: Vec<Vec<Vec<f64>>>,
    /// Â_t(s) for t in 0..T.
    pub chosen: Vec<Vec<Vec<usize>>>,
}

impl AssortBidPriceTable {
    pub fn lower_bound_value(&self, instance: &Instance) -> f64 {
        instance
            .arrival
            .initial
            .iter()
            .enumerate()
            .map(|(s, &p)| p * self.nu[0].iter().map(|row| row[s]).sum::<f64>())
            .sum()
    }
}

/// Backward recursion with per-product increments φ_j(Â,s)[z_j]⁺ for j ∈ Â.
pub fn compute_assort_bid_prices(instance: &Instance, choice: &ChoiceModel) -> Result<AssortBidPriceTable> {
    compute_assort_bid_prices_with(instance, choice, ArgmaxStrategy::Auto)
}

pub fn compute_assort_bid_prices_with(
    instance: &Instance,
    choice: &ChoiceModel,
    strategy: ArgmaxStrategy,
) -> Result<AssortBidPriceTable> {
    let chooser = Chooser::new(instance, choice, strategy)?;
    let arr = &instance.arrival;
    let (horizon, ns, n) = (arr.horizon, arr.num_states(), instance.n());
    let mut nu = vec![vec![vec![0.0; ns]; n]; horizon + 1];
    let mut chosen = vec![vec![Vec::new(); ns]; horizon];
    for t in (0..horizon).rev() {
        let (head, tail) = nu.split_at_mut(t + 1);
        let next = &tail[0];
        let cur = &mut head[t];
        for s in 0..ns {
            let zplus = adjusted_rewards(instance, t, s, next);
            let (set, probs, _) = chooser.best(s, &zplus);
            for j in 0..n {
                cur[j][s] = arr.expect(t, s, |s2| next[j][s2]);
            }
            for (&prod, &p) in set.iter().zip(&probs) {
                if prod > 0 {
                    cur[prod - 1][s] += p * zplus[prod - 1];
                }
            }
            chosen[t][s] = set;
        }
    }
    Ok(AssortBidPriceTable { nu, chosen })
}

/// Â_t(s) restricted to products that still fit.
pub fn offer(table: &AssortBidPriceTable, instance: &Instance, t: usize, s: usize, c: &[u32]) -> Vec<usize> {
    table.chosen[t][s]
        .iter()
        .copied()
        .filter(|&j| j == 0 || fits(c, &instance.types[j - 1].consumes))
        .collect()
}

pub trait AssortmentPolicy: Sync {
    fn offer(&self, t: usize, s: usize, c: &[u32]) -> Vec<usize>;
}

impl<F: Fn(usize, usize, &[u32]) -> Vec<usize> + Sync> AssortmentPolicy for F {
    fn offer(&self, t: usize, s: usize, c: &[u32]) -> Vec<usize> {
        self(t, s, c)
    }
}

pub struct AssortBidPricePolicy<'a> {
    pub table: AssortBidPriceTable,
    pub instance: &'a Instance,
}

impl<'a> AssortBidPricePolicy<'a> {
    pub fn new(instance: &'a Instance, choice: &ChoiceModel) -> Result<Self> {
        Ok(AssortBidPricePolicy { table: compute_assort_bid_prices(instance, choice)?, instance })
    }
}

impl AssortmentPolicy for AssortBidPricePolicy<'_> {
    fn offer(&self, t: usize, s: usize, c: &[u32]) -> Vec<usize> {
        offer(&self.table, self.instance, t, s, c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssortBounds {
    pub max_m: usize,
    pub max_n: usize,
    pub max_family: usize,
    pub max_states: usize,
    pub max_horizon: usize,
    pub max_capacity: u32,
}

impl Default for AssortBounds {
    fn default() -> Self {
        AssortBounds { max_m: 2, max_n: 3, max_family: 8, max_states: 3, max_horizon: 4, max_capacity: 2 }
    }
}

/// Random instance whose choice model is a per-state mixture of MNLs (hence
/// substitutable) over a random downward-closed family.
pub fn gen_random_assortment(seed: u64, bounds: AssortBounds) -> Instance {
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

    // Downward closure of random product subsets, kept under the size bound.
    let mut family: Vec<Vec<usize>> = vec![vec![0]];
    for _ in 0..4 * n {
        let mask: usize = rng.gen_range(1..1usize << n);
        let closure: Vec<Vec<usize>> = (0..1usize << n)
            .filter(|sub| sub & !mask == 0)
            .map(|sub| std::iter::once(0).chain((0..n).filter(|b| sub >> b & 1 == 1).map(|b| b + 1)).collect())
            .collect();
        let mut merged = family.clone();
        for set in closure {
            if !merged.contains(&set) {
                merged.push(set);
            }
        }
        if merged.len() <= bounds.max_family {
            family = merged;
        }
    }
    family.sort();

    let table = (0..ns)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            let mix: Vec<Vec<f64>> = (0..k).map(|_| (0..=n).map(|_| rng.gen_range(0.05..1.0)).collect()).collect();
            let pi = random_distribution(&mut rng, k);
            family
                .iter()
                .map(|set| {
                    let mut probs = vec![0.0; set.len()];
                    for (w, &pk) in mix.iter().zip(&pi) {
                        for (p, q) in probs.iter_mut().zip(mnl_probs(w, set)) {
                            *p += pk * q;
                        }
                    }
                    let sum: f64 = probs.iter().sum();
                    probs.iter().map(|p| p / sum).collect()
                })
                .collect()
        })
        .collect();

    let initial = random_distribution(&mut rng, ns);
    let transitions = (0..horizon - 1).map(|_| (0..ns).map(|_| random_distribution(&mut rng, ns)).collect()).collect();
    Instance {
        resources,
        types,
        arrival: MarkovArrival {
            horizon,
            state_names: (0..ns).map(|s| format!("s{s}")).collect(),
            initial,
            transitions,
            state_type: vec![None; ns],
        },
        choice: Some(ChoiceModel { family: Family::Explicit(family), phi: Phi::Table(table) }),
    }
}

/// The two-product fixture: rewards (5, 2), one state, one period.
pub fn assortment_fixture(horizon: usize) -> Instance {
    Instance {
        resources: vec![Resource { name: "r".into(), capacity: 1 }],
        types: vec![
            CustomerType { reward: 5.0, consumes: vec![1] },
            CustomerType { reward: 2.0, consumes: vec![1] },
        ],
        arrival: MarkovArrival {
            horizon,
            state_names: vec!["s".into()],
            initial: vec![1.0],
            transitions: vec![vec![vec![1.0]]; horizon.saturating_sub(1)],
            state_type: vec![None],
        },
        choice: Some(ChoiceModel {
            family: Family::Explicit(vec![vec![0], vec![0, 1], vec![0, 2], vec![0, 1, 2]]),
            phi: Phi::Table(vec![vec![vec![1.0], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.3, 0.4, 0.3]]]),
        }),
    }
}
