//! The ADP upper-bound LPs and helpers around their weights.
//!
//! The min-of-positive-part constraint of the linear value approximation is
//! written with epigraph variables: `u` bounds the reward bracket and `w_i`
//! the per-resource drift bracket, so that
//!
//! ```text
//! theta_t(s) - E theta_{t+1} >= u + sum_i C_i w_i
//! u   >= r - E sum_i a_i beta_{t+1,i}
//! w_i >= E beta_{t+1,i} - beta_{t,i}(s)
//! ```
//!
//! with everything nonnegative and the period-T+1 weights fixed at zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{solve, LinearProgram, LpSolution, LpStatus, RowSense, Sense};
use crate::assortment::{ChoiceModel, ExpandedChoice, DEFAULT_FAMILY_CAP};
use crate::error::{NrmError, Result};
use crate::model::{state_marginals, Instance};

/// θ^t(s) and β^t_i(s) for t in 0..=T; the last slice is the zero terminal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdpWeights {
    pub theta: Vec<Vec<f64>>,
    pub beta: Vec<Vec<Vec<f64>>>,
}

impl AdpWeights {
    pub fn zeros(horizon: usize, num_states: usize, m: usize) -> Self {
        AdpWeights { theta: vec![vec![0.0; num_states]; horizon + 1], beta: vec![vec![vec![0.0; m]; num_states]; horizon + 1] }
    }

    /// Σ_s p₁(s)(θ¹(s) + Σ_i C_i β¹_i(s)).
    pub fn objective(&self, instance: &Instance) -> f64 {
        let caps = instance.capacities();
        instance
            .arrival
            .initial
            .iter()
            .enumerate()
            .map(|(s, &p)| {
                p * (self.theta[0][s] + caps.iter().zip(&self.beta[0][s]).map(|(&c, b)| c as f64 * b).sum::<f64>())
            })
            .sum()
    }

    pub fn min_entry(&self) -> f64 {
        let th = self.theta.iter().flatten().copied();
        let be = self.beta.iter().flatten().flatten().copied();
        th.chain(be).fold(f64::INFINITY, f64::min)
    }
}

/// Column indices of each variable family, by period and state.
#[derive(Clone, Debug, PartialEq)]
pub struct AdpIndex {
    pub theta: Vec<Vec<usize>>,
    pub beta: Vec<Vec<Vec<usize>>>,
    /// One reward bracket per (t, s) for the single-product LP; one per product
    /// for the assortment LP.
    pub u: Vec<Vec<Vec<usize>>>,
    pub w: Vec<Vec<Vec<usize>>>,
    pub horizon: usize,
    pub num_states: usize,
    pub m: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdpLpOptions {
    /// Give every distinct transition row its own expectation variables
    /// (defined by equality rows) instead of repeating the expectation in each
    /// state's constraints. Same feasible set in (θ, β, u, w), far fewer
    /// nonzeros when many states share a row.
    pub aggregate_rows: bool,
}

impl AdpLpOptions {
    /// Aggregate when it removes at least a quarter of the per-state expectations.
    pub fn auto(instance: &Instance) -> Self {
        let arr = &instance.arrival;
        if arr.num_states() < 8 {
            return AdpLpOptions::default();
        }
        let distinct: usize = (0..arr.transitions.len()).map(|t| row_classes(instance, t).1).sum();
        let total = arr.transitions.len() * arr.num_states();
        AdpLpOptions { aggregate_rows: 4 * distinct <= 3 * total }
    }
}

/// Class of each state's outgoing row at period t (bitwise-identical rows share a class).
fn row_classes(instance: &Instance, t: usize) -> (Vec<usize>, usize) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let classes = instance.arrival.transitions[t]
        .iter()
        .map(|row| {
            let key: Vec<u64> = row.iter().map(|p| p.to_bits()).collect();
            let next = seen.len();
            *seen.entry(key).or_insert(next)
        })
        .collect();
    (classes, seen.len())
}

/// Expectation terms E[x_{t+1}(s')] for one state, either spelled out or as
/// a single aggregate column.
struct Expect {
    theta: Vec<(usize, f64)>,
    beta: Vec<Vec<(usize, f64)>>,
}

fn next_period_terms(lp: &mut LinearProgram, instance: &Instance, idx: &AdpIndex, opts: AdpLpOptions) -> Vec<Vec<Expect>> {
    let arr = &instance.arrival;
    let (horizon, ns, m) = (idx.horizon, idx.num_states, idx.m);
    let spelled = |t: usize, s: usize| -> Expect {
        let row = &arr.transitions[t][s];
        let theta = (0..ns).filter(|&s2| row[s2] != 0.0).map(|s2| (idx.theta[t + 1][s2], row[s2])).collect();
        let beta = (0..m)
            .map(|i| (0..ns).filter(|&s2| row[s2] != 0.0).map(|s2| (idx.beta[t + 1][s2][i], row[s2])).collect())
            .collect();
        Expect { theta, beta }
    };
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        if t + 1 == horizon {
            out.push((0..ns).map(|_| Expect { theta: vec![], beta: vec![vec![]; m] }).collect());
            continue;
        }
        if !opts.aggregate_rows {
            out.push((0..ns).map(|s| spelled(t, s)).collect());
            continue;
        }
        let (classes, count) = row_classes(instance, t);
        let mut agg: Vec<Option<(usize, Vec<usize>)>> = vec![None; count];
        let mut per_state = Vec::with_capacity(ns);
        for s in 0..ns {
            let k = classes[s];
            if agg[k].is_none() {
                let full = spelled(t, s);
                let eth = lp.add_nonneg(format!("Etheta_{t}_c{k}"), 0.0);
                let mut terms = vec![(eth, 1.0)];
                terms.extend(full.theta.iter().map(|&(j, p)| (j, -p)));
                lp.add_row(&terms, RowSense::Eq, 0.0);
                let mut ebs = Vec::with_capacity(m);
                for (i, bterms) in full.beta.iter().enumerate() {
                    let eb = lp.add_nonneg(format!("Ebeta_{t}_c{k}_{i}"), 0.0);
                    let mut terms = vec![(eb, 1.0)];
                    terms.extend(bterms.iter().map(|&(j, p)| (j, -p)));
                    lp.add_row(&terms, RowSense::Eq, 0.0);
                    ebs.push(eb);
                }
                agg[k] = Some((eth, ebs));
            }
            let (eth, ebs) = agg[k].as_ref().expect("filled above");
            per_state.push(Expect { theta: vec![(*eth, 1.0)], beta: ebs.iter().map(|&e| vec![(e, 1.0)]).collect() });
        }
        out.push(per_state);
    }
    out
}

/// Adds θ and β columns (objective on period 0) and returns the partial index.
fn weight_columns(lp: &mut LinearProgram, instance: &Instance) -> (Vec<Vec<usize>>, Vec<Vec<Vec<usize>>>) {
    let arr = &instance.arrival;
    let caps = instance.capacities();
    let mut theta = Vec::with_capacity(arr.horizon);
    let mut beta = Vec::with_capacity(arr.horizon);
    for t in 0..arr.horizon {
        let mut th = Vec::with_capacity(arr.num_states());
        let mut be = Vec::with_capacity(arr.num_states());
        for s in 0..arr.num_states() {
            let name = &arr.state_names[s];
            let p1 = if t == 0 { arr.initial[s] } else { 0.0 };
            th.push(lp.add_nonneg(format!("theta_{t}_{name}"), p1));
            be.push(
                (0..instance.m())
                    .map(|i| lp.add_nonneg(format!("beta_{t}_{name}_{i}"), p1 * caps[i] as f64))
                    .collect(),
            );
        }
        theta.push(th);
        beta.push(be);
    }
    (theta, beta)
}

fn drift_rows(lp: &mut LinearProgram, idx: &AdpIndex, ex: &Expect, t: usize, s: usize) {
    for i in 0..idx.m {
        let mut terms = vec![(idx.w[t][s][i], 1.0), (idx.beta[t][s][i], 1.0)];
        terms.extend(ex.beta[i].iter().map(|&(j, p)| (j, -p)));
        lp.add_row(&terms, RowSense::Ge, 0.0);
    }
}

/// Reward-bracket row u >= r - E Σ_{i ∈ A_j} β_{t+1,i}.
fn reward_row(lp: &mut LinearProgram, u: usize, reward: f64, consumes: &[u8], ex: &Expect) {
    let mut terms = vec![(u, 1.0)];
    for (i, &a) in consumes.iter().enumerate() {
        if a == 1 {
            terms.extend(ex.beta[i].iter().copied());
        }
    }
    lp.add_row(&terms, RowSense::Ge, reward);
}

pub fn build_adp_lp(instance: &Instance) -> (LinearProgram, AdpIndex) {
    build_adp_lp_with(instance, AdpLpOptions::default())
}

pub fn build_adp_lp_with(instance: &Instance, opts: AdpLpOptions) -> (LinearProgram, AdpIndex) {
    let arr = &instance.arrival;
    let (horizon, ns, m) = (arr.horizon, arr.num_states(), instance.m());
    let caps = instance.capacities();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let (theta, beta) = weight_columns(&mut lp, instance);
    let mut idx = AdpIndex { theta, beta, u: Vec::new(), w: Vec::new(), horizon, num_states: ns, m };
    for t in 0..horizon {
        let mut us = Vec::with_capacity(ns);
        let mut ws = Vec::with_capacity(ns);
        for s in 0..ns {
            let name = &arr.state_names[s];
            us.push(vec![lp.add_nonneg(format!("u_{t}_{name}"), 0.0)]);
            ws.push((0..m).map(|i| lp.add_nonneg(format!("w_{t}_{name}_{i}"), 0.0)).collect());
        }
        idx.u.push(us);
        idx.w.push(ws);
    }
    let expect = next_period_terms(&mut lp, instance, &idx, opts);

    for t in 0..horizon {
        for s in 0..ns {
            let ex = &expect[t][s];
            let u = idx.u[t][s][0];
            let mut terms = vec![(idx.theta[t][s], 1.0), (u, -1.0)];
            terms.extend(ex.theta.iter().map(|&(j, p)| (j, -p)));
            terms.extend((0..m).map(|i| (idx.w[t][s][i], -(caps[i] as f64))));
            lp.add_row(&terms, RowSense::Ge, 0.0);

            if let Some(j) = arr.state_type[s] {
                let ty = &instance.types[j];
                reward_row(&mut lp, u, ty.reward, &ty.consumes, ex);
            }
            drift_rows(&mut lp, &idx, ex, t, s);
        }
    }
    (lp, idx)
}

/// One row per (t, s, A ∈ F) and a reward bracket per product.
pub fn build_assort_adp_lp(instance: &Instance, choice: &ChoiceModel) -> Result<(LinearProgram, AdpIndex)> {
    let ex_choice = choice.expand(instance, DEFAULT_FAMILY_CAP)?;
    Ok(build_assort_adp_lp_expanded(instance, &ex_choice, AdpLpOptions::default()))
}

pub(crate) fn build_assort_adp_lp_expanded(
    instance: &Instance,
    choice: &ExpandedChoice,
    opts: AdpLpOptions,
) -> (LinearProgram, AdpIndex) {
    let arr = &instance.arrival;
    let (horizon, ns, m, n) = (arr.horizon, arr.num_states(), instance.m(), instance.n());
    let caps = instance.capacities();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let (theta, beta) = weight_columns(&mut lp, instance);
    let mut idx = AdpIndex { theta, beta, u: Vec::new(), w: Vec::new(), horizon, num_states: ns, m };
    for t in 0..horizon {
        let mut us = Vec::with_capacity(ns);
        let mut ws = Vec::with_capacity(ns);
        for s in 0..ns {
            let name = &arr.state_names[s];
            us.push((0..n).map(|j| lp.add_nonneg(format!("u_{t}_{name}_p{}", j + 1), 0.0)).collect());
            ws.push((0..m).map(|i| lp.add_nonneg(format!("w_{t}_{name}_{i}"), 0.0)).collect());
        }
        idx.u.push(us);
        idx.w.push(ws);
    }
    let expect = next_period_terms(&mut lp, instance, &idx, opts);

    for t in 0..horizon {
        for s in 0..ns {
            let ex = &expect[t][s];
            for (a, set) in choice.sets.iter().enumerate() {
                let mut terms = vec![(idx.theta[t][s], 1.0)];
                terms.extend(ex.theta.iter().map(|&(j, p)| (j, -p)));
                terms.extend((0..m).map(|i| (idx.w[t][s][i], -(caps[i] as f64))));
                for (k, &prod) in set.iter().enumerate() {
                    let phi = choice.probs[s][a][k];
                    if prod > 0 && phi != 0.0 {
                        terms.push((idx.u[t][s][prod - 1], -phi));
                    }
                }
                lp.add_row(&terms, RowSense::Ge, 0.0);
            }
            for j in 0..n {
                let ty = &instance.types[j];
                reward_row(&mut lp, idx.u[t][s][j], ty.reward, &ty.consumes, ex);
            }
            drift_rows(&mut lp, &idx, ex, t, s);
        }
    }
    (lp, idx)
}

/// Survival-rate view of an instance built by the high-variance encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct HighVarianceView {
    pub rho: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
    /// P(s_t > 0): a customer still arrives in period t.
    pub active: Vec<f64>,
}

pub fn high_variance_view(instance: &Instance) -> Result<HighVarianceView> {
    let arr = &instance.arrival;
    let n = instance.n();
    let bad = |msg: String| Err(NrmError::NotHighVariance(msg));
    if arr.num_states() != n + 1 {
        return bad(format!("{} states for {n} types; expected {}", arr.num_states(), n + 1));
    }
    if arr.state_type[0].is_some() || (1..=n).any(|k| arr.state_type[k] != Some(k - 1)) {
        return bad("state 0 must carry no arrival and state k must carry type k-1".into());
    }
    if arr.initial[0] != 0.0 {
        return bad("the first period must have an arrival".into());
    }
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    let mut rho = Vec::with_capacity(arr.horizon);
    let mut lambdas = vec![arr.initial[1..].to_vec()];
    for (t, mat) in arr.transitions.iter().enumerate() {
        let absorbing = mat[0][0] == 1.0;
        if !absorbing {
            return bad(format!("state 0 is not absorbing at period {t}"));
        }
        let typed = &mat[1..];
        if typed.iter().any(|row| !close(row, &typed[0])) {
            return bad(format!("typed states have different transition rows at period {t}"));
        }
        let r = 1.0 - typed[0][0];
        rho.push(r);
        let lam = if r > 0.0 { typed[0][1..].iter().map(|p| p / r).collect() } else { lambdas[t].clone() };
        lambdas.push(lam);
    }
    let active = state_marginals(arr).iter().map(|row| 1.0 - row[0]).collect();
    Ok(HighVarianceView { rho, lambdas, active })
}

/// Fluid bound for the high-variance encoding (a maximisation in x_{j,t}).
pub fn build_fluid_uf_lp(instance: &Instance) -> Result<LinearProgram> {
    let view = high_variance_view(instance)?;
    let mut lp = LinearProgram::new(Sense::Maximize);
    let n = instance.n();
    let mut x = vec![Vec::with_capacity(n); instance.horizon()];
    for (t, xt) in x.iter_mut().enumerate() {
        for j in 0..n {
            let cost = view.active[t] * instance.types[j].reward;
            xt.push(lp.add_var(format!("x_{j}_{t}"), cost, 0.0, view.lambdas[t][j]));
        }
    }
    for (i, res) in instance.resources.iter().enumerate() {
        let terms: Vec<(usize, f64)> = instance
            .consumers_of(i)
            .into_iter()
            .flat_map(|j| x.iter().map(move |xt| (xt[j], 1.0)))
            .collect();
        lp.add_row(&terms, RowSense::Le, res.capacity as f64);
    }
    Ok(lp)
}

pub fn extract_weights(solution: &LpSolution, idx: &AdpIndex) -> Result<AdpWeights> {
    if solution.status != LpStatus::Optimal {
        return Err(NrmError::NotOptimal(solution.status));
    }
    let mut weights = AdpWeights::zeros(idx.horizon, idx.num_states, idx.m);
    for t in 0..idx.horizon {
        for s in 0..idx.num_states {
            weights.theta[t][s] = solution.x[idx.theta[t][s]];
            for i in 0..idx.m {
                weights.beta[t][s][i] = solution.x[idx.beta[t][s][i]];
            }
        }
    }
    Ok(weights)
}

/// Solve the ADP bound LP (aggregated when that pays off) and return its value and weights.
pub fn solve_adp_bound(instance: &Instance) -> Result<(f64, AdpWeights)> {
    let (lp, idx) = build_adp_lp_with(instance, AdpLpOptions::auto(instance));
    let sol = solve(&lp)?.require_optimal()?;
    let weights = extract_weights(&sol, &idx)?;
    Ok((sol.objective, weights))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Smallest constraint slack; negative means violated.
    pub min_slack: f64,
    /// (period, state) attaining it.
    pub at: (usize, usize),
    pub objective: f64,
}

impl FeasibilityReport {
    pub fn feasible(&self, tol: f64) -> bool {
        self.min_slack >= -tol
    }
}

fn check_dims(weights: &AdpWeights, instance: &Instance) -> Result<()> {
    let (h, ns, m) = (instance.horizon(), instance.num_states(), instance.m());
    let ok = weights.theta.len() == h + 1
        && weights.beta.len() == h + 1
        && weights.theta.iter().all(|r| r.len() == ns)
        && weights.beta.iter().all(|r| r.len() == ns && r.iter().all(|b| b.len() == m));
    if ok {
        Ok(())
    } else {
        Err(NrmError::Dimension(format!("weights do not match T={h}, |S|={ns}, m={m}")))
    }
}

/// Left side minus the resource term of the ADP constraint at (t, s),
/// plus E β_{t+1} per resource; shared by both feasibility checks.
fn drift_and_margin(weights: &AdpWeights, instance: &Instance, t: usize, s: usize) -> (f64, Vec<f64>) {
    let arr = &instance.arrival;
    let caps = instance.capacities();
    let m = instance.m();
    let lhs = weights.theta[t][s] - arr.expect(t, s, |s2| weights.theta[t + 1][s2]);
    let eb: Vec<f64> = (0..m).map(|i| arr.expect(t, s, |s2| weights.beta[t + 1][s2][i])).collect();
    let drift: f64 = (0..m).map(|i| caps[i] as f64 * (eb[i] - weights.beta[t][s][i]).max(0.0)).sum();
    (lhs - drift, eb)
}

fn bracket(reward: f64, consumes: &[u8], eb: &[f64]) -> f64 {
    let cost: f64 = consumes.iter().zip(eb).filter(|(&a, _)| a == 1).map(|(_, b)| b).sum();
    (reward - cost).max(0.0)
}

/// Evaluate every ADP-LP constraint with its positive parts taken directly.
pub fn check_adp_feasibility(weights: &AdpWeights, instance: &Instance) -> Result<FeasibilityReport> {
    check_dims(weights, instance)?;
    let mut report = FeasibilityReport { min_slack: f64::INFINITY, at: (0, 0), objective: weights.objective(instance) };
    for t in 0..instance.horizon() {
        for s in 0..instance.num_states() {
            let (margin, eb) = drift_and_margin(weights, instance, t, s);
            let reward = match instance.arrival.state_type[s] {
                Some(j) => bracket(instance.types[j].reward, &instance.types[j].consumes, &eb),
                None => 0.0,
            };
            let slack = margin - reward;
            if slack < report.min_slack {
                report.min_slack = slack;
                report.at = (t, s);
            }
        }
    }
    Ok(report)
}

/// Same check against the assortment LP: every (t, s, A) constraint.
pub fn check_assort_adp_feasibility(
    weights: &AdpWeights,
    instance: &Instance,
    choice: &ChoiceModel,
) -> Result<FeasibilityReport> {
    check_dims(weights, instance)?;
    let ex_choice = choice.expand(instance, DEFAULT_FAMILY_CAP)?;
    let mut report = FeasibilityReport { min_slack: f64::INFINITY, at: (0, 0), objective: weights.objective(instance) };
    for t in 0..instance.horizon() {
        for s in 0..instance.num_states() {
            let (margin, eb) = drift_and_margin(weights, instance, t, s);
            for (a, set) in ex_choice.sets.iter().enumerate() {
                let value: f64 = set
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .map(|(k, &p)| {
                        let ty = &instance.types[p - 1];
                        ex_choice.probs[s][a][k] * bracket(ty.reward, &ty.consumes, &eb)
                    })
                    .sum();
                let slack = margin - value;
                if slack < report.min_slack {
                    report.min_slack = slack;
                    report.at = (t, s);
                }
            }
        }
    }
    Ok(report)
}
