//! Instances: resources, customer types, and the Markov arrival process.
//!
//! Periods are 0-based throughout the crate: period `t` runs over `0..T`,
//! and `transitions[t]` moves the arrival state from period `t` to `t + 1`
//! (so there are `T - 1` matrices). Anything that would need a transition out
//! of the last period multiplies a zero terminal value and is skipped.

use serde::{Deserialize, Serialize};

use crate::assortment::{self, ChoiceModel};
use crate::error::{NrmError, Result};

/// Rows further than this from summing to one are rejected.
pub const ROW_REJECT_TOL: f64 = 1e-9;
/// Rows closer than this are left alone; anything in between is rescaled.
pub const ROW_EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomerType {
    pub reward: f64,
    /// a_{i,j} for each resource i, entries in {0, 1}.
    pub consumes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub name: String,
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovArrival {
    pub horizon: usize,
    pub state_names: Vec<String>,
    pub initial: Vec<f64>,
    /// `transitions[t][s][s2]`, for t in 0..horizon-1.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Customer type arriving in each state; `None` means nobody arrives.
    pub state_type: Vec<Option<usize>>,
}

impl MarkovArrival {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    /// Outgoing row of `s` at period `t`, or `None` in the last period.
    #[inline]
    pub fn row(&self, t: usize, s: usize) -> Option<&[f64]> {
        self.transitions.get(t).map(|m| m[s].as_slice())
    }

    /// Expected value of `f(s2)` one step ahead of (t, s); zero in the last period.
    #[inline]
    pub fn expect(&self, t: usize, s: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
        match self.row(t, s) {
            None => 0.0,
            Some(row) => {
                let mut acc = 0.0;
                for (s2, &p) in row.iter().enumerate() {
                    if p != 0.0 {
                        acc += p * f(s2);
                    }
                }
                acc
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub resources: Vec<Resource>,
    pub types: Vec<CustomerType>,
    pub arrival: MarkovArrival,
    pub choice: Option<ChoiceModel>,
}

impl Instance {
    pub fn m(&self) -> usize {
        self.resources.len()
    }

    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn horizon(&self) -> usize {
        self.arrival.horizon
    }

    pub fn num_states(&self) -> usize {
        self.arrival.num_states()
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.resources.iter().map(|r| r.capacity).collect()
    }

    /// Resources consumed by type `j` (the set A_j).
    pub fn consumed_by(&self, j: usize) -> Vec<usize> {
        let a = &self.types[j].consumes;
        (0..self.m()).filter(|&i| a[i] == 1).collect()
    }

    /// Types that consume resource `i` (the set B_i).
    pub fn consumers_of(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.types[j].consumes[i] == 1).collect()
    }

    /// Same instance with every capacity multiplied by `k`.
    pub fn scale_capacities(&self, k: u32) -> Instance {
        let mut out = self.clone();
        for r in &mut out.resources {
            r.capacity *= k;
        }
        out
    }

    /// Validate and then normalise: rows within the tolerance band are rescaled
    /// and unused zero-capacity resources are dropped.
    pub fn validated(self) -> Result<Instance> {
        let report = validate(&self);
        if !report.ok {
            return Err(NrmError::Invalid(report.errors().join("; ")));
        }
        Ok(normalize(self))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<(Severity, String)>,
}

impl ValidationReport {
    pub fn errors(&self) -> Vec<String> {
        self.issues
            .iter()
            .filter(|(sev, _)| *sev == Severity::Error)
            .map(|(_, msg)| msg.clone())
            .collect()
    }
}

struct Issues(Vec<(Severity, String)>);

impl Issues {
    fn error(&mut self, msg: String) {
        self.0.push((Severity::Error, msg));
    }
    fn warn(&mut self, msg: String) {
        self.0.push((Severity::Warning, msg));
    }
    fn check_row(&mut self, what: &str, row: &[f64]) {
        if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0 + ROW_REJECT_TOL) {
            self.error(format!("{what} has entry {p} outside [0, 1]"));
            return;
        }
        let sum: f64 = row.iter().sum();
        let dev = (sum - 1.0).abs();
        if dev > ROW_REJECT_TOL {
            self.error(format!("{what} sums to {sum}"));
        } else if dev > ROW_EXACT_TOL {
            self.warn(format!("{what} sums to {sum}; renormalised"));
        }
    }
}

pub fn validate(instance: &Instance) -> ValidationReport {
    let mut issues = Issues(Vec::new());
    let m = instance.m();
    let n = instance.n();
    let arr = &instance.arrival;
    let ns = arr.num_states();

    if arr.horizon == 0 {
        issues.error("horizon must be at least 1".into());
    }
    if arr.transitions.len() + 1 != arr.horizon.max(1) {
        issues.error(format!(
            "horizon T={} needs {} transition matrices, found {}",
            arr.horizon,
            arr.horizon.saturating_sub(1),
            arr.transitions.len()
        ));
    }
    if ns == 0 {
        issues.error("arrival process has no states".into());
    }
    if arr.state_type.len() != ns {
        issues.error(format!("{} states but {} state types", ns, arr.state_type.len()));
    }
    for (s, ty) in arr.state_type.iter().enumerate() {
        if let Some(j) = ty {
            if *j >= n {
                issues.error(format!("state {s} refers to type {j}, but only {n} types exist"));
            }
        }
    }

    if arr.initial.len() != ns {
        issues.error(format!("initial distribution has {} entries for {} states", arr.initial.len(), ns));
    } else {
        issues.check_row("initial distribution", &arr.initial);
    }
    for (t, mat) in arr.transitions.iter().enumerate() {
        if mat.len() != ns {
            issues.error(format!("transition matrix {t} has {} rows for {} states", mat.len(), ns));
            continue;
        }
        for (s, row) in mat.iter().enumerate() {
            if row.len() != ns {
                issues.error(format!("transition row (t={t}, s={s}) has {} entries for {} states", row.len(), ns));
                continue;
            }
            issues.check_row(&format!("transition row (t={t}, s={s})"), row);
        }
    }

    for (j, ty) in instance.types.iter().enumerate() {
        if !ty.reward.is_finite() || ty.reward < 0.0 {
            issues.error(format!("type {j} has negative or non-finite reward {}", ty.reward));
        }
        if ty.consumes.len() != m {
            issues.error(format!("type {j} consumption vector has length {}, expected {m}", ty.consumes.len()));
        } else if let Some(a) = ty.consumes.iter().find(|&&a| a > 1) {
            issues.error(format!("type {j} consumes {a} units of a resource; only 0/1 is allowed"));
        }
    }

    for (i, res) in instance.resources.iter().enumerate() {
        if res.capacity > 0 {
            continue;
        }
        let consumed = instance.types.iter().any(|ty| ty.consumes.get(i) == Some(&1));
        if consumed {
            issues.error(format!("consumed resource has zero capacity: {} (index {i})", res.name));
        } else {
            issues.warn(format!("unused zero-capacity resource {} dropped", res.name));
        }
    }

    if let Some(choice) = &instance.choice {
        for msg in assortment::choice_errors(instance, choice) {
            issues.error(msg);
        }
    }

    let ok = issues.0.iter().all(|(sev, _)| *sev != Severity::Error);
    ValidationReport { ok, issues: issues.0 }
}

fn renormalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_EXACT_TOL && sum > 0.0 {
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
}

/// Assumes `validate` passed.
fn normalize(mut instance: Instance) -> Instance {
    renormalize(&mut instance.arrival.initial);
    for mat in &mut instance.arrival.transitions {
        for row in mat.iter_mut() {
            renormalize(row);
        }
    }
    let keep: Vec<usize> = (0..instance.m()).filter(|&i| instance.resources[i].capacity > 0).collect();
    if keep.len() < instance.m() {
        instance.resources = keep.iter().map(|&i| instance.resources[i].clone()).collect();
        for ty in &mut instance.types {
            ty.consumes = keep.iter().map(|&i| ty.consumes[i]).collect();
        }
    }
    instance
}

/// L: the largest number of resources any single type consumes.
pub fn bundle_size_l(instance: &Instance) -> usize {
    instance
        .types
        .iter()
        .map(|ty| ty.consumes.iter().map(|&a| a as usize).sum::<usize>())
        .max()
        .unwrap_or(0)
}

/// P(s_t = s) for every period, by pushing the initial distribution forward.
pub fn state_marginals(arrival: &MarkovArrival) -> Vec<Vec<f64>> {
    let ns = arrival.num_states();
    let mut out = Vec::with_capacity(arrival.horizon);
    let mut cur = arrival.initial.clone();
    for t in 0..arrival.horizon {
        out.push(cur.clone());
        if let Some(mat) = arrival.transitions.get(t) {
            let mut next = vec![0.0; ns];
            for (s, row) in mat.iter().enumerate() {
                if cur[s] == 0.0 {
                    continue;
                }
                for (s2, &p) in row.iter().enumerate() {
                    next[s2] += cur[s] * p;
                }
            }
            cur = next;
        }
    }
    out
}

/// Componentwise c >= a.
pub fn feasible(c: &[u32], a: &[u8]) -> Result<bool> {
    if c.len() != a.len() {
        return Err(NrmError::Dimension(format!("capacity has length {}, consumption {}", c.len(), a.len())));
    }
    Ok(fits(c, a))
}

#[inline]
pub(crate) fn fits(c: &[u32], a: &[u8]) -> bool {
    c.iter().zip(a).all(|(&ci, &ai)| ci >= ai as u32)
}
