//! Exact backward induction over the (capacity, state) grid.
//!
//! Capacities are enumerated in mixed radix: vector c maps to
//! Σ_i c_i·stride_i with stride_0 = 1, and a grid cell is `cidx * |S| + s`.

use rayon::prelude::*;

use crate::assortment::{AssortmentPolicy, ChoiceModel, ExpandedChoice, DEFAULT_FAMILY_CAP};
use crate::error::{NrmError, Result};
use crate::model::Instance;
use crate::policies::{Decision, Policy};

/// Largest Π(C_i+1)·|S|·T we are willing to enumerate.
pub const DEFAULT_CELL_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub radix: Vec<u32>,
    pub strides: Vec<usize>,
    pub size: usize,
}

impl Lattice {
    pub fn new(caps: &[u32]) -> Self {
        let mut strides = Vec::with_capacity(caps.len());
        let mut size = 1usize;
        for &c in caps {
            strides.push(size);
            size *= c as usize + 1;
        }
        Lattice { radix: caps.iter().map(|&c| c + 1).collect(), strides, size }
    }

    pub fn index(&self, c: &[u32]) -> usize {
        c.iter().zip(&self.strides).map(|(&ci, &st)| ci as usize * st).sum()
    }

    pub fn digits(&self, mut idx: usize, out: &mut [u32]) {
        for (d, &r) in out.iter_mut().zip(&self.radix) {
            *d = (idx % r as usize) as u32;
            idx /= r as usize;
        }
    }

    /// Index offset of consuming bundle `a`.
    pub fn offset(&self, a: &[u8]) -> usize {
        a.iter().zip(&self.strides).map(|(&ai, &st)| ai as usize * st).sum()
    }
}

fn check_cap(instance: &Instance, cap: u64) -> Result<Lattice> {
    let cells = instance.capacities().iter().fold(1u128, |acc, &c| acc * (c as u128 + 1))
        * instance.num_states() as u128
        * instance.horizon() as u128;
    if cells > cap as u128 {
        return Err(NrmError::CapExceeded { cells, cap });
    }
    Ok(Lattice::new(&instance.capacities()))
}

/// V_t(c, s) for t in 0..=T; `values[T]` is the zero terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct DpTable {
    pub lattice: Lattice,
    pub num_states: usize,
    pub values: Vec<Vec<f64>>,
}

impl DpTable {
    pub fn value(&self, t: usize, c: &[u32], s: usize) -> f64 {
        self.values[t][self.lattice.index(c) * self.num_states + s]
    }

    /// Σ_s p_1(s) V_1(C, s).
    pub fn initial_value(&self, instance: &Instance) -> f64 {
        let top = self.lattice.index(&instance.capacities());
        instance.arrival.initial.iter().enumerate().map(|(s, &p)| p * self.values[0][top * self.num_states + s]).sum()
    }
}

/// E_{s'} V_{t+1}(c, s') for every grid cell at period t.
fn continuation(instance: &Instance, t: usize, next: &[f64], cells: usize) -> Vec<f64> {
    let arr = &instance.arrival;
    let ns = arr.num_states();
    let Some(mat) = arr.transitions.get(t) else { return vec![0.0; cells * ns] };
    (0..cells)
        .into_par_iter()
        .flat_map_iter(|cidx| {
            let v = &next[cidx * ns..(cidx + 1) * ns];
            mat.iter().map(move |row| row.iter().zip(v).map(|(p, x)| p * x).sum::<f64>())
        })
        .collect()
}

/// Backward induction shared by every variant: `step` maps (s, c digits,
/// cidx, continuation values) to V_t(c, s).
fn backward<F>(instance: &Instance, lattice: Lattice, step: F) -> Result<DpTable>
where
    F: Fn(usize, usize, &[u32], usize, &[f64]) -> Result<f64> + Sync,
{
    let (horizon, ns, m) = (instance.horizon(), instance.num_states(), instance.m());
    let cells = lattice.size;
    let mut values = vec![vec![0.0; cells * ns]; horizon + 1];
    for t in (0..horizon).rev() {
        let w = continuation(instance, t, &values[t + 1], cells);
        let cur: Result<Vec<f64>> = (0..cells)
            .into_par_iter()
            .flat_map_iter(|cidx| {
                let mut c = vec![0u32; m];
                lattice.digits(cidx, &mut c);
                let w = &w;
                let step = &step;
                (0..ns).map(move |s| step(t, s, &c, cidx, w))
            })
            .collect();
        values[t] = cur?;
    }
    Ok(DpTable { lattice, num_states: ns, values })
}

pub fn exact_dp(instance: &Instance) -> Result<(f64, DpTable)> {
    exact_dp_with_cap(instance, DEFAULT_CELL_CAP)
}

pub fn exact_dp_with_cap(instance: &Instance, cap: u64) -> Result<(f64, DpTable)> {
    let lattice = check_cap(instance, cap)?;
    let ns = instance.num_states();
    let offsets: Vec<usize> = instance.types.iter().map(|ty| lattice.offset(&ty.consumes)).collect();
    let table = backward(instance, lattice, |_, s, c, cidx, w| {
        let skip = w[cidx * ns + s];
        Ok(match instance.arrival.state_type[s] {
            Some(j) if c.iter().zip(&instance.types[j].consumes).all(|(&ci, &a)| ci >= a as u32) => {
                let serve = instance.types[j].reward + w[(cidx - offsets[j]) * ns + s];
                serve.max(skip)
            }
            _ => skip,
        })
    })?;
    Ok((table.initial_value(instance), table))
}

/// Value of a product choice: reward plus the continuation after consuming its bundle.
#[inline]
fn product_value(instance: &Instance, offsets: &[usize], prod: usize, s: usize, ns: usize, cidx: usize, w: &[f64]) -> f64 {
    if prod == 0 {
        w[cidx * ns + s]
    } else {
        instance.types[prod - 1].reward + w[(cidx - offsets[prod - 1]) * ns + s]
    }
}

fn set_fits(instance: &Instance, set: &[usize], c: &[u32]) -> bool {
    set.iter().all(|&j| j == 0 || c.iter().zip(&instance.types[j - 1].consumes).all(|(&ci, &a)| ci >= a as u32))
}

pub fn exact_dp_assort(instance: &Instance, choice: &ChoiceModel) -> Result<(f64, DpTable)> {
    let ex = choice.expand(instance, DEFAULT_FAMILY_CAP)?;
    exact_dp_assort_expanded(instance, &ex, DEFAULT_CELL_CAP)
}

pub fn exact_dp_assort_expanded(instance: &Instance, ex: &ExpandedChoice, cap: u64) -> Result<(f64, DpTable)> {
    let lattice = check_cap(instance, cap)?;
    let ns = instance.num_states();
    let offsets: Vec<usize> = instance.types.iter().map(|ty| lattice.offset(&ty.consumes)).collect();
    let table = backward(instance, lattice, |_, s, c, cidx, w| {
        let mut best = f64::NEG_INFINITY;
        for (a, set) in ex.sets.iter().enumerate() {
            if !set_fits(instance, set, c) {
                continue;
            }
            let v: f64 = set
                .iter()
                .zip(&ex.probs[s][a])
                .map(|(&j, &p)| p * product_value(instance, &offsets, j, s, ns, cidx, w))
                .sum();
            best = best.max(v);
        }
        // {0} always fits, so something was evaluated
        Ok(best)
    })?;
    Ok((table.initial_value(instance), table))
}

/// Expected reward of an accept/reject policy, by backward recursion.
pub fn exact_policy_value(instance: &Instance, policy: &dyn Policy) -> Result<f64> {
    exact_policy_value_with_cap(instance, policy, DEFAULT_CELL_CAP)
}

pub fn exact_policy_value_with_cap(instance: &Instance, policy: &dyn Policy, cap: u64) -> Result<f64> {
    let lattice = check_cap(instance, cap)?;
    let ns = instance.num_states();
    let offsets: Vec<usize> = instance.types.iter().map(|ty| lattice.offset(&ty.consumes)).collect();
    let table = backward(instance, lattice, |t, s, c, cidx, w| {
        let skip = w[cidx * ns + s];
        let Some(j) = instance.arrival.state_type[s] else { return Ok(skip) };
        let d: Decision = policy.decide(t, s, c);
        if !d.serve {
            return Ok(skip);
        }
        if !c.iter().zip(&instance.types[j].consumes).all(|(&ci, &a)| ci >= a as u32) {
            return Err(NrmError::InfeasibleAction(format!("served type {j} at period {t} with capacities {c:?}")));
        }
        Ok(instance.types[j].reward + w[(cidx - offsets[j]) * ns + s])
    })?;
    Ok(table.initial_value(instance))
}

/// Expected reward of an assortment policy, averaging over the customer's choice.
pub fn exact_assort_policy_value(instance: &Instance, choice: &ChoiceModel, policy: &dyn AssortmentPolicy) -> Result<f64> {
    let lattice = check_cap(instance, DEFAULT_CELL_CAP)?;
    let ns = instance.num_states();
    let ex = choice.expand(instance, DEFAULT_FAMILY_CAP).ok();
    let offsets: Vec<usize> = instance.types.iter().map(|ty| lattice.offset(&ty.consumes)).collect();
    let table = backward(instance, lattice, |t, s, c, cidx, w| {
        let set = policy.offer(t, s, c);
        if set.first() != Some(&0) || !set_fits(instance, &set, c) {
            return Err(NrmError::InfeasibleAction(format!("offered {set:?} at period {t} with capacities {c:?}")));
        }
        let probs = match ex.as_ref().and_then(|ex| ex.position(&set).map(|a| ex.probs[s][a].clone())) {
            Some(p) => p,
            None => choice.choice_probs(s, &set)?,
        };
        Ok(set.iter().zip(&probs).map(|(&j, &p)| p * product_value(instance, &offsets, j, s, ns, cidx, w)).sum())
    })?;
    Ok(table.initial_value(instance))
}

/// The optimal policy read back off a solved table.
pub struct DpGreedy<'a> {
    pub table: &'a DpTable,
    pub instance: &'a Instance,
}

impl DpGreedy<'_> {
    fn continuation(&self, t: usize, cidx: usize, s: usize) -> f64 {
        let ns = self.table.num_states;
        let next = &self.table.values[t + 1];
        self.instance.arrival.expect(t, s, |s2| next[cidx * ns + s2])
    }
}

impl Policy for DpGreedy<'_> {
    fn decide(&self, t: usize, s: usize, c: &[u32]) -> Decision {
        let Some(j) = self.instance.arrival.state_type[s] else { return Decision::NOOP };
        let ty = &self.instance.types[j];
        let feasible = c.iter().zip(&ty.consumes).all(|(&ci, &a)| ci >= a as u32);
        let lat = &self.table.lattice;
        let cidx = lat.index(c);
        let keep = self.continuation(t, cidx, s);
        if !feasible {
            return Decision { serve: false, opportunity_cost: f64::INFINITY, feasible };
        }
        let opp = keep - self.continuation(t, cidx - lat.offset(&ty.consumes), s);
        Decision { serve: ty.reward >= opp, opportunity_cost: opp, feasible }
    }
}
