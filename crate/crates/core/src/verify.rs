//! The invariant suite run by `nrm verify`: bounds and guarantees checked
//! against the exact oracle on instances small enough to solve exactly.

use serde::{Deserialize, Serialize};

use crate::assortment::{check_substitutability, compute_assort_bid_prices, AssortBidPricePolicy, ChoiceModel};
use crate::error::Result;
use crate::lp::{build_adp_lp, build_assort_adp_lp, check_adp_feasibility, check_assort_adp_feasibility, solve};
use crate::model::{bundle_size_l, Instance};
use crate::oracle::{exact_assort_policy_value, exact_dp, exact_dp_assort, exact_policy_value, DpTable};
use crate::policies::{compute_bid_prices, construct_lp_solution, lower_bound_value, BidPricePolicy};

pub const GUARANTEE_TOL: f64 = 1e-9;
pub const UPPER_BOUND_TOL: f64 = 1e-7;
const BACKUP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub label: String,
    pub dp_value: f64,
    pub lp_value: f64,
    pub policy_value: f64,
    pub lower_bound: f64,
    pub bundle_size: usize,
    /// policy value over the LP bound, against the guaranteed 1/(1+L)
    pub ratio: f64,
    pub checks: Vec<Check>,
}

impl InstanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Negative control: inflate the first-period bid prices so the
    /// lower-bound check must fail.
    pub corrupt_nu: bool,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn table_checks(nu: &[Vec<Vec<f64>>], instance: &Instance) -> Vec<Check> {
    let arr = &instance.arrival;
    let mut min = f64::INFINITY;
    let mut worst_backup = (f64::INFINITY, 0, 0, 0);
    for t in 0..arr.horizon {
        for (j, row) in nu[t].iter().enumerate() {
            for (s, &v) in row.iter().enumerate() {
                min = min.min(v);
                let slack = v - arr.expect(t, s, |s2| nu[t + 1][j][s2]);
                if slack < worst_backup.0 {
                    worst_backup = (slack, t, j, s);
                }
            }
        }
    }
    let (slack, t, j, s) = worst_backup;
    vec![
        check("bid prices nonnegative", min >= 0.0, format!("min entry {min}")),
        check(
            "bid prices dominate their backup",
            arr.horizon == 0 || slack >= -BACKUP_TOL,
            format!("min slack {slack} at period {t}, type {j}, state {s}"),
        ),
    ]
}

fn dp_monotone(table: &DpTable, m: usize) -> Check {
    let lat = &table.lattice;
    let ns = table.num_states;
    let mut c = vec![0u32; m];
    for (t, vals) in table.values.iter().enumerate() {
        for cidx in 0..lat.size {
            lat.digits(cidx, &mut c);
            for i in 0..m {
                if c[i] + 1 < lat.radix[i] {
                    let up = cidx + lat.strides[i];
                    for s in 0..ns {
                        if vals[up * ns + s] < vals[cidx * ns + s] - BACKUP_TOL {
                            return check(
                                "value function monotone in capacity",
                                false,
                                format!("period {t}, capacities {c:?}, resource {i}, state {s}"),
                            );
                        }
                    }
                }
            }
        }
    }
    check("value function monotone in capacity", true, String::new())
}

fn corrupt(table: &mut [Vec<Vec<f64>>], instance: &Instance) {
    let total: f64 = instance.types.iter().map(|ty| ty.reward).sum::<f64>() * instance.horizon() as f64 + 1.0;
    for row in table[0].iter_mut() {
        for v in row.iter_mut() {
            *v += total;
        }
    }
}

/// Accept/reject instance: upper bound, lower bound, construction, ratio.
pub fn verify_instance(label: &str, instance: &Instance, opts: VerifyOptions) -> Result<InstanceReport> {
    if let Some(choice) = &instance.choice {
        return verify_assort_instance(label, instance, choice, opts);
    }
    let (dp_value, dp_table) = exact_dp(instance)?;
    let (lp, _) = build_adp_lp(instance);
    let lp_value = solve(&lp)?.require_optimal()?.objective;
    let mut table = compute_bid_prices(instance);
    if opts.corrupt_nu {
        corrupt(&mut table.nu, instance);
    }
    let policy_value = exact_policy_value(instance, &BidPricePolicy { table: table.clone(), instance })?;
    let lower_bound = lower_bound_value(&table, &instance.arrival);
    let l = bundle_size_l(instance);
    let constructed = check_adp_feasibility(&construct_lp_solution(&table.nu, instance), instance)?;
    let factor = 1.0 + l as f64;

    let mut checks = vec![
        check(
            "LP bound above optimum",
            lp_value >= dp_value - UPPER_BOUND_TOL,
            format!("LP {lp_value} vs DP {dp_value}"),
        ),
        check(
            "policy above its lower bound",
            policy_value >= lower_bound - GUARANTEE_TOL,
            format!("policy {policy_value} vs lower bound {lower_bound}"),
        ),
        check(
            "constructed weights feasible",
            constructed.feasible(GUARANTEE_TOL),
            format!("min slack {} at {:?}", constructed.min_slack, constructed.at),
        ),
        check(
            "constructed objective within (1+L) of lower bound",
            constructed.objective <= factor * lower_bound + GUARANTEE_TOL,
            format!("objective {} vs (1+{l})·{lower_bound}", constructed.objective),
        ),
        check(
            "policy within 1/(1+L) of optimum",
            policy_value >= dp_value / factor - GUARANTEE_TOL,
            format!("policy {policy_value} vs DP {dp_value} / {factor}"),
        ),
        dp_monotone(&dp_table, instance.m()),
    ];
    checks.extend(table_checks(&table.nu, instance));
    Ok(InstanceReport {
        label: label.into(),
        dp_value,
        lp_value,
        policy_value,
        lower_bound,
        bundle_size: l,
        ratio: if lp_value > 0.0 { policy_value / lp_value } else { 1.0 },
        checks,
    })
}

pub fn verify_assort_instance(
    label: &str,
    instance: &Instance,
    choice: &ChoiceModel,
    opts: VerifyOptions,
) -> Result<InstanceReport> {
    let subst = check_substitutability(choice, instance)?;
    let (dp_value, dp_table) = exact_dp_assort(instance, choice)?;
    let (lp, _) = build_assort_adp_lp(instance, choice)?;
    let lp_value = solve(&lp)?.require_optimal()?.objective;
    let mut table = compute_assort_bid_prices(instance, choice)?;
    if opts.corrupt_nu {
        corrupt(&mut table.nu, instance);
    }
    let lower_bound = table.lower_bound_value(instance);
    let policy = AssortBidPricePolicy { table: table.clone(), instance };
    let policy_value = exact_assort_policy_value(instance, choice, &policy)?;
    let l = bundle_size_l(instance);
    let factor = 1.0 + l as f64;
    let constructed = check_assort_adp_feasibility(&construct_lp_solution(&table.nu, instance), instance, choice)?;

    let mut checks = vec![
        check("choice model substitutable", subst.ok, subst.violation.unwrap_or_default()),
        check(
            "LP bound above optimum",
            lp_value >= dp_value - UPPER_BOUND_TOL,
            format!("LP {lp_value} vs DP {dp_value}"),
        ),
        check(
            "policy above its lower bound",
            policy_value >= lower_bound - GUARANTEE_TOL,
            format!("policy {policy_value} vs lower bound {lower_bound}"),
        ),
        check(
            "constructed weights feasible",
            constructed.feasible(GUARANTEE_TOL),
            format!("min slack {} at {:?}", constructed.min_slack, constructed.at),
        ),
        check(
            "constructed objective within (1+L) of lower bound",
            constructed.objective <= factor * lower_bound + GUARANTEE_TOL,
            format!("objective {} vs (1+{l})·{lower_bound}", constructed.objective),
        ),
        check(
            "policy within 1/(1+L) of optimum",
            policy_value >= dp_value / factor - GUARANTEE_TOL,
            format!("policy {policy_value} vs DP {dp_value} / {factor}"),
        ),
        dp_monotone(&dp_table, instance.m()),
    ];
    checks.extend(table_checks(&table.nu, instance));
    Ok(InstanceReport {
        label: label.into(),
        dp_value,
        lp_value,
        policy_value,
        lower_bound,
        bundle_size: l,
        ratio: if lp_value > 0.0 { policy_value / lp_value } else { 1.0 },
        checks,
    })
}
