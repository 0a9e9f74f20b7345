use nrm_core::instances::{encode_high_variance, SurvivalSpec};
use nrm_core::model::state_marginals;
use nrm_core::{CustomerType, Instance, Resource};

/// Two legs, three fares, demand that drifts towards the dearer leg; the
/// unit capacities bind hard until they are scaled up.
pub fn scaling_instance() -> Instance {
    let horizon = 12;
    let spec = SurvivalSpec {
        rho: vec![0.9; horizon - 1],
        lambdas: (0..horizon)
            .map(|t| {
                let late = t as f64 / (horizon - 1) as f64;
                vec![0.5 - 0.3 * late, 0.2, 0.3 + 0.3 * late]
            })
            .collect(),
    };
    let types = vec![
        CustomerType { reward: 4.0, consumes: vec![1, 0] },
        CustomerType { reward: 1.0, consumes: vec![1, 1] },
        CustomerType { reward: 6.0, consumes: vec![0, 1] },
    ];
    let resources = vec![Resource { name: "a".into(), capacity: 1 }, Resource { name: "b".into(), capacity: 1 }];
    encode_high_variance(&spec, types, resources).unwrap()
}

/// Expected revenue if every last-period arrival were served. With the
/// terminal weights pinned at zero the last-period brackets cannot be
/// discounted by bid prices, so the ADP bound may exceed V^UF by up to this.
pub fn last_period_revenue(inst: &Instance) -> f64 {
    let marginals = state_marginals(&inst.arrival);
    let Some(last) = marginals.last() else { return 0.0 };
    last.iter()
        .zip(&inst.arrival.state_type)
        .filter_map(|(p, ty)| ty.map(|j| p * inst.types[j].reward))
        .sum()
}
