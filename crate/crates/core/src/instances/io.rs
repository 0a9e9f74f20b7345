//! `nrm-instance/1` JSON files.
//!
//! Floats go through serde_json's shortest round-trip formatting, so every
//! value reads back bit-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assortment::ChoiceModel;
use crate::error::{NrmError, Result};
use crate::model::{CustomerType, Instance, MarkovArrival, Resource};

pub const SCHEMA_VERSION: &str = "nrm-instance/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    name: String,
    #[serde(rename = "type")]
    ty: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: String,
    horizon: usize,
    resources: Vec<Resource>,
    types: Vec<CustomerType>,
    states: Vec<StateEntry>,
    initial: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choice: Option<ChoiceModel>,
}

pub fn to_json(instance: &Instance) -> String {
    let arr = &instance.arrival;
    let file = InstanceFile {
        version: SCHEMA_VERSION.to_string(),
        horizon: arr.horizon,
        resources: instance.resources.clone(),
        types: instance.types.clone(),
        states: arr
            .state_names
            .iter()
            .zip(&arr.state_type)
            .map(|(name, ty)| StateEntry { name: name.clone(), ty: *ty })
            .collect(),
        initial: arr.initial.clone(),
        transitions: arr.transitions.clone(),
        choice: instance.choice.clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("instance serialises");
    out.push('\n');
    out
}

/// Parse and validate; near-stochastic rows come back renormalised.
pub fn from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| NrmError::Schema(e.to_string()))?;
    if file.version != SCHEMA_VERSION {
        return Err(NrmError::Schema(format!(
            "schema version {:?} is not supported (expected {SCHEMA_VERSION:?})",
            file.version
        )));
    }
    let (state_names, state_type) = file.states.into_iter().map(|e| (e.name, e.ty)).unzip();
    Instance {
        resources: file.resources,
        types: file.types,
        arrival: MarkovArrival {
            horizon: file.horizon,
            state_names,
            initial: file.initial,
            transitions: file.transitions,
            state_type,
        },
        choice: file.choice,
    }
    .validated()
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| NrmError::Io { path: path.display().to_string(), source })?;
    from_json(&text).map_err(|e| match e {
        NrmError::Schema(msg) => NrmError::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(instance)).map_err(|source| NrmError::Io { path: path.display().to_string(), source })
}
