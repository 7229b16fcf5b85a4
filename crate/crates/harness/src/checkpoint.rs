use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use topounet_model::{TopoUNet, TopoUNetConfig};

use crate::error::HarnessError;

/// A trained model on disk: its config plus every parameter value.
/// Floats round-trip exactly, so a reloaded model predicts bit for bit.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub config: TopoUNetConfig,
    pub params: BTreeMap<String, Array2<f64>>,
}

impl Checkpoint {
    pub fn of(model: &TopoUNet) -> Self {
        Self {
            config: model.config.clone(),
            params: model
                .params
                .iter()
                .map(|(n, p)| (n.to_string(), p.value.clone()))
                .collect(),
        }
    }

    /// Rebuilds the model, insisting on the exact parameter set the config
    /// implies.
    pub fn into_model(self) -> Result<TopoUNet, HarnessError> {
        let mut model = TopoUNet::new(self.config)?;
        if model.params.len() != self.params.len() {
            return Err(HarnessError::Data(format!(
                "checkpoint has {} parameters, config needs {}",
                self.params.len(),
                model.params.len()
            )));
        }
        for (name, value) in self.params {
            let p = model
                .params
                .get_mut(&name)
                .ok_or_else(|| HarnessError::Data(format!("unexpected parameter {name}")))?;
            if p.value.dim() != value.dim() {
                return Err(HarnessError::Data(format!(
                    "parameter {name}: shape {:?}, expected {:?}",
                    value.dim(),
                    p.value.dim()
                )));
            }
            p.value = value;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
