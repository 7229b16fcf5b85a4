//! Checkpoints: a JSON manifest plus one little-endian `f64` blob per parameter.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::TensorError;
use crate::params::ParameterStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    pub step: u64,
    pub parameters: Vec<ManifestEntry>,
}

fn blob_name(index: usize) -> String {
    format!("param_{index:04}.bin")
}

/// Writes `manifest.json` and the parameter blobs into `dir`.
pub fn save(store: &ParameterStore, seed: u64, step: u64, dir: &Path) -> Result<(), TensorError> {
    fs::create_dir_all(dir)?;
    let mut parameters = Vec::with_capacity(store.len());
    for (i, (name, p)) in store.iter().enumerate() {
        let file = blob_name(i);
        let mut bytes = Vec::with_capacity(p.value.len() * 8);
        for v in p.value.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(dir.join(&file), bytes)?;
        let (r, c) = p.value.dim();
        parameters.push(ManifestEntry {
            name: name.to_string(),
            shape: [r, c],
            file,
        });
    }
    let manifest = Manifest { seed, step, parameters };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a checkpoint written by [`save`]. Optimizer moments are not stored.
pub fn load(dir: &Path) -> Result<(Manifest, ParameterStore), TensorError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let mut store = ParameterStore::new();
    for entry in &manifest.parameters {
        let bytes = fs::read(dir.join(&entry.file))?;
        let [r, c] = entry.shape;
        if bytes.len() != r * c * 8 {
            return Err(TensorError::Checkpoint(format!(
                "blob for `{}` has {} bytes, expected {}",
                entry.name,
                bytes.len(),
                r * c * 8
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        let value = Array2::from_shape_vec((r, c), values).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        store.insert(entry.name.clone(), value)?;
    }
    Ok((manifest, store))
}
