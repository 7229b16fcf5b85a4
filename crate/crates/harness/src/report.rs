use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ablation::{mean_std, AblationTable};
use crate::error::HarnessError;
use crate::train::{Metric, RunResult};

/// SHA-256 of the compact JSON encoding of `value`, hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// First twelve hex digits, used in file names.
pub fn short_hash(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

#[derive(Serialize)]
struct RunRow<'a> {
    label: &'a str,
    seed: u64,
    metric: Metric,
    best_epoch: usize,
    epochs_run: usize,
    test_metric: f64,
    num_parameters: usize,
    wall_time_secs: f64,
}

#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub config_hash: String,
    pub label: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

pub fn runs_csv(runs: &[(String, RunResult)]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (label, r) in runs {
        w.serialize(RunRow {
            label,
            seed: r.seed,
            metric: r.metric,
            best_epoch: r.best_epoch,
            epochs_run: r.epochs.len() - 1,
            test_metric: r.test_metric,
            num_parameters: r.num_parameters,
            wall_time_secs: r.wall_time_secs,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn aggregate(hash: &str, label: &str, runs: &[RunResult]) -> Aggregate {
    let values: Vec<f64> = runs.iter().map(|r| r.test_metric).collect();
    let (mean, std) = mean_std(&values);
    Aggregate {
        config_hash: hash.to_string(),
        label: label.to_string(),
        metric: runs.first().map_or(Metric::Accuracy, |r| r.metric),
        mean,
        std,
        n_seeds: runs.len(),
    }
}

/// Output files for one experiment, named `{stem}-{hash12}.{ext}`.
pub struct OutputSet {
    pub dir: PathBuf,
    pub stem: String,
    pub hash: String,
}

impl OutputSet {
    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}-{}.{ext}", self.stem, short_hash(&self.hash)))
    }

    /// Refuses to replace existing outputs unless `force` is set.
    pub fn check_writable(&self, exts: &[&str], force: bool) -> Result<(), HarnessError> {
        if force {
            return Ok(());
        }
        for ext in exts {
            let p = self.path(ext);
            if p.exists() {
                return Err(HarnessError::Exists(p));
            }
        }
        Ok(())
    }

    /// Writes every file after all contents are ready, so a failure leaves
    /// no partial set behind.
    pub fn write_all(&self, files: &[(&str, String)]) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(&self.dir)?;
        let mut written = Vec::new();
        for (ext, body) in files {
            let p = self.path(ext);
            fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}

pub fn ablation_csv(table: &AblationTable) -> Result<String, HarnessError> {
    #[derive(Serialize)]
    struct Row<'a> {
        path: &'a str,
        use_skips: bool,
        rho_total: f64,
        num_parameters: usize,
        mean: f64,
        std: f64,
        n_seeds: usize,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &table.rows {
        w.serialize(Row {
            path: &r.path,
            use_skips: r.use_skips,
            rho_total: r.rho_total,
            num_parameters: r.num_parameters,
            mean: r.mean,
            std: r.std,
            n_seeds: r.runs.len(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
