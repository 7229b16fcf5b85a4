use serde::{Deserialize, Serialize};
use topounet_core::{support_profile, RankPath};
use topounet_model::{count_parameters, TopoUNetConfig};

use crate::dataset::Dataset;
use crate::error::HarnessError;
use crate::pool::parallel_map;
use crate::splits::{seed_splits, SplitScheme};
use crate::train::{metric_for, train, Metric, RunResult, TrainOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    pub path: RankPath,
    pub use_skips: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// U-shaped rank sequence, e.g. `0-1-2-1-0`.
    pub path: String,
    pub use_skips: bool,
    /// Mean `ρ_bot` over the dataset's complexes.
    pub rho_total: f64,
    pub num_parameters: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds.
    pub std: f64,
    pub runs: Vec<RunResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub path: String,
    pub with_skips: f64,
    pub without_skips: f64,
    /// No-skip minus with-skip for accuracy; relative increase for MSE.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub metric: Metric,
    pub rows: Vec<AblationRow>,
    pub deltas: Vec<DeltaRow>,
}

pub fn skip_delta(metric: Metric, with_skips: f64, without_skips: f64) -> f64 {
    match metric {
        Metric::Accuracy => without_skips - with_skips,
        Metric::Mse => (without_skips - with_skips) / with_skips,
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// `base` rebound to `path`: input width kept, every other level at the
/// width of `base`'s last level.
pub fn config_for(base: &TopoUNetConfig, spec: &AblationSpec) -> TopoUNetConfig {
    let hidden = *base.dims.last().expect("validated config");
    let dims = (0..spec.path.len())
        .map(|l| if l == 0 { base.dims[0] } else { hidden })
        .collect();
    base.with_path(spec.path.clone(), dims, spec.use_skips)
}

fn rho_total(dataset: &Dataset, path: &RankPath) -> Result<f64, HarnessError> {
    let complexes = dataset.complexes();
    let mut total = 0.0;
    for cc in &complexes {
        total += support_profile(cc, path)?.bottleneck().value();
    }
    Ok(total / complexes.len() as f64)
}

/// Runs every matrix entry for every seed. Seed `s` draws its own split
/// (fold `i mod k` for the `i`-th seed under k-fold) and initialization.
/// Runs are spread over `threads` workers; results keep seed order.
pub fn run_ablation(
    base: &TopoUNetConfig,
    matrix: &[AblationSpec],
    dataset: &Dataset,
    scheme: SplitScheme,
    options: &TrainOptions,
    seeds: &[u64],
    threads: usize,
) -> Result<AblationTable, HarnessError> {
    let metric = metric_for(dataset);
    let splits = seed_splits(dataset, scheme, seeds)?;
    let jobs: Vec<(usize, usize)> = (0..matrix.len())
        .flat_map(|m| (0..seeds.len()).map(move |s| (m, s)))
        .collect();
    let configs: Vec<TopoUNetConfig> = matrix.iter().map(|spec| config_for(base, spec)).collect();
    let results = parallel_map(&jobs, threads, |&(m, s)| {
        train(&configs[m], dataset, &splits[s], options, seeds[s]).map(|t| t.result)
    });
    let mut results = results.into_iter();
    let mut rows = Vec::new();
    for (spec, config) in matrix.iter().zip(&configs) {
        let runs: Vec<RunResult> = results.by_ref().take(seeds.len()).collect::<Result<_, _>>()?;
        let values: Vec<f64> = runs.iter().map(|r| r.test_metric).collect();
        let (mean, std) = mean_std(&values);
        rows.push(AblationRow {
            path: spec.path.u_shape(),
            use_skips: spec.use_skips,
            rho_total: rho_total(dataset, &spec.path)?,
            num_parameters: count_parameters(config)?,
            mean,
            std,
            runs,
        });
    }
    let mut deltas = Vec::new();
    for with in rows.iter().filter(|r| r.use_skips) {
        if let Some(without) = rows.iter().find(|r| !r.use_skips && r.path == with.path) {
            deltas.push(DeltaRow {
                path: with.path.clone(),
                with_skips: with.mean,
                without_skips: without.mean,
                delta: skip_delta(metric, with.mean, without.mean),
            });
        }
    }
    Ok(AblationTable { metric, rows, deltas })
}

impl AblationTable {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<16} {:>5} {:>8} {:>8} {:>10} {:>10}\n",
            "path", "skips", "rho", "params", "mean", "std"
        );
        for r in &self.rows {
            out += &format!(
                "{:<16} {:>5} {:>8.4} {:>8} {:>10.4} {:>10.4}\n",
                r.path, r.use_skips, r.rho_total, r.num_parameters, r.mean, r.std
            );
        }
        if !self.deltas.is_empty() {
            out += &format!("\n{:<16} {:>10} {:>10} {:>10}\n", "path", "skip", "no-skip", "delta");
            for d in &self.deltas {
                out += &format!(
                    "{:<16} {:>10.4} {:>10.4} {:>+10.4}\n",
                    d.path, d.with_skips, d.without_skips, d.delta
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_conventions() {
        assert!((skip_delta(Metric::Accuracy, 0.9, 0.7) + 0.2).abs() < 1e-12);
        assert!((skip_delta(Metric::Mse, 0.01, 0.0126) - 0.26).abs() < 1e-12);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }
}
