//! Experiment config files and the data sources they can name.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use topounet_core::io::{load_graph, load_grid_binary, load_grid_csv, load_hypergraph, parse_float_csv, parse_labels};
use topounet_core::lift::{
    lift_graph, lift_grid, lift_hypergraph, GraphInput, GraphLiftOptions, GridInput, HypergraphInput,
};
use topounet_core::CombinatorialComplex;
use topounet_harness::ablation::AblationSpec;
use topounet_harness::synthetic::{offset_rings, planted_partition, toy_grids, toy_hypergraph, OffsetRingOptions};
use topounet_harness::{Dataset, SplitScheme, TaskKind, TrainOptions};
use topounet_model::TopoUNetConfig;

use crate::error::CliError;

fn default_true() -> bool {
    true
}

fn default_overlap() -> usize {
    1
}

fn default_scale() -> f64 {
    1.0
}

/// Where the data comes from. Relative paths resolve against the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", deny_unknown_fields)]
pub enum DataSpec {
    /// TSV edge list with optional CSV features and a label file.
    Graph {
        edges: PathBuf,
        #[serde(default)]
        features: Option<PathBuf>,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        lift: GraphLiftOptions,
    },
    Hypergraph {
        hyperedges: PathBuf,
        #[serde(default)]
        features: Option<PathBuf>,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        num_nodes: Option<usize>,
        #[serde(default = "default_true")]
        with_rank2: bool,
        #[serde(default = "default_overlap")]
        min_pairwise_overlap: usize,
    },
    /// One flattened image per row, optionally preceded by its label.
    GridCsv {
        path: PathBuf,
        height: usize,
        width: usize,
        #[serde(default)]
        label_first: bool,
        #[serde(default)]
        limit: Option<usize>,
        /// Multiplies every pixel, e.g. `1/255` for 8-bit images.
        #[serde(default = "default_scale")]
        pixel_scale: f64,
    },
    GridBinary {
        path: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        limit: Option<usize>,
    },
    OffsetRings {
        #[serde(default, flatten)]
        options: OffsetRingOptions,
    },
    PlantedPartition {
        nodes: usize,
        classes: usize,
        p_in: f64,
        p_out: f64,
        feature_dim: usize,
        signal: f64,
        seed: u64,
        #[serde(default)]
        lift: GraphLiftOptions,
    },
    ToyGrids {
        count: usize,
        seed: u64,
    },
    ToyHypergraph,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub data: DataSpec,
    pub model: TopoUNetConfig,
    #[serde(default)]
    pub training: TrainOptions,
    #[serde(default)]
    pub split: SplitScheme,
    /// Variants for `ablate`: rank path and skip setting per row.
    #[serde(default)]
    pub ablation: Vec<AblationSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    /// Parses and validates; `base` anchors relative data paths.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        config.data.resolve(base);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::Usage("config: seeds must not be empty".into()));
        }
        let ok = matches!(
            (&self.task, &self.data),
            (
                TaskKind::NodeTask,
                DataSpec::Graph { .. } | DataSpec::OffsetRings { .. } | DataSpec::PlantedPartition { .. },
            ) | (
                TaskKind::HypergraphTask,
                DataSpec::Hypergraph { .. } | DataSpec::ToyHypergraph
            ) | (
                TaskKind::GraphTask | TaskKind::ReconstructionTask,
                DataSpec::GridCsv { .. } | DataSpec::GridBinary { .. } | DataSpec::ToyGrids { .. },
            )
        );
        if !ok {
            return Err(CliError::Usage(format!(
                "config: task {:?} cannot use data source {}",
                self.task,
                self.data.name()
            )));
        }
        Ok(())
    }

    /// The part of the config that determines results: output location is
    /// left out so moving a run does not change its hash.
    pub fn hashed(&self) -> ExperimentConfig {
        ExperimentConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        resolve(base, p);
    }
}

fn node_features(features: Option<Array2<f64>>, n: usize) -> Result<Array2<f64>, CliError> {
    match features {
        Some(f) if f.nrows() == n => Ok(f),
        Some(f) => Err(CliError::Data(format!("{} feature rows for {n} nodes", f.nrows()))),
        // featureless graphs get a constant channel
        None => Ok(Array2::ones((n, 1))),
    }
}

fn require_labels(labels: Option<Vec<usize>>, n: usize) -> Result<(Vec<usize>, usize), CliError> {
    let labels = labels.ok_or_else(|| CliError::Data("node labels are required for this task".into()))?;
    if labels.len() != n {
        return Err(CliError::Data(format!("{} labels for {n} nodes", labels.len())));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok((labels, classes))
}

fn limited<T>(mut v: Vec<T>, limit: Option<usize>) -> Vec<T> {
    if let Some(l) = limit {
        v.truncate(l);
    }
    v
}

impl DataSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DataSpec::Graph { .. } => "graph",
            DataSpec::Hypergraph { .. } => "hypergraph",
            DataSpec::GridCsv { .. } => "grid_csv",
            DataSpec::GridBinary { .. } => "grid_binary",
            DataSpec::OffsetRings { .. } => "offset_rings",
            DataSpec::PlantedPartition { .. } => "planted_partition",
            DataSpec::ToyGrids { .. } => "toy_grids",
            DataSpec::ToyHypergraph => "toy_hypergraph",
        }
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            DataSpec::Graph {
                edges,
                features,
                labels,
                ..
            } => {
                resolve(base, edges);
                resolve_opt(base, features);
                resolve_opt(base, labels);
            }
            DataSpec::Hypergraph {
                hyperedges,
                features,
                labels,
                ..
            } => {
                resolve(base, hyperedges);
                resolve_opt(base, features);
                resolve_opt(base, labels);
            }
            DataSpec::GridCsv { path, .. } => resolve(base, path),
            DataSpec::GridBinary { path, labels, .. } => {
                resolve(base, path);
                resolve_opt(base, labels);
            }
            _ => {}
        }
    }

    /// Images plus labels when the source has them.
    fn grids(&self) -> Result<(Vec<GridInput>, Option<Vec<usize>>), CliError> {
        Ok(match self {
            DataSpec::GridCsv {
                path,
                height,
                width,
                label_first,
                limit,
                pixel_scale,
            } => {
                let (mut images, labels) = load_grid_csv(path, *height, *width, *label_first)?;
                images.truncate(limit.unwrap_or(usize::MAX));
                for g in &mut images {
                    g.pixels *= *pixel_scale;
                }
                (images, labels.map(|l| limited(l, *limit)))
            }
            DataSpec::GridBinary { path, labels, limit } => {
                let images = limited(load_grid_binary(path)?, *limit);
                let labels = match labels {
                    Some(p) => {
                        let text = fs::read_to_string(p)?;
                        Some(limited(parse_labels(&text, &p.display().to_string())?, *limit))
                    }
                    None => None,
                };
                (images, labels)
            }
            DataSpec::ToyGrids { count, seed } => {
                let (images, labels) = toy_grids(*count, *seed).into_iter().unzip();
                (images, Some(labels))
            }
            _ => unreachable!("validated against the task"),
        })
    }

    fn graph(&self) -> Result<(GraphInput, GraphLiftOptions), CliError> {
        Ok(match self {
            DataSpec::Graph {
                edges,
                features,
                labels,
                lift,
            } => (load_graph(edges, features.as_deref(), labels.as_deref())?, *lift),
            DataSpec::PlantedPartition {
                nodes,
                classes,
                p_in,
                p_out,
                feature_dim,
                signal,
                seed,
                lift,
            } => (
                planted_partition(*nodes, *classes, *p_in, *p_out, *feature_dim, *signal, *seed)?,
                *lift,
            ),
            _ => unreachable!("validated against the task"),
        })
    }

    fn hypergraph(&self) -> Result<(HypergraphInput, bool, usize), CliError> {
        Ok(match self {
            DataSpec::Hypergraph {
                hyperedges,
                features,
                labels,
                num_nodes,
                with_rank2,
                min_pairwise_overlap,
            } => {
                let mut h = load_hypergraph(hyperedges, *num_nodes)?;
                if let Some(p) = features {
                    h.node_features = Some(parse_float_csv(&fs::read_to_string(p)?, &p.display().to_string())?);
                }
                if let Some(p) = labels {
                    h.node_labels = Some(parse_labels(&fs::read_to_string(p)?, &p.display().to_string())?);
                }
                (h, *with_rank2, *min_pairwise_overlap)
            }
            DataSpec::ToyHypergraph => (toy_hypergraph(), true, 1),
            _ => unreachable!("validated against the task"),
        })
    }
}

/// Reads and lifts the configured data into a dataset for `task`.
pub fn load_dataset(task: TaskKind, data: &DataSpec) -> Result<Dataset, CliError> {
    Ok(match (task, data) {
        (_, DataSpec::OffsetRings { options }) => offset_rings(options)?,
        (TaskKind::NodeTask, _) => {
            let (g, lift) = data.graph()?;
            let n = g.num_nodes();
            let (labels, classes) = require_labels(g.node_labels.clone(), n)?;
            let x = node_features(g.node_features.clone(), n)?;
            Dataset::nodes(task, lift_graph(&g, lift)?, x, labels, classes)?
        }
        (TaskKind::HypergraphTask, _) => {
            let (h, rank2, overlap) = data.hypergraph()?;
            let n = h.num_nodes();
            let (labels, classes) = require_labels(h.node_labels.clone(), n)?;
            let x = node_features(h.node_features.clone(), n)?;
            Dataset::nodes(task, lift_hypergraph(&h, rank2, overlap)?, x, labels, classes)?
        }
        (TaskKind::GraphTask, _) => {
            let (images, labels) = data.grids()?;
            let labels = labels.ok_or_else(|| CliError::Data("graph task needs image labels".into()))?;
            if images.len() != labels.len() {
                return Err(CliError::Data(format!(
                    "{} images but {} labels",
                    images.len(),
                    labels.len()
                )));
            }
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            let complexes = lift_images(&images)?;
            Dataset::graphs(
                complexes,
                images.into_iter().map(|g| g.pixels).collect(),
                labels,
                classes,
            )?
        }
        (TaskKind::ReconstructionTask, _) => {
            let (images, _) = data.grids()?;
            let first = images.first().ok_or_else(|| CliError::Data("no images".into()))?;
            if images
                .iter()
                .any(|g| (g.height, g.width) != (first.height, first.width))
            {
                return Err(CliError::Data("reconstruction needs images of one size".into()));
            }
            let cc = lift_grid(first)?;
            Dataset::reconstruction(cc, images.into_iter().map(|g| g.pixels).collect())?
        }
    })
}

/// Lifts each image, sharing one complex per distinct size.
fn lift_images(images: &[GridInput]) -> Result<Vec<Arc<CombinatorialComplex>>, CliError> {
    let mut cache: Vec<((usize, usize), Arc<CombinatorialComplex>)> = Vec::new();
    images
        .iter()
        .map(|g| {
            let key = (g.height, g.width);
            if let Some((_, cc)) = cache.iter().find(|(k, _)| *k == key) {
                return Ok(cc.clone());
            }
            let cc = Arc::new(lift_grid(g)?);
            cache.push((key, cc.clone()));
            Ok(cc)
        })
        .collect()
}
