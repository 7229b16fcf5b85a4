use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use topounet_core::CombinatorialComplex;

use crate::error::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    NodeTask,
    GraphTask,
    HypergraphTask,
    ReconstructionTask,
}

/// A learning task over one or more complexes.
#[derive(Clone, Debug)]
pub enum Dataset {
    /// Transductive labels on the rank-0 cells of a single complex.
    Nodes {
        kind: TaskKind,
        complex: Arc<CombinatorialComplex>,
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    },
    /// One label per complex.
    Graphs {
        complexes: Vec<Arc<CombinatorialComplex>>,
        features: Vec<Array2<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
    },
    /// Rank-0 signals on a shared complex, each its own target.
    Reconstruction {
        complex: Arc<CombinatorialComplex>,
        signals: Vec<Array2<f64>>,
    },
}

fn check_labels(labels: &[usize], num_classes: usize) -> Result<(), HarnessError> {
    match labels.iter().find(|&&l| l >= num_classes) {
        Some(l) => Err(HarnessError::Data(format!("label {l} outside [0, {num_classes})"))),
        None => Ok(()),
    }
}

impl Dataset {
    pub fn nodes(
        kind: TaskKind,
        complex: CombinatorialComplex,
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, HarnessError> {
        let n = complex.num_cells(0);
        if features.nrows() != n || labels.len() != n {
            return Err(HarnessError::Data(format!(
                "{n} rank-0 cells but {} feature rows and {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        check_labels(&labels, num_classes)?;
        Ok(Dataset::Nodes {
            kind,
            complex: Arc::new(complex),
            features,
            labels,
            num_classes,
        })
    }

    /// Samples may share one complex by passing clones of the same `Arc`.
    pub fn graphs(
        complexes: Vec<Arc<CombinatorialComplex>>,
        features: Vec<Array2<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, HarnessError> {
        if complexes.len() != features.len() || complexes.len() != labels.len() {
            return Err(HarnessError::Data("complex, feature, and label counts differ".into()));
        }
        for (i, (cc, x)) in complexes.iter().zip(&features).enumerate() {
            if cc.num_cells(0) != x.nrows() {
                return Err(HarnessError::Data(format!(
                    "sample {i}: {} rank-0 cells but {} feature rows",
                    cc.num_cells(0),
                    x.nrows()
                )));
            }
        }
        check_labels(&labels, num_classes)?;
        Ok(Dataset::Graphs {
            complexes,
            features,
            labels,
            num_classes,
        })
    }

    pub fn reconstruction(complex: CombinatorialComplex, signals: Vec<Array2<f64>>) -> Result<Self, HarnessError> {
        let n = complex.num_cells(0);
        if let Some(s) = signals.iter().find(|s| s.nrows() != n) {
            return Err(HarnessError::Data(format!(
                "signal with {} rows on {n} cells",
                s.nrows()
            )));
        }
        Ok(Dataset::Reconstruction {
            complex: Arc::new(complex),
            signals,
        })
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Dataset::Nodes { kind, .. } => *kind,
            Dataset::Graphs { .. } => TaskKind::GraphTask,
            Dataset::Reconstruction { .. } => TaskKind::ReconstructionTask,
        }
    }

    /// Number of split units: nodes for node tasks, samples otherwise.
    pub fn len(&self) -> usize {
        match self {
            Dataset::Nodes { labels, .. } | Dataset::Graphs { labels, .. } => labels.len(),
            Dataset::Reconstruction { signals, .. } => signals.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match self {
            Dataset::Nodes { labels, .. } | Dataset::Graphs { labels, .. } => Some(labels),
            Dataset::Reconstruction { .. } => None,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self {
            Dataset::Nodes { num_classes, .. } | Dataset::Graphs { num_classes, .. } => Some(*num_classes),
            Dataset::Reconstruction { .. } => None,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Dataset::Nodes { features, .. } => features.ncols(),
            Dataset::Graphs { features, .. } => features.first().map_or(0, |x| x.ncols()),
            Dataset::Reconstruction { signals, .. } => signals.first().map_or(0, |x| x.ncols()),
        }
    }

    pub fn complexes(&self) -> Vec<&Arc<CombinatorialComplex>> {
        match self {
            Dataset::Nodes { complex, .. } | Dataset::Reconstruction { complex, .. } => {
                vec![complex]
            }
            Dataset::Graphs { complexes, .. } => complexes.iter().collect(),
        }
    }
}
