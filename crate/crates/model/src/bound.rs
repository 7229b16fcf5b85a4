use std::sync::Arc;

use topounet_core::operators::row_normalize;
use topounet_core::{adjacency, incidence, CombinatorialComplex, Normalization};
use topounet_tensor::SparseMatrix;

use crate::config::{RefinementKind, RefinementSpec, TopoUNetConfig, TransportKind};
use crate::error::ModelError;

/// One direction of one path step, as a `n_target × n_source` matrix plus its
/// entry lists for the per-incidence (attention, gated) transports.
#[derive(Clone, Debug)]
pub struct Direction {
    /// Aggregation matrix for the step's transport kind.
    pub matrix: Arc<SparseMatrix>,
    /// Mean aggregation, used for attention summaries.
    pub mean: Arc<SparseMatrix>,
    pub targets: Arc<Vec<usize>>,
    pub sources: Arc<Vec<usize>>,
    /// Entry values of `mean`, aligned with `targets`/`sources`.
    pub weights: Arc<Vec<f64>>,
}

impl Direction {
    fn new(raw: SparseMatrix, kind: TransportKind) -> Self {
        let mean = row_normalize(&raw);
        let trips = mean.triplets();
        let matrix = match kind {
            TransportKind::IncidenceConv => raw,
            _ => mean.clone(),
        };
        Self {
            matrix: Arc::new(matrix),
            mean: Arc::new(mean),
            targets: Arc::new(trips.iter().map(|t| t.0).collect()),
            sources: Arc::new(trips.iter().map(|t| t.1).collect()),
            weights: Arc::new(trips.iter().map(|t| t.2).collect()),
        }
    }

    pub fn num_targets(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Operators a model needs on one complex. Cheap to clone and safe to share
/// across workers.
#[derive(Clone, Debug)]
pub struct BoundComplex {
    /// Cell count per path level.
    pub counts: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Step `i` maps level `i` to level `i + 1`.
    pub up: Vec<Direction>,
    /// Step `i` maps level `i + 1` to level `i`.
    pub down: Vec<Direction>,
    /// Row-normalized `A_{r|q}` per level for message-passing refinements.
    pub refine_adjacency: Vec<Option<Arc<SparseMatrix>>>,
    pub bottleneck_adjacency: Option<Arc<SparseMatrix>>,
}

fn default_via(ranks: &[usize], level: usize) -> Option<usize> {
    if level + 1 < ranks.len() {
        Some(ranks[level + 1])
    } else if level > 0 {
        Some(ranks[0])
    } else {
        None
    }
}

fn level_adjacency(
    cc: &CombinatorialComplex,
    ranks: &[usize],
    level: usize,
    spec: &RefinementSpec,
) -> Result<Option<Arc<SparseMatrix>>, ModelError> {
    if spec.kind != RefinementKind::SameRankMessagePassing {
        return Ok(None);
    }
    let via = spec.via_rank.or_else(|| default_via(ranks, level)).ok_or_else(|| {
        ModelError::Config(format!(
            "message passing at rank {} needs an explicit via_rank",
            ranks[level]
        ))
    })?;
    let a = adjacency(cc, ranks[level], via)?;
    Ok(Some(Arc::new(row_normalize(&a.matrix))))
}

impl BoundComplex {
    pub fn new(config: &TopoUNetConfig, cc: &CombinatorialComplex) -> Result<Self, ModelError> {
        config.validate()?;
        config.path.check(cc)?;
        let ranks = config.path.ranks().to_vec();
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (i, w) in ranks.windows(2).enumerate() {
            let b = incidence(cc, w[0], w[1], Normalization::Raw)?;
            let kind = config.transport[i].kind;
            up.push(Direction::new(b.raw().transpose(), kind));
            down.push(Direction::new(b.raw().clone(), kind));
        }
        let refine_adjacency = config
            .refinement
            .iter()
            .enumerate()
            .map(|(l, spec)| level_adjacency(cc, &ranks, l, spec))
            .collect::<Result<_, _>>()?;
        let bottleneck_adjacency = level_adjacency(cc, &ranks, ranks.len() - 1, &config.bottleneck)?;
        Ok(Self {
            counts: ranks.iter().map(|&r| cc.num_cells(r)).collect(),
            ranks,
            up,
            down,
            refine_adjacency,
            bottleneck_adjacency,
        })
    }

    pub fn input_cells(&self) -> usize {
        self.counts[0]
    }
}
