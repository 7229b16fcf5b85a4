use serde::{Deserialize, Serialize};
use topounet_core::RankPath;
use topounet_tensor::Activation;

use crate::error::ModelError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    /// Sum over incident cells through the 0/1 incidence matrix.
    IncidenceConv,
    /// Mean over incident cells.
    #[default]
    NormalizedIncidence,
    /// Softmax-weighted mean over incident cells, weights from a shared score.
    Attention,
    /// Sigmoid-gated mean over incident cells.
    Gated,
}

/// Transport used in both directions of one path step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSpec {
    pub kind: TransportKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementKind {
    None,
    #[default]
    PointwiseMlp,
    SameRankMessagePassing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementSpec {
    pub kind: RefinementKind,
    /// Rank `q` of `A_{r|q}` for message passing. Defaults to the next rank
    /// up the path, or the path's input rank at the top level.
    #[serde(default)]
    pub via_rank: Option<usize>,
    pub hidden_dim: usize,
}

impl RefinementSpec {
    pub fn none() -> Self {
        Self {
            kind: RefinementKind::None,
            via_rank: None,
            hidden_dim: 0,
        }
    }

    pub fn mlp(hidden_dim: usize) -> Self {
        Self {
            kind: RefinementKind::PointwiseMlp,
            via_rank: None,
            hidden_dim,
        }
    }

    pub fn message_passing(hidden_dim: usize) -> Self {
        Self {
            kind: RefinementKind::SameRankMessagePassing,
            via_rank: None,
            hidden_dim,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Merge {
    #[default]
    Additive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Head {
    NodeClassify { num_classes: usize },
    GraphClassifyMeanPool { num_classes: usize },
    Reconstruct { target_dim: usize },
}

impl Head {
    pub fn out_dim(self) -> usize {
        match self {
            Head::NodeClassify { num_classes } | Head::GraphClassifyMeanPool { num_classes } => num_classes,
            Head::Reconstruct { target_dim } => target_dim,
        }
    }
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_true() -> bool {
    true
}

fn default_dropout() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoUNetConfig {
    pub path: RankPath,
    /// Feature width per path level; `dims[0]` is the input width.
    pub dims: Vec<usize>,
    /// One entry per path step.
    pub transport: Vec<TransportSpec>,
    /// One entry per path level.
    pub refinement: Vec<RefinementSpec>,
    #[serde(default = "default_true")]
    pub use_skips: bool,
    #[serde(default)]
    pub merge: Merge,
    pub bottleneck: RefinementSpec,
    pub head: Head,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl TopoUNetConfig {
    /// Same transport kind at every step, pointwise MLP refinements and an
    /// MLP bottleneck of width `hidden`.
    pub fn uniform(path: RankPath, dims: Vec<usize>, kind: TransportKind, hidden: usize, head: Head) -> Self {
        let steps = path.len().saturating_sub(1);
        let levels = path.len();
        Self {
            path,
            dims,
            transport: vec![TransportSpec { kind }; steps],
            refinement: vec![RefinementSpec::mlp(hidden); levels],
            use_skips: true,
            merge: Merge::Additive,
            bottleneck: RefinementSpec::mlp(hidden),
            head,
            dropout: 0.0,
            seed: 0,
            activation: Activation::Relu,
        }
    }

    pub fn depth(&self) -> usize {
        self.path.depth()
    }

    /// Checks list lengths and widths against the path.
    pub fn validate(&self) -> Result<(), ModelError> {
        let levels = self.path.len();
        let err = |m: String| Err(ModelError::Config(m));
        if self.dims.len() != levels {
            return err(format!("{} dims for a path of {levels} ranks", self.dims.len()));
        }
        if self.transport.len() != levels - 1 {
            return err(format!(
                "{} transports for {} path steps",
                self.transport.len(),
                levels - 1
            ));
        }
        if self.refinement.len() != levels {
            return err(format!(
                "{} refinements for {levels} path levels",
                self.refinement.len()
            ));
        }
        if self.dims.contains(&0) {
            return err("feature widths must be positive".into());
        }
        for r in self.refinement.iter().chain([&self.bottleneck]) {
            if r.kind != RefinementKind::None && r.hidden_dim == 0 {
                return err("refinement hidden_dim must be positive".into());
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.head.out_dim() == 0 {
            return err("head output width must be positive".into());
        }
        Ok(())
    }

    /// Copy bound to a different path, resizing per-level lists by reusing
    /// the first entries. Used to build ablation variants.
    pub fn with_path(&self, path: RankPath, dims: Vec<usize>, use_skips: bool) -> Self {
        let levels = path.len();
        let transport = self.transport.first().copied().unwrap_or_default();
        let refinement = self.refinement.first().copied().unwrap_or(RefinementSpec::none());
        Self {
            path,
            dims,
            transport: vec![transport; levels - 1],
            refinement: vec![refinement; levels],
            use_skips,
            ..self.clone()
        }
    }
}
