#![allow(dead_code)]

use topounet_cli::{DataSpec, ExperimentConfig};
use topounet_core::RankPath;
use topounet_harness::ablation::AblationSpec;
use topounet_harness::synthetic::OffsetRingOptions;
use topounet_harness::{SplitScheme, TaskKind, TrainOptions};
use topounet_model::{Head, TopoUNetConfig, TransportKind};
use topounet_tensor::{Activation, Adam};

pub fn path(ranks: &[usize]) -> RankPath {
    RankPath::new(ranks.to_vec()).unwrap()
}

/// Node classification on offset rings through the deepest path 0-1-2-3,
/// with the three U-shapes and both skip settings as ablation rows.
pub fn rings_config(epochs: usize, seeds: Vec<u64>) -> ExperimentConfig {
    let opts = OffsetRingOptions::default();
    let model = TopoUNetConfig::uniform(
        path(&[0, 1, 2, 3]),
        vec![opts.feature_dim, 16, 16, 16],
        TransportKind::NormalizedIncidence,
        16,
        Head::NodeClassify {
            num_classes: opts.num_classes(),
        },
    );
    let ablation = [vec![0, 1], vec![0, 1, 2], vec![0, 1, 2, 3]]
        .iter()
        .flat_map(|p| {
            [true, false].map(|use_skips| AblationSpec {
                path: path(p),
                use_skips,
            })
        })
        .collect();
    ExperimentConfig {
        task: TaskKind::NodeTask,
        data: DataSpec::OffsetRings { options: opts },
        model,
        training: TrainOptions {
            epochs,
            patience: epochs,
            batch_size: 1,
            adam: Adam {
                lr: 1e-2,
                ..Adam::default()
            },
        },
        split: SplitScheme::RandomPercent { train: 0.6, val: 0.2 },
        ablation,
        output_dir: "runs".into(),
        seeds,
    }
}

/// Graph classification on the bundled toy grids.
pub fn toy_grid_config(epochs: usize) -> ExperimentConfig {
    let mut model = TopoUNetConfig::uniform(
        path(&[0, 1, 2]),
        vec![1, 8, 8],
        TransportKind::NormalizedIncidence,
        8,
        Head::GraphClassifyMeanPool { num_classes: 2 },
    );
    model.activation = Activation::LeakyRelu;
    ExperimentConfig {
        task: TaskKind::GraphTask,
        data: DataSpec::ToyGrids { count: 24, seed: 0 },
        model,
        training: TrainOptions {
            epochs,
            patience: epochs,
            batch_size: 8,
            adam: Adam {
                lr: 1e-2,
                ..Adam::default()
            },
        },
        split: SplitScheme::default(),
        ablation: vec![],
        output_dir: "runs".into(),
        seeds: vec![0, 1],
    }
}
