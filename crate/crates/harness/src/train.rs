use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use topounet_core::CombinatorialComplex;
use topounet_model::{BoundComplex, Head, Pass, Target, TopoUNet, TopoUNetConfig};
use topounet_tensor::{Adam, Binding, ParameterStore, Tape, Var};

use crate::dataset::Dataset;
use crate::error::HarnessError;
use crate::pool::parallel_map;
use crate::splits::{seed_splits, Split, SplitScheme};

type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Samples per optimizer step for graph and reconstruction tasks.
    pub batch_size: usize,
    pub adam: Adam,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 300,
            patience: 50,
            batch_size: 32,
            adam: Adam::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Mse,
}

impl Metric {
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Mse => a < b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_metric: f64,
    pub val_loss: f64,
    pub val_metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub metric: Metric,
    /// Epoch 0 is the untrained model.
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Test metric of the parameters from `best_epoch`.
    pub test_metric: f64,
    pub wall_time_secs: f64,
    pub num_parameters: usize,
}

impl RunResult {
    /// Equality ignoring wall time.
    pub fn same_numbers(&self, other: &RunResult) -> bool {
        RunResult {
            wall_time_secs: 0.0,
            ..self.clone()
        } == RunResult {
            wall_time_secs: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug)]
pub struct TrainedModel {
    /// Parameters from the best validation epoch.
    pub model: TopoUNet,
    pub result: RunResult,
}

pub fn metric_for(dataset: &Dataset) -> Metric {
    match dataset {
        Dataset::Reconstruction { .. } => Metric::Mse,
        _ => Metric::Accuracy,
    }
}

/// Per-item predictions of one evaluation pass.
enum Predictions {
    /// One row of logits per node or graph.
    Logits(Array2<f64>),
    /// Per-signal squared error mean.
    Errors(Vec<f64>),
}

fn log_softmax_row(row: ndarray::ArrayView1<'_, f64>) -> Vec<f64> {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

impl Predictions {
    fn loss_and_metric(&self, labels: Option<&[usize]>, items: &[usize]) -> (f64, f64) {
        if items.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let n = items.len() as f64;
        match self {
            Predictions::Logits(z) => {
                let labels = labels.expect("classification task");
                let mut loss = 0.0;
                let mut correct = 0usize;
                for &i in items {
                    let row = z.row(i);
                    loss -= log_softmax_row(row)[labels[i]];
                    let arg = row
                        .iter()
                        .enumerate()
                        .fold(
                            (0, f64::NEG_INFINITY),
                            |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc },
                        )
                        .0;
                    correct += usize::from(arg == labels[i]);
                }
                (loss / n, correct as f64 / n)
            }
            Predictions::Errors(e) => {
                let mse = items.iter().map(|&i| e[i]).sum::<f64>() / n;
                (mse, mse)
            }
        }
    }
}

struct Runner<'a> {
    dataset: &'a Dataset,
    bounds: Vec<Arc<BoundComplex>>,
}

impl<'a> Runner<'a> {
    fn new(config: &TopoUNetConfig, dataset: &'a Dataset) -> Result<Self> {
        let head_ok = matches!(
            (config.head, dataset),
            (Head::NodeClassify { .. }, Dataset::Nodes { .. })
                | (Head::GraphClassifyMeanPool { .. }, Dataset::Graphs { .. })
                | (Head::Reconstruct { .. }, Dataset::Reconstruction { .. })
        );
        if !head_ok {
            return Err(HarnessError::Data(format!(
                "head {:?} does not fit a {:?} dataset",
                config.head,
                dataset.kind()
            )));
        }
        if config.dims[0] != dataset.input_dim() {
            return Err(HarnessError::Data(format!(
                "model input width {} but features have {} columns",
                config.dims[0],
                dataset.input_dim()
            )));
        }
        // samples sharing one complex share its operators
        let mut bound_of: Vec<(*const CombinatorialComplex, Arc<BoundComplex>)> = Vec::new();
        let mut bounds = Vec::new();
        for cc in dataset.complexes() {
            let key = Arc::as_ptr(cc);
            let b = match bound_of.iter().find(|(k, _)| *k == key) {
                Some((_, b)) => b.clone(),
                None => {
                    let b = Arc::new(BoundComplex::new(config, cc)?);
                    bound_of.push((key, b.clone()));
                    b
                }
            };
            bounds.push(b);
        }
        Ok(Self { dataset, bounds })
    }

    fn bound(&self, sample: usize) -> &BoundComplex {
        &self.bounds[sample.min(self.bounds.len() - 1)]
    }

    fn input(&self, sample: usize) -> &Array2<f64> {
        match self.dataset {
            Dataset::Nodes { features, .. } => features,
            Dataset::Graphs { features, .. } => &features[sample],
            Dataset::Reconstruction { signals, .. } => &signals[sample],
        }
    }

    fn target(&self, sample: usize) -> Target {
        match self.dataset {
            Dataset::Nodes { .. } => unreachable!("node targets are built from a row set"),
            Dataset::Graphs { labels, .. } => Target::Graph(labels[sample]),
            Dataset::Reconstruction { signals, .. } => Target::Values(Arc::new(signals[sample].clone())),
        }
    }

    fn sample_loss(&self, model: &TopoUNet, pass: &mut Pass<'_>, sample: usize, target: &Target) -> Result<Var> {
        let x = pass.tape.constant(self.input(sample).clone());
        let out = model.forward(pass, self.bound(sample), x)?.output;
        Ok(model.head_apply(pass, out, target)?.1)
    }

    /// One epoch of optimization; returns the mean step loss.
    fn epoch(
        &self,
        model: &mut TopoUNet,
        train: &[usize],
        options: &TrainOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let batches: Vec<Vec<usize>> = match self.dataset {
            Dataset::Nodes { .. } => vec![train.to_vec()],
            _ => {
                let mut order = train.to_vec();
                order.shuffle(rng);
                order.chunks(options.batch_size.max(1)).map(<[usize]>::to_vec).collect()
            }
        };
        let mut total = 0.0;
        for batch in &batches {
            let mut tape = Tape::new();
            let mut binding = Binding::new();
            let mut pass = Pass::training(&mut tape, &mut binding, rng);
            let loss = match self.dataset {
                Dataset::Nodes { labels, .. } => {
                    let target = Target::Nodes {
                        rows: Arc::new(batch.clone()),
                        labels: Arc::new(batch.iter().map(|&i| labels[i]).collect()),
                    };
                    self.sample_loss(model, &mut pass, 0, &target)?
                }
                _ => {
                    let mut acc: Option<Var> = None;
                    for &s in batch {
                        let l = self.sample_loss(model, &mut pass, s, &self.target(s))?;
                        acc = Some(match acc {
                            Some(a) => pass.tape.add(a, l)?,
                            None => l,
                        });
                    }
                    let sum = acc.expect("batches are nonempty");
                    pass.tape.scale(sum, 1.0 / batch.len() as f64)
                }
            };
            let value = tape.value(loss)[[0, 0]];
            if !value.is_finite() {
                return Err(HarnessError::NonFiniteLoss { epoch: 0 });
            }
            tape.backward(loss)?;
            model.params.zero_grads();
            model.params.absorb_grads(&tape, &binding);
            options.adam.step(&mut model.params)?;
            total += value;
        }
        Ok(total / batches.len() as f64)
    }

    fn predict(&self, model: &TopoUNet, items: &[usize]) -> Result<Predictions> {
        Ok(match self.dataset {
            Dataset::Nodes { features, .. } => Predictions::Logits(model.predict(self.bound(0), features)?),
            Dataset::Graphs {
                features, num_classes, ..
            } => {
                let mut z = Array2::from_elem((features.len(), *num_classes), f64::NAN);
                for &s in items {
                    let row = model.predict(self.bound(s), &features[s])?;
                    z.row_mut(s).assign(&row.index_axis(Axis(0), 0));
                }
                Predictions::Logits(z)
            }
            Dataset::Reconstruction { signals, .. } => {
                let mut e = vec![f64::NAN; signals.len()];
                for &s in items {
                    let pred = model.predict(self.bound(s), &signals[s])?;
                    e[s] = (&pred - &signals[s]).mapv(|v| v * v).mean().unwrap_or(0.0);
                }
                Predictions::Errors(e)
            }
        })
    }
}

/// Trains `config` (with its seed replaced by `seed`) on `split`, keeping
/// the parameters of the best validation epoch. Epoch 0 evaluates the
/// untrained model; with `epochs = 0` the result describes that model.
pub fn train(
    config: &TopoUNetConfig,
    dataset: &Dataset,
    split: &Split,
    options: &TrainOptions,
    seed: u64,
) -> Result<TrainedModel> {
    let start = Instant::now();
    if split.train.is_empty() {
        return Err(HarnessError::Split("empty training set".into()));
    }
    let config = TopoUNetConfig { seed, ..config.clone() };
    let runner = Runner::new(&config, dataset)?;
    let mut model = TopoUNet::new(config)?;
    let metric = metric_for(dataset);
    let labels = dataset.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d0d0);
    let eval_items: Vec<usize> = match dataset {
        // reconstruction tracks training error through the step losses
        Dataset::Reconstruction { .. } => split.val.clone(),
        _ => {
            let mut v = split.train.clone();
            v.extend(&split.val);
            v
        }
    };

    let mut records = Vec::new();
    let mut best: Option<(usize, f64, ParameterStore)> = None;
    for epoch in 0..=options.epochs {
        let step_loss = if epoch == 0 {
            None
        } else {
            Some(
                runner
                    .epoch(&mut model, &split.train, options, &mut rng)
                    .map_err(|e| match e {
                        HarnessError::NonFiniteLoss { .. } => HarnessError::NonFiniteLoss { epoch },
                        other => other,
                    })?,
            )
        };
        let preds = runner.predict(&model, &eval_items)?;
        let (val_loss, val_metric) = preds.loss_and_metric(labels, &split.val);
        let (train_loss, train_metric) = match (&preds, step_loss) {
            (Predictions::Errors(_), Some(l)) => (l, l),
            (Predictions::Errors(_), None) => (f64::NAN, f64::NAN),
            _ => {
                let (l, m) = preds.loss_and_metric(labels, &split.train);
                (step_loss.unwrap_or(l), m)
            }
        };
        records.push(EpochRecord {
            epoch,
            train_loss,
            train_metric,
            val_loss,
            val_metric,
        });
        // without a validation set the latest epoch is kept
        let improved = match &best {
            None => true,
            Some((_, b, _)) => val_metric.is_nan() || metric.better(val_metric, *b),
        };
        if improved {
            best = Some((epoch, val_metric, model.params.clone()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch - best_epoch >= options.patience.max(1) {
            break;
        }
    }
    let (best_epoch, _, params) = best.expect("epoch 0 always runs");
    model.params = params;
    let test_metric = if split.test.is_empty() {
        f64::NAN
    } else {
        runner
            .predict(&model, &split.test)?
            .loss_and_metric(labels, &split.test)
            .1
    };
    let result = RunResult {
        seed,
        metric,
        epochs: records,
        best_epoch,
        test_metric,
        wall_time_secs: start.elapsed().as_secs_f64(),
        num_parameters: model.num_parameters(),
    };
    Ok(TrainedModel { model, result })
}

/// Metric of `model` on `items`, as recorded by [`train`].
pub fn evaluate(model: &TopoUNet, dataset: &Dataset, items: &[usize]) -> Result<f64> {
    let runner = Runner::new(&model.config, dataset)?;
    Ok(runner.predict(model, items)?.loss_and_metric(dataset.labels(), items).1)
}

/// Trains `config` once per seed, each on its own split, across `threads`
/// workers. Results are in seed order and independent of `threads`.
pub fn train_seeds(
    config: &TopoUNetConfig,
    dataset: &Dataset,
    scheme: SplitScheme,
    options: &TrainOptions,
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<RunResult>> {
    let splits = seed_splits(dataset, scheme, seeds)?;
    let idx: Vec<usize> = (0..seeds.len()).collect();
    parallel_map(&idx, threads, |&i| {
        train(config, dataset, &splits[i], options, seeds[i]).map(|t| t.result)
    })
    .into_iter()
    .collect()
}
