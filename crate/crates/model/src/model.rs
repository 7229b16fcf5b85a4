use std::sync::Arc;

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topounet_tensor::{glorot_uniform, Binding, ParameterStore, Tape, TensorError, Var};

use crate::bound::{BoundComplex, Direction};
use crate::config::{Head, RefinementKind, RefinementSpec, TopoUNetConfig, TransportKind};
use crate::error::ModelError;

type Result<T> = std::result::Result<T, ModelError>;

/// Regression or classification target for [`TopoUNet::head_apply`].
#[derive(Clone, Debug)]
pub enum Target {
    /// Labels for the listed rank-0 rows.
    Nodes {
        rows: Arc<Vec<usize>>,
        labels: Arc<Vec<usize>>,
    },
    Graph(usize),
    Values(Arc<Array2<f64>>),
}

/// Tape handles of every cochain produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub output: Var,
    pub encoder: Vec<Var>,
    /// `D̃` per level; `None` at the bottleneck level.
    pub decoder_tilde: Vec<Option<Var>>,
    pub decoder: Vec<Var>,
}

/// Values of every cochain produced by one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub encoder: Vec<Array2<f64>>,
    pub decoder_tilde: Vec<Option<Array2<f64>>>,
    pub decoder: Vec<Array2<f64>>,
}

impl ForwardVars {
    pub fn snapshot(&self, tape: &Tape) -> ModelState {
        ModelState {
            encoder: self.encoder.iter().map(|&v| tape.value(v).clone()).collect(),
            decoder_tilde: self
                .decoder_tilde
                .iter()
                .map(|v| v.map(|v| tape.value(v).clone()))
                .collect(),
            decoder: self.decoder.iter().map(|&v| tape.value(v).clone()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TopoUNet {
    pub config: TopoUNetConfig,
    pub params: ParameterStore,
}

fn init_mlp(
    store: &mut ParameterStore,
    prefix: &str,
    dim: usize,
    spec: &RefinementSpec,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), TensorError> {
    if spec.kind == RefinementKind::None {
        return Ok(());
    }
    let h = spec.hidden_dim;
    store.insert(format!("{prefix}.w1"), glorot_uniform(dim, h, rng))?;
    store.insert(format!("{prefix}.b1"), Array2::zeros((1, h)))?;
    store.insert(format!("{prefix}.w2"), glorot_uniform(h, dim, rng))?;
    store.insert(format!("{prefix}.b2"), Array2::zeros((1, dim)))?;
    Ok(())
}

fn init_transport(
    store: &mut ParameterStore,
    prefix: &str,
    d_in: usize,
    d_out: usize,
    kind: TransportKind,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), TensorError> {
    store.insert(format!("{prefix}.w"), glorot_uniform(d_in, d_out, rng))?;
    if matches!(kind, TransportKind::Attention | TransportKind::Gated) {
        store.insert(format!("{prefix}.a_src"), glorot_uniform(d_in, 1, rng))?;
        store.insert(format!("{prefix}.a_tgt"), glorot_uniform(d_in, 1, rng))?;
    }
    if kind == TransportKind::Gated {
        store.insert(format!("{prefix}.gate_b"), Array2::zeros((1, 1)))?;
    }
    Ok(())
}

/// Parameters created for `config`, drawn from its seed.
pub fn init_parameters(config: &TopoUNetConfig) -> Result<ParameterStore> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParameterStore::new();
    let d = &config.dims;
    let levels = d.len();
    for i in 0..levels - 1 {
        let kind = config.transport[i].kind;
        init_transport(&mut store, &format!("enc.{i}"), d[i], d[i + 1], kind, &mut rng)?;
        init_mlp(
            &mut store,
            &format!("enc.refine.{}", i + 1),
            d[i + 1],
            &config.refinement[i + 1],
            &mut rng,
        )?;
    }
    init_mlp(&mut store, "bottleneck", d[levels - 1], &config.bottleneck, &mut rng)?;
    for i in (0..levels - 1).rev() {
        let kind = config.transport[i].kind;
        init_transport(&mut store, &format!("dec.{i}"), d[i + 1], d[i], kind, &mut rng)?;
        if config.use_skips {
            store.insert(format!("dec.merge.{i}.w"), glorot_uniform(d[i], d[i], &mut rng))?;
        }
        init_mlp(
            &mut store,
            &format!("dec.refine.{i}"),
            d[i],
            &config.refinement[i],
            &mut rng,
        )?;
    }
    let c = config.head.out_dim();
    store.insert("head.w", glorot_uniform(d[0], c, &mut rng))?;
    store.insert("head.b", Array2::zeros((1, c)))?;
    Ok(store)
}

/// Trainable scalar count of the model `config` describes, head included.
pub fn count_parameters(config: &TopoUNetConfig) -> Result<usize> {
    Ok(init_parameters(config)?.num_scalars())
}

/// Per-pass mutable context.
pub struct Pass<'a> {
    pub tape: &'a mut Tape,
    pub binding: &'a mut Binding,
    /// Dropout is active only when an RNG is supplied.
    pub rng: Option<&'a mut dyn RngCore>,
}

impl<'a> Pass<'a> {
    pub fn new(tape: &'a mut Tape, binding: &'a mut Binding) -> Self {
        Self {
            tape,
            binding,
            rng: None,
        }
    }

    pub fn training(tape: &'a mut Tape, binding: &'a mut Binding, rng: &'a mut dyn RngCore) -> Self {
        Self {
            tape,
            binding,
            rng: Some(rng),
        }
    }
}

impl TopoUNet {
    pub fn new(config: TopoUNetConfig) -> Result<Self> {
        let params = init_parameters(&config)?;
        Ok(Self { config, params })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    fn p(&self, pass: &mut Pass<'_>, name: &str) -> Result<Var> {
        Ok(pass.binding.bind(pass.tape, &self.params, name)?)
    }

    fn act(&self, pass: &mut Pass<'_>, x: Var) -> Var {
        pass.tape.pointwise(x, self.config.activation)
    }

    fn dropout(&self, pass: &mut Pass<'_>, x: Var) -> Var {
        match pass.rng.as_deref_mut() {
            Some(rng) => pass.tape.dropout(x, self.config.dropout, true, rng),
            None => x,
        }
    }

    fn transport(
        &self,
        pass: &mut Pass<'_>,
        dir: &Direction,
        kind: TransportKind,
        prefix: &str,
        x: Var,
    ) -> Result<Var> {
        let w = self.p(pass, &format!("{prefix}.w"))?;
        let xw = pass.tape.matmul(x, w)?;
        let y = match kind {
            TransportKind::IncidenceConv | TransportKind::NormalizedIncidence => {
                pass.tape.sparse_matmul(dir.matrix.clone(), xw, false)?
            }
            TransportKind::Attention | TransportKind::Gated => {
                let a_src = self.p(pass, &format!("{prefix}.a_src"))?;
                let a_tgt = self.p(pass, &format!("{prefix}.a_tgt"))?;
                let t = &mut *pass.tape;
                let summary = t.sparse_matmul(dir.mean.clone(), x, false)?;
                let s_src = t.matmul(x, a_src)?;
                let s_src = t.gather_rows(s_src, dir.sources.clone())?;
                let s_tgt = t.matmul(summary, a_tgt)?;
                let s_tgt = t.gather_rows(s_tgt, dir.targets.clone())?;
                let score = t.add(s_src, s_tgt)?;
                let coef = if kind == TransportKind::Attention {
                    t.segment_softmax(score, dir.targets.clone())?
                } else {
                    let b = pass.binding.bind(t, &self.params, &format!("{prefix}.gate_b"))?;
                    let g = t.add_row(score, b)?;
                    let g = t.sigmoid(g);
                    let weights = Array2::from_shape_vec((dir.weights.len(), 1), dir.weights.to_vec())
                        .expect("one weight per entry");
                    let weights = t.constant(weights);
                    t.row_scale(g, weights)?
                };
                let msg = t.gather_rows(xw, dir.sources.clone())?;
                let msg = t.row_scale(msg, coef)?;
                t.scatter_add_rows(msg, dir.targets.clone(), dir.num_targets())?
            }
        };
        Ok(self.act(pass, y))
    }

    /// `φ(M x W1 + b1) W2 + b2`, with `M` the level adjacency for message
    /// passing and the identity otherwise.
    fn mlp(
        &self,
        pass: &mut Pass<'_>,
        prefix: &str,
        adj: Option<&Arc<topounet_tensor::SparseMatrix>>,
        x: Var,
    ) -> Result<Var> {
        let w1 = self.p(pass, &format!("{prefix}.w1"))?;
        let b1 = self.p(pass, &format!("{prefix}.b1"))?;
        let w2 = self.p(pass, &format!("{prefix}.w2"))?;
        let b2 = self.p(pass, &format!("{prefix}.b2"))?;
        let input = match adj {
            Some(a) => pass.tape.sparse_matmul(a.clone(), x, false)?,
            None => x,
        };
        let h = pass.tape.linear(input, w1, Some(b1))?;
        let h = self.act(pass, h);
        let h = self.dropout(pass, h);
        Ok(pass.tape.linear(h, w2, Some(b2))?)
    }

    /// Residual refinement `x + mlp(x)`; identity for `none`.
    fn refine(
        &self,
        pass: &mut Pass<'_>,
        prefix: &str,
        spec: &RefinementSpec,
        adj: Option<&Arc<topounet_tensor::SparseMatrix>>,
        x: Var,
    ) -> Result<Var> {
        if spec.kind == RefinementKind::None {
            return Ok(x);
        }
        let update = self.mlp(pass, prefix, adj, x)?;
        Ok(pass.tape.add(x, update)?)
    }

    fn check(&self, pass: &Pass<'_>, bound: &BoundComplex, stage: &'static str, level: usize, v: Var) -> Result<()> {
        let expected = (bound.counts[level], self.config.dims[level]);
        let got = pass.tape.shape(v);
        if got != expected {
            return Err(ModelError::Shape {
                stage,
                level,
                rank: bound.ranks[level],
                expected,
                got,
            });
        }
        Ok(())
    }

    /// Encoder states `E_{s_0} … E_{s_L}`.
    pub fn encode(&self, pass: &mut Pass<'_>, bound: &BoundComplex, input: Var) -> Result<Vec<Var>> {
        self.check(pass, bound, "input", 0, input)?;
        let mut enc = vec![input];
        for i in 0..bound.up.len() {
            let kind = self.config.transport[i].kind;
            let t = self.transport(pass, &bound.up[i], kind, &format!("enc.{i}"), enc[i])?;
            let e = self.refine(
                pass,
                &format!("enc.refine.{}", i + 1),
                &self.config.refinement[i + 1],
                bound.refine_adjacency[i + 1].as_ref(),
                t,
            )?;
            self.check(pass, bound, "encoder state", i + 1, e)?;
            enc.push(e);
        }
        Ok(enc)
    }

    /// Bottleneck and decoder. Only the last encoder state is read when skips
    /// are disabled.
    pub fn decode(&self, pass: &mut Pass<'_>, bound: &BoundComplex, encoder: &[Var]) -> Result<ForwardVars> {
        let levels = bound.counts.len();
        let top = levels - 1;
        let bn = match self.config.bottleneck.kind {
            RefinementKind::None => encoder[top],
            _ => self.mlp(pass, "bottleneck", bound.bottleneck_adjacency.as_ref(), encoder[top])?,
        };
        self.check(pass, bound, "bottleneck", top, bn)?;
        let mut decoder = vec![bn; levels];
        let mut decoder_tilde = vec![None; levels];
        for i in (0..top).rev() {
            let kind = self.config.transport[i].kind;
            let dt = self.transport(pass, &bound.down[i], kind, &format!("dec.{i}"), decoder[i + 1])?;
            self.check(pass, bound, "decoder transport", i, dt)?;
            decoder_tilde[i] = Some(dt);
            let merged = if self.config.use_skips {
                let w = self.p(pass, &format!("dec.merge.{i}.w"))?;
                let s = pass.tape.add(encoder[i], dt)?;
                let s = pass.tape.matmul(s, w)?;
                self.act(pass, s)
            } else {
                dt
            };
            let d = self.refine(
                pass,
                &format!("dec.refine.{i}"),
                &self.config.refinement[i],
                bound.refine_adjacency[i].as_ref(),
                merged,
            )?;
            self.check(pass, bound, "decoder state", i, d)?;
            decoder[i] = d;
        }
        Ok(ForwardVars {
            output: decoder[0],
            encoder: encoder.to_vec(),
            decoder_tilde,
            decoder,
        })
    }

    /// Full U-pass; the output is the rank-`s_0` cochain `D_{s_0}`.
    pub fn forward(&self, pass: &mut Pass<'_>, bound: &BoundComplex, input: Var) -> Result<ForwardVars> {
        let encoder = self.encode(pass, bound, input)?;
        self.decode(pass, bound, &encoder)
    }

    /// Head output: node logits, one row of graph logits, or reconstruction.
    pub fn head(&self, pass: &mut Pass<'_>, output: Var) -> Result<Var> {
        let w = self.p(pass, "head.w")?;
        let b = self.p(pass, "head.b")?;
        let x = match self.config.head {
            Head::GraphClassifyMeanPool { .. } => pass.tape.mean_rows(output),
            _ => output,
        };
        Ok(pass.tape.linear(x, w, Some(b))?)
    }

    /// Head output and the task loss against `target`.
    pub fn head_apply(&self, pass: &mut Pass<'_>, output: Var, target: &Target) -> Result<(Var, Var)> {
        let pred = self.head(pass, output)?;
        let loss = match (self.config.head, target) {
            (Head::NodeClassify { .. }, Target::Nodes { rows, labels }) => {
                pass.tape.cross_entropy(pred, rows.clone(), labels.clone())?
            }
            (Head::GraphClassifyMeanPool { .. }, Target::Graph(label)) => {
                pass.tape
                    .cross_entropy(pred, Arc::new(vec![0]), Arc::new(vec![*label]))?
            }
            (Head::Reconstruct { .. }, Target::Values(v)) => pass.tape.mse(pred, v.clone())?,
            (head, _) => return Err(ModelError::Config(format!("target does not match head {head:?}"))),
        };
        Ok((pred, loss))
    }

    /// Evaluation-mode U-pass on a fresh tape.
    pub fn run(&self, bound: &BoundComplex, input: &Array2<f64>) -> Result<(Array2<f64>, ModelState)> {
        let mut tape = Tape::new();
        let mut binding = Binding::new();
        let mut pass = Pass::new(&mut tape, &mut binding);
        let x = pass.tape.constant(input.clone());
        let vars = self.forward(&mut pass, bound, x)?;
        Ok((tape.value(vars.output).clone(), vars.snapshot(&tape)))
    }

    /// Evaluation-mode head output.
    pub fn predict(&self, bound: &BoundComplex, input: &Array2<f64>) -> Result<Array2<f64>> {
        let mut tape = Tape::new();
        let mut binding = Binding::new();
        let mut pass = Pass::new(&mut tape, &mut binding);
        let x = pass.tape.constant(input.clone());
        let vars = self.forward(&mut pass, bound, x)?;
        let pred = self.head(&mut pass, vars.output)?;
        Ok(tape.value(pred).clone())
    }
}
