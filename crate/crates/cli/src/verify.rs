//! The property suite behind `topounet verify`. Each check builds its own
//! seeded corpus and compares against an independent oracle.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use topounet_core::lift::{lift_graph, lift_grid, lift_hypergraph, triangles, GraphInput, GraphLiftOptions, GridInput};
use topounet_core::{
    incidence, support_profile, CombinatorialComplex, ComplexBuilder, Normalization, Permutation, RankPath,
};
use topounet_harness::synthetic::toy_hypergraph;
use topounet_model::{
    linear_capacity_probe, BoundComplex, Head, ModelError, Pass, RefinementSpec, Target, TopoUNet, TopoUNetConfig,
    TransportKind,
};
use topounet_tensor::{Binding, Tape};

pub const TRANSPORT_KINDS: [TransportKind; 4] = [
    TransportKind::IncidenceConv,
    TransportKind::NormalizedIncidence,
    TransportKind::Attention,
    TransportKind::Gated,
];

pub const EQUIVARIANCE_TOL: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-4;
/// Relative-error denominator floor; below it central differences are
/// roundoff.
pub const FD_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Ranks 1..=3 over 4..=10 vertices with at most 8 cells per rank. Rank 2
/// is dropped now and then so paths take non-consecutive steps.
pub fn random_complex(rng: &mut ChaCha8Rng) -> CombinatorialComplex {
    let n = rng.random_range(4..=10);
    let mut b = ComplexBuilder::new(n);
    let verts: Vec<usize> = (0..n).collect();
    let skip_two = rng.random_bool(0.25);
    for rank in 1..=3 {
        if rank == 2 && skip_two {
            continue;
        }
        for _ in 0..rng.random_range(1..=8) {
            let size = if rank == 3 { rng.random_range(4..=n) } else { rank + 1 };
            let mut pick = verts.clone();
            pick.shuffle(rng);
            pick.truncate(size);
            b.add_cell(rank, pick);
        }
    }
    b.build().expect("sizes grow with rank")
}

/// Rank 0 plus a random nonempty subset of the other active ranks.
pub fn random_path(cc: &CombinatorialComplex, rng: &mut ChaCha8Rng) -> RankPath {
    let upper: Vec<usize> = cc.active_ranks().into_iter().filter(|&r| r > 0).collect();
    let mut ranks = vec![0];
    ranks.extend(upper.iter().copied().filter(|_| rng.random_bool(0.7)));
    if ranks.len() == 1 {
        ranks.push(upper[0]);
    }
    RankPath::new(ranks).expect("increasing")
}

fn random_refinement(rng: &mut ChaCha8Rng) -> RefinementSpec {
    match rng.random_range(0..3) {
        0 => RefinementSpec::none(),
        1 => RefinementSpec::mlp(3),
        _ => RefinementSpec::message_passing(3),
    }
}

pub fn random_config(path: RankPath, kind: TransportKind, head: Head, rng: &mut ChaCha8Rng) -> TopoUNetConfig {
    let levels = path.len();
    let dims: Vec<usize> = (0..levels).map(|_| rng.random_range(2..=4)).collect();
    let mut c = TopoUNetConfig::uniform(path, dims, kind, 3, head);
    c.refinement = (0..levels).map(|_| random_refinement(rng)).collect();
    c.bottleneck = random_refinement(rng);
    c.use_skips = rng.random_bool(0.5);
    c.seed = rng.random();
    c
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn random_perms(cc: &CombinatorialComplex, rng: &mut ChaCha8Rng) -> BTreeMap<usize, Permutation> {
    cc.active_ranks()
        .into_iter()
        .map(|r| {
            let mut p: Vec<usize> = (0..cc.num_cells(r)).collect();
            p.shuffle(rng);
            (r, Permutation::new(p).expect("a permutation"))
        })
        .collect()
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    if a.dim() != b.dim() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// 28×28 grid counts and its exact bottleneck ratio.
pub fn grid_28x28() -> CheckOutcome {
    let cc = match lift_grid(&GridInput::blank(28, 28)) {
        Ok(cc) => cc,
        Err(e) => return CheckOutcome::new("grid_28x28", false, e.to_string()),
    };
    let counts = (cc.num_cells(0), cc.num_cells(1), cc.num_cells(2));
    let rho = support_profile(&cc, &RankPath::new(vec![0, 1, 2]).expect("increasing"))
        .map(|p| p.bottleneck().value())
        .unwrap_or(f64::NAN);
    let ok = counts == (784, 1512, 729) && (rho - 729.0 / 784.0).abs() <= 1e-12;
    CheckOutcome::new("grid_28x28", ok, format!("counts {counts:?}, rho_bot {rho:.15}"))
}

/// `h·w`, `h(w−1)+w(h−1)`, `(h−1)(w−1)` for every `2 ≤ h, w ≤ 10`.
pub fn grid_closed_forms() -> CheckOutcome {
    let mut bad = Vec::new();
    for h in 2..=10 {
        for w in 2..=10 {
            let expected = (h * w, h * (w - 1) + w * (h - 1), (h - 1) * (w - 1));
            let got = lift_grid(&GridInput::blank(h, w))
                .map(|cc| (cc.num_cells(0), cc.num_cells(1), cc.num_cells(2)))
                .ok();
            if got != Some(expected) {
                bad.push(format!("{h}x{w}: {got:?}"));
            }
        }
    }
    let detail = if bad.is_empty() {
        "81 grid sizes".to_string()
    } else {
        bad.join("; ")
    };
    CheckOutcome::new("grid_closed_forms", bad.is_empty(), detail)
}

/// Triangle enumeration against an O(n³) scan, and lifted counts.
pub fn triangle_oracle(seed: u64, trials: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let n = rng.random_range(3..=30);
        let p = rng.random_range(0.05..0.6);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let g = GraphInput::new(n, edges.clone()).expect("in range");
        let mut dense = vec![vec![false; n]; n];
        for &(u, v) in &edges {
            dense[u][v] = true;
            dense[v][u] = true;
        }
        let mut brute = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if dense[a][b] && dense[b][c] && dense[a][c] {
                        brute.push([a, b, c]);
                    }
                }
            }
        }
        if triangles(&g.neighbors()) != brute {
            return CheckOutcome::new("triangle_oracle", false, format!("graph {t}: triangle lists differ"));
        }
        let cc = lift_graph(&g, GraphLiftOptions::default()).expect("plain lift");
        if (cc.num_cells(0), cc.num_cells(1), cc.num_cells(2)) != (n, edges.len(), brute.len()) {
            return CheckOutcome::new(
                "triangle_oracle",
                false,
                format!("graph {t}: lifted counts {:?}", cc.counts()),
            );
        }
    }
    CheckOutcome::new("triangle_oracle", true, format!("{trials} random graphs"))
}

/// Lifted node-to-hyperedge incidence equals the hypergraph's own matrix.
pub fn hypergraph_incidence() -> CheckOutcome {
    let h = toy_hypergraph();
    let ok = lift_hypergraph(&h, true, 1)
        .map_err(|e| e.to_string())
        .and_then(|cc| incidence(&cc, 0, 1, Normalization::Raw).map_err(|e| e.to_string()))
        .map(|b| b.raw().to_dense() == h.incidence().to_dense());
    match ok {
        Ok(ok) => CheckOutcome::new("hypergraph_incidence", ok, "toy hypergraph".into()),
        Err(e) => CheckOutcome::new("hypergraph_incidence", false, e),
    }
}

/// Full-model forward under joint reindexing of every rank, for every
/// transport kind on every complex.
pub fn equivariance(seed: u64, complexes: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for c in 0..complexes {
        let cc = random_complex(&mut rng);
        let perms = random_perms(&cc, &mut rng);
        let (re, record) = cc.reindex(&perms).expect("perms cover active ranks");
        for kind in TRANSPORT_KINDS {
            let path = random_path(&cc, &mut rng);
            let config = random_config(path, kind, Head::NodeClassify { num_classes: 3 }, &mut rng);
            let result = (|| -> Result<f64, ModelError> {
                let model = TopoUNet::new(config)?;
                let x = random_matrix(cc.num_cells(0), model.config.dims[0], &mut rng);
                let (out, state) = model.run(&BoundComplex::new(&model.config, &cc)?, &x)?;
                let p0 = record.rank(0).expect("rank 0 active");
                let (out2, state2) = model.run(&BoundComplex::new(&model.config, &re)?, &p0.apply_rows(&x))?;
                let mut err = max_abs_diff(&p0.apply_rows(&out), &out2);
                for (level, &r) in model.config.path.ranks().iter().enumerate() {
                    let p = record.rank(r).expect("path ranks active");
                    err = err.max(max_abs_diff(
                        &p.apply_rows(&state.encoder[level]),
                        &state2.encoder[level],
                    ));
                    err = err.max(max_abs_diff(
                        &p.apply_rows(&state.decoder[level]),
                        &state2.decoder[level],
                    ));
                }
                Ok(err)
            })();
            match result {
                Ok(e) => worst = worst.max(e),
                Err(e) => return CheckOutcome::new("equivariance", false, format!("complex {c} {kind:?}: {e}")),
            }
        }
    }
    CheckOutcome::new(
        "equivariance",
        worst <= EQUIVARIANCE_TOL,
        format!("{complexes} complexes x 4 transports, max abs error {worst:.3e}"),
    )
}

/// Every encoder, decoder-transport, and decoder state has shape
/// `(n_{s_i}, d_i)`, and a wrong input width is refused.
pub fn structural_compatibility(seed: u64, complexes: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut states = 0;
    for c in 0..complexes {
        let cc = random_complex(&mut rng);
        let kind = TRANSPORT_KINDS[c % 4];
        let path = random_path(&cc, &mut rng);
        let config = random_config(path, kind, Head::Reconstruct { target_dim: 2 }, &mut rng);
        let model = TopoUNet::new(config).expect("valid random config");
        let bound = match BoundComplex::new(&model.config, &cc) {
            Ok(b) => b,
            Err(e) => {
                violations.push(format!("complex {c}: {e}"));
                continue;
            }
        };
        let n0 = cc.num_cells(0);
        let d0 = model.config.dims[0];
        match model.run(&bound, &random_matrix(n0, d0, &mut rng)) {
            Ok((out, state)) => {
                let mut seen = vec![("output", 0, out.dim())];
                for (level, e) in state.encoder.iter().enumerate() {
                    seen.push(("encoder", level, e.dim()));
                }
                for (level, d) in state.decoder.iter().enumerate() {
                    seen.push(("decoder", level, d.dim()));
                }
                for (level, d) in state.decoder_tilde.iter().enumerate() {
                    if let Some(d) = d {
                        seen.push(("decoder transport", level, d.dim()));
                    }
                }
                for (stage, level, dim) in seen {
                    states += 1;
                    let expected = (bound.counts[level], model.config.dims[level]);
                    if dim != expected {
                        violations.push(format!("complex {c} {stage} {level}: {dim:?} != {expected:?}"));
                    }
                }
            }
            Err(e) => violations.push(format!("complex {c}: {e}")),
        }
        if !matches!(
            model.run(&bound, &Array2::zeros((n0, d0 + 1))),
            Err(ModelError::Shape { level: 0, .. })
        ) {
            violations.push(format!("complex {c}: wrong input width accepted"));
        }
    }
    let ok = violations.is_empty();
    let detail = if ok {
        format!("{complexes} complexes, {states} states, 0 violations")
    } else {
        format!("{} violations; first: {}", violations.len(), violations[0])
    };
    CheckOutcome::new("structural_compatibility", ok, detail)
}

fn loss_value(model: &TopoUNet, bound: &BoundComplex, x: &Array2<f64>, target: &Target) -> Result<f64, ModelError> {
    let mut tape = Tape::new();
    let mut binding = Binding::new();
    let mut pass = Pass::new(&mut tape, &mut binding);
    let input = pass.tape.constant(x.clone());
    let out = model.forward(&mut pass, bound, input)?.output;
    let (_, loss) = model.head_apply(&mut pass, out, target)?;
    Ok(tape.value(loss)[[0, 0]])
}

fn gradient_trial(rng: &mut ChaCha8Rng, trial: usize) -> Result<(f64, usize, String), ModelError> {
    let cc = random_complex(rng);
    let path = random_path(&cc, rng);
    let n0 = cc.num_cells(0);
    let (head, target) = match trial % 3 {
        0 => (
            Head::NodeClassify { num_classes: 3 },
            Target::Nodes {
                rows: Arc::new((0..n0).step_by(2).collect()),
                labels: Arc::new((0..n0).step_by(2).map(|i| i % 3).collect()),
            },
        ),
        1 => (Head::GraphClassifyMeanPool { num_classes: 2 }, Target::Graph(1)),
        _ => (
            Head::Reconstruct { target_dim: 2 },
            Target::Values(Arc::new(random_matrix(n0, 2, rng))),
        ),
    };
    let config = random_config(path, TRANSPORT_KINDS[trial % 4], head, rng);
    let mut model = TopoUNet::new(config)?;
    // generic weights keep ReLU inputs off their kink
    let names: Vec<String> = model.params.names().map(str::to_string).collect();
    for name in &names {
        let p = model.params.get_mut(name).expect("listed");
        p.value = random_matrix(p.value.nrows(), p.value.ncols(), rng);
    }
    let bound = BoundComplex::new(&model.config, &cc)?;
    let x = random_matrix(n0, model.config.dims[0], rng);

    let mut tape = Tape::new();
    let mut binding = Binding::new();
    let mut pass = Pass::new(&mut tape, &mut binding);
    let input = pass.tape.constant(x.clone());
    let out = model.forward(&mut pass, &bound, input)?.output;
    let (_, loss) = model.head_apply(&mut pass, out, &target)?;
    tape.backward(loss)?;
    model.params.absorb_grads(&tape, &binding);

    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for name in names {
        let grad = model.params.get(&name).and_then(|p| p.grad.clone()).unwrap_or_else(|| {
            let v = &model.params.get(&name).expect("listed").value;
            Array2::zeros(v.dim())
        });
        for ((r, c), &analytic) in grad.indexed_iter() {
            let orig = model.params.get(&name).expect("listed").value[[r, c]];
            model.params.get_mut(&name).expect("listed").value[[r, c]] = orig + FD_STEP;
            let plus = loss_value(&model, &bound, &x, &target)?;
            model.params.get_mut(&name).expect("listed").value[[r, c]] = orig - FD_STEP;
            let minus = loss_value(&model, &bound, &x, &target)?;
            model.params.get_mut(&name).expect("listed").value[[r, c]] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{r},{c}] {analytic:.6e} vs {numeric:.6e}"));
            }
            checked += 1;
        }
    }
    Ok((worst.0, checked, worst.1))
}

/// Autodiff against central differences for every parameter entry of
/// `models` random models.
pub fn gradients(seed: u64, models: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for trial in 0..models {
        match gradient_trial(&mut rng, trial) {
            Ok((rel, n, at)) => {
                checked += n;
                if rel > worst.0 {
                    worst = (rel, format!("model {trial} {at}"));
                }
            }
            Err(e) => return CheckOutcome::new("gradients", false, format!("model {trial}: {e}")),
        }
    }
    CheckOutcome::new(
        "gradients",
        worst.0 < FD_REL_TOL,
        format!(
            "{models} models, {checked} entries, max rel error {:.3e} ({})",
            worst.0, worst.1
        ),
    )
}

/// Compressive linear encoders are never injective; a triangle's edges with
/// enough width are.
pub fn capacity(seed: u64, cases: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < cases {
        let cc = random_complex(&mut rng);
        let path = random_path(&cc, &mut rng);
        let dims: Vec<usize> = (0..path.len()).map(|_| rng.random_range(1..=4)).collect();
        let n0 = cc.num_cells(0);
        let nl = cc.num_cells(path.bottleneck_rank());
        if nl * dims[dims.len() - 1] >= n0 * dims[0] {
            continue;
        }
        match linear_capacity_probe(&cc, &path, &dims, rng.random()) {
            Ok(r) if !r.injective => done += 1,
            Ok(r) => {
                return CheckOutcome::new(
                    "capacity",
                    false,
                    format!("compressive case {done} reported injective (rank {})", r.encoder_rank),
                )
            }
            Err(e) => return CheckOutcome::new("capacity", false, e.to_string()),
        }
    }
    let k3 = GraphInput::new(3, [(0, 1), (1, 2), (0, 2)]).expect("K3");
    let witness = match lift_graph(&k3, GraphLiftOptions::default()) {
        Ok(cc) => linear_capacity_probe(&cc, &RankPath::new(vec![0, 1]).expect("increasing"), &[2, 2], 4)
            .map_err(|e| e.to_string()),
        Err(e) => Err(e.to_string()),
    };
    match witness {
        Ok(r) => CheckOutcome::new(
            "capacity",
            r.injective,
            format!(
                "{cases} compressive encoders non-injective; K3 0-1 witness rank {} of 6",
                r.encoder_rank
            ),
        ),
        Err(e) => CheckOutcome::new("capacity", false, e),
    }
}

/// Every check with its default corpus size.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        grid_28x28(),
        grid_closed_forms(),
        triangle_oracle(seed, 40),
        hypergraph_incidence(),
        equivariance(seed, 50),
        structural_compatibility(seed, 50),
        gradients(seed, 10),
        capacity(seed, 20),
    ]
}
