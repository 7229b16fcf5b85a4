mod common;

use std::sync::Arc;

use common::{max_abs_diff, random_complex, random_matrix, random_perms};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topounet_core::lift::{lift_graph, GraphInput, GraphLiftOptions};
use topounet_core::{CombinatorialComplex, ComplexBuilder, RankPath};
use topounet_model::{
    linear_capacity_probe, BoundComplex, Head, ModelError, Pass, RefinementSpec, Target, TopoUNet, TopoUNetConfig,
    TransportKind,
};
use topounet_tensor::{Activation, Binding, Tape};

const KINDS: [TransportKind; 4] = [
    TransportKind::IncidenceConv,
    TransportKind::NormalizedIncidence,
    TransportKind::Attention,
    TransportKind::Gated,
];

fn random_path(cc: &CombinatorialComplex, rng: &mut ChaCha8Rng) -> RankPath {
    let upper: Vec<usize> = cc.active_ranks().into_iter().filter(|&r| r > 0).collect();
    let mut ranks = vec![0];
    ranks.extend(upper.iter().copied().filter(|_| rng.random_bool(0.7)));
    if ranks.len() == 1 {
        ranks.push(upper[0]);
    }
    RankPath::new(ranks).unwrap()
}

fn random_refinement(rng: &mut ChaCha8Rng) -> RefinementSpec {
    match rng.random_range(0..3) {
        0 => RefinementSpec::none(),
        1 => RefinementSpec::mlp(3),
        _ => RefinementSpec::message_passing(3),
    }
}

fn random_config(path: RankPath, kind: TransportKind, head: Head, rng: &mut ChaCha8Rng) -> TopoUNetConfig {
    let levels = path.len();
    let dims: Vec<usize> = (0..levels).map(|_| rng.random_range(2..=4)).collect();
    let mut c = TopoUNetConfig::uniform(path, dims, kind, 3, head);
    c.refinement = (0..levels).map(|_| random_refinement(rng)).collect();
    c.bottleneck = random_refinement(rng);
    c.use_skips = rng.random_bool(0.5);
    c.seed = rng.random();
    c
}

#[test]
fn raw_transport_sums_and_normalized_transport_averages() {
    let mut b = ComplexBuilder::new(2);
    b.add_cell(1, vec![0, 1]);
    let cc = b.build().unwrap();
    for (kind, expected) in [
        (TransportKind::IncidenceConv, 8.0),
        (TransportKind::NormalizedIncidence, 4.0),
    ] {
        let mut c = TopoUNetConfig::uniform(
            "0-1".parse().unwrap(),
            vec![1, 1],
            kind,
            1,
            Head::Reconstruct { target_dim: 1 },
        );
        c.refinement = vec![RefinementSpec::none(); 2];
        c.activation = Activation::Identity;
        let mut model = TopoUNet::new(c).unwrap();
        model.params.get_mut("enc.0.w").unwrap().value = array![[1.0]];
        let bound = BoundComplex::new(&model.config, &cc).unwrap();
        let (_, state) = model.run(&bound, &array![[3.0], [5.0]]).unwrap();
        assert_eq!(state.encoder[1], array![[expected]]);
    }
}

#[test]
fn forward_commutes_with_joint_reindexing() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let cc = random_complex(&mut rng);
        let kind = KINDS[trial % 4];
        let path = random_path(&cc, &mut rng);
        let config = random_config(path, kind, Head::NodeClassify { num_classes: 3 }, &mut rng);
        let model = TopoUNet::new(config).unwrap();
        let x = random_matrix(cc.num_cells(0), model.config.dims[0], &mut rng);
        let perms = random_perms(&cc, &mut rng);
        let (re, record) = cc.reindex(&perms).unwrap();

        let (out, state) = model.run(&BoundComplex::new(&model.config, &cc).unwrap(), &x).unwrap();
        let p0 = record.rank(0).unwrap();
        let (out2, state2) = model
            .run(&BoundComplex::new(&model.config, &re).unwrap(), &p0.apply_rows(&x))
            .unwrap();
        assert!(
            max_abs_diff(&p0.apply_rows(&out), &out2) <= 1e-10,
            "trial {trial} {kind:?}"
        );
        for (level, &r) in model.config.path.ranks().iter().enumerate() {
            let p = record.rank(r).unwrap();
            assert!(max_abs_diff(&p.apply_rows(&state.encoder[level]), &state2.encoder[level]) <= 1e-10);
            assert!(max_abs_diff(&p.apply_rows(&state.decoder[level]), &state2.decoder[level]) <= 1e-10);
        }
    }
}

#[test]
fn every_state_has_the_shape_of_its_cochain_space() {
    let k3 = GraphInput::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let cc = lift_graph(&k3, GraphLiftOptions::default()).unwrap();
    let config = TopoUNetConfig::uniform(
        "0-1-2".parse().unwrap(),
        vec![4, 5, 6],
        TransportKind::Attention,
        7,
        Head::NodeClassify { num_classes: 2 },
    );
    let model = TopoUNet::new(config).unwrap();
    let bound = BoundComplex::new(&model.config, &cc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (out, state) = model.run(&bound, &random_matrix(3, 4, &mut rng)).unwrap();
    assert_eq!(out.dim(), (3, 4));
    let expected = [(3, 4), (3, 5), (1, 6)];
    for (level, &dim) in expected.iter().enumerate() {
        assert_eq!(state.encoder[level].dim(), dim);
        assert_eq!(state.decoder[level].dim(), dim);
    }
    assert_eq!(state.decoder_tilde[0].as_ref().unwrap().dim(), (3, 4));
    assert_eq!(state.decoder_tilde[1].as_ref().unwrap().dim(), (3, 5));
    assert!(state.decoder_tilde[2].is_none());
}

#[test]
fn wrong_input_width_is_a_shape_error() {
    let k3 = GraphInput::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let cc = lift_graph(&k3, GraphLiftOptions::default()).unwrap();
    let config = TopoUNetConfig::uniform(
        "0-1".parse().unwrap(),
        vec![4, 5],
        TransportKind::NormalizedIncidence,
        7,
        Head::NodeClassify { num_classes: 2 },
    );
    let model = TopoUNet::new(config).unwrap();
    let bound = BoundComplex::new(&model.config, &cc).unwrap();
    let err = model.run(&bound, &Array2::zeros((3, 2))).unwrap_err();
    assert!(matches!(err, ModelError::Shape { level: 0, .. }), "{err}");
}

#[test]
fn inactive_path_rank_is_rejected_at_bind_time() {
    let path3 = GraphInput::new(3, [(0, 1), (1, 2)]).unwrap();
    let cc = lift_graph(&path3, GraphLiftOptions::default()).unwrap();
    let config = TopoUNetConfig::uniform(
        "0-1-2".parse().unwrap(),
        vec![2, 2, 2],
        TransportKind::NormalizedIncidence,
        2,
        Head::NodeClassify { num_classes: 2 },
    );
    assert!(matches!(BoundComplex::new(&config, &cc), Err(ModelError::Complex(_))));
}

#[test]
fn depth_zero_identity_model_returns_its_input() {
    let mut b = ComplexBuilder::new(4);
    b.add_cell(1, vec![0, 1]);
    let cc = b.build().unwrap();
    let mut config = TopoUNetConfig::uniform(
        "0".parse().unwrap(),
        vec![3],
        TransportKind::NormalizedIncidence,
        3,
        Head::Reconstruct { target_dim: 3 },
    );
    config.refinement = vec![RefinementSpec::none()];
    config.bottleneck = RefinementSpec::none();
    let model = TopoUNet::new(config).unwrap();
    let x = random_matrix(4, 3, &mut ChaCha8Rng::seed_from_u64(2));
    let (out, _) = model.run(&BoundComplex::new(&model.config, &cc).unwrap(), &x).unwrap();
    assert_eq!(out, x);
}

#[test]
fn no_skip_output_depends_only_on_the_bottleneck_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut skip_sensitive = 0;
    for trial in 0..20 {
        let cc = random_complex(&mut rng);
        let path = random_path(&cc, &mut rng);
        let mut config = random_config(path, KINDS[trial % 4], Head::Reconstruct { target_dim: 2 }, &mut rng);
        let outputs: Vec<(Array2<f64>, Array2<f64>)> = [false, true]
            .into_iter()
            .map(|skips| {
                config.use_skips = skips;
                let model = TopoUNet::new(config.clone()).unwrap();
                let bound = BoundComplex::new(&model.config, &cc).unwrap();
                let x = random_matrix(
                    cc.num_cells(0),
                    model.config.dims[0],
                    &mut ChaCha8Rng::seed_from_u64(trial as u64),
                );
                let mut tape = Tape::new();
                let mut binding = Binding::new();
                let mut pass = Pass::new(&mut tape, &mut binding);
                let input = pass.tape.constant(x);
                let enc = model.encode(&mut pass, &bound, input).unwrap();
                let full = model.decode(&mut pass, &bound, &enc).unwrap().output;
                let top = enc.len() - 1;
                let zeroed: Vec<_> = enc
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if i == top {
                            v
                        } else {
                            let z = pass.tape.value(v).mapv(|_| 0.0);
                            pass.tape.constant(z)
                        }
                    })
                    .collect();
                let only_top = model.decode(&mut pass, &bound, &zeroed).unwrap().output;
                (tape.value(full).clone(), tape.value(only_top).clone())
            })
            .collect();
        assert_eq!(outputs[0].0, outputs[0].1, "trial {trial}");
        if outputs[1].0 != outputs[1].1 {
            skip_sensitive += 1;
        }
    }
    assert!(skip_sensitive > 10, "skips should read encoder states");
}

/// Denominator floor for relative error: below it, central differences at
/// step 1e-6 are dominated by roundoff (~1e-10 absolute).
const FD_FLOOR: f64 = 1e-5;

/// Loss of `model` on fixed data, without gradients.
fn loss_value(model: &TopoUNet, bound: &BoundComplex, x: &Array2<f64>, target: &Target) -> f64 {
    let mut tape = Tape::new();
    let mut binding = Binding::new();
    let mut pass = Pass::new(&mut tape, &mut binding);
    let input = pass.tape.constant(x.clone());
    let out = model.forward(&mut pass, bound, input).unwrap().output;
    let (_, loss) = model.head_apply(&mut pass, out, target).unwrap();
    tape.value(loss)[[0, 0]]
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let step = 1e-6;
    let mut checked = 0;
    for trial in 0..12 {
        let cc = random_complex(&mut rng);
        let path = random_path(&cc, &mut rng);
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
                Target::Values(Arc::new(random_matrix(n0, 2, &mut rng))),
            ),
        };
        let config = random_config(path, KINDS[trial % 4], head, &mut rng);
        let mut model = TopoUNet::new(config).unwrap();
        // generic weights keep every ReLU input away from its kink
        let names: Vec<String> = model.params.names().map(str::to_string).collect();
        for name in &names {
            let p = model.params.get_mut(name).unwrap();
            p.value = random_matrix(p.value.nrows(), p.value.ncols(), &mut rng);
        }
        let bound = BoundComplex::new(&model.config, &cc).unwrap();
        let x = random_matrix(n0, model.config.dims[0], &mut rng);

        let mut tape = Tape::new();
        let mut binding = Binding::new();
        let mut pass = Pass::new(&mut tape, &mut binding);
        let input = pass.tape.constant(x.clone());
        let out = model.forward(&mut pass, &bound, input).unwrap().output;
        let (_, loss) = model.head_apply(&mut pass, out, &target).unwrap();
        tape.backward(loss).unwrap();
        model.params.absorb_grads(&tape, &binding);

        let names: Vec<String> = model.params.names().map(str::to_string).collect();
        for name in names {
            let grad = model.params.get(&name).unwrap().grad.clone().unwrap();
            for idx in 0..grad.len() {
                let (r, c) = (idx / grad.ncols(), idx % grad.ncols());
                let orig = model.params.get(&name).unwrap().value[[r, c]];
                model.params.get_mut(&name).unwrap().value[[r, c]] = orig + step;
                let plus = loss_value(&model, &bound, &x, &target);
                model.params.get_mut(&name).unwrap().value[[r, c]] = orig - step;
                let minus = loss_value(&model, &bound, &x, &target);
                model.params.get_mut(&name).unwrap().value[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * step);
                let analytic = grad[[r, c]];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR);
                assert!(rel < 1e-4, "trial {trial} {name}[{r},{c}]: {analytic} vs {numeric}");
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

fn head_model(head: Head, width: usize) -> TopoUNet {
    let mut config = TopoUNetConfig::uniform(
        "0".parse().unwrap(),
        vec![width],
        TransportKind::NormalizedIncidence,
        1,
        head,
    );
    config.refinement = vec![RefinementSpec::none()];
    config.bottleneck = RefinementSpec::none();
    let mut model = TopoUNet::new(config).unwrap();
    model.params.get_mut("head.w").unwrap().value = Array2::eye(width);
    model
}

fn head_loss(model: &TopoUNet, x: Array2<f64>, target: &Target) -> f64 {
    let mut tape = Tape::new();
    let mut binding = Binding::new();
    let mut pass = Pass::new(&mut tape, &mut binding);
    let v = pass.tape.constant(x);
    let (_, loss) = model.head_apply(&mut pass, v, target).unwrap();
    tape.value(loss)[[0, 0]]
}

#[test]
fn head_losses_have_closed_forms() {
    let node = head_model(Head::NodeClassify { num_classes: 3 }, 3);
    let target = Target::Nodes {
        rows: Arc::new(vec![0, 1]),
        labels: Arc::new(vec![2, 0]),
    };
    let confident = array![[0.0, 0.0, 60.0], [60.0, 0.0, 0.0]];
    assert!(head_loss(&node, confident, &target) < 1e-9);
    let uniform = Array2::from_elem((2, 3), 0.7);
    assert!((head_loss(&node, uniform, &target) - 3f64.ln()).abs() < 1e-12);

    let graph = head_model(Head::GraphClassifyMeanPool { num_classes: 4 }, 4);
    assert!((head_loss(&graph, Array2::zeros((5, 4)), &Target::Graph(3)) - 4f64.ln()).abs() < 1e-12);

    let rec = head_model(Head::Reconstruct { target_dim: 2 }, 2);
    let y = array![[1.0, -2.0], [0.5, 3.0]];
    assert_eq!(head_loss(&rec, y.clone(), &Target::Values(Arc::new(y))), 0.0);
}

#[test]
fn empty_node_mask_is_an_error() {
    let node = head_model(Head::NodeClassify { num_classes: 2 }, 2);
    let mut tape = Tape::new();
    let mut binding = Binding::new();
    let mut pass = Pass::new(&mut tape, &mut binding);
    let v = pass.tape.constant(Array2::zeros((3, 2)));
    let target = Target::Nodes {
        rows: Arc::new(vec![]),
        labels: Arc::new(vec![]),
    };
    assert!(node.head_apply(&mut pass, v, &target).is_err());
}

#[test]
fn compressive_linear_encoders_are_never_injective() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cases = 0;
    while cases < 20 {
        let cc = random_complex(&mut rng);
        let path = random_path(&cc, &mut rng);
        let dims: Vec<usize> = (0..path.len()).map(|_| rng.random_range(1..=4)).collect();
        let n0 = cc.num_cells(0);
        let nl = cc.num_cells(path.bottleneck_rank());
        if nl * dims[dims.len() - 1] >= n0 * dims[0] {
            continue;
        }
        let report = linear_capacity_probe(&cc, &path, &dims, rng.random()).unwrap();
        assert!(!report.injective);
        assert!(report.encoder_rank <= report.bottleneck_dim);
        cases += 1;
    }
}

#[test]
fn triangle_edges_witness_an_injective_encoder() {
    let k3 = GraphInput::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let cc = lift_graph(&k3, GraphLiftOptions::default()).unwrap();
    let report = linear_capacity_probe(&cc, &"0-1".parse().unwrap(), &[2, 2], 4).unwrap();
    assert!(report.injective);
    assert_eq!(report.encoder_rank, 6);
}

#[test]
fn config_json_round_trips_and_rejects_unknown_keys() {
    let config = TopoUNetConfig::uniform(
        "0-1-2".parse().unwrap(),
        vec![4, 8, 8],
        TransportKind::Gated,
        16,
        Head::GraphClassifyMeanPool { num_classes: 2 },
    );
    let json = serde_json::to_string(&config).unwrap();
    let back: TopoUNetConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, config);
    let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
    value["extra"] = serde_json::json!(1);
    assert!(serde_json::from_value::<TopoUNetConfig>(value).is_err());
}

#[test]
fn parameter_count_grows_with_the_path() {
    let head = Head::NodeClassify { num_classes: 3 };
    let short = TopoUNetConfig::uniform(
        "0-1".parse().unwrap(),
        vec![8, 8],
        TransportKind::NormalizedIncidence,
        8,
        head,
    );
    let long = short.with_path("0-1-2-3".parse().unwrap(), vec![8; 4], true);
    let n_short = topounet_model::count_parameters(&short).unwrap();
    let n_long = topounet_model::count_parameters(&long).unwrap();
    assert!(n_long > n_short);
    let mut head_only = TopoUNetConfig::uniform(
        "0".parse().unwrap(),
        vec![5],
        TransportKind::NormalizedIncidence,
        1,
        head,
    );
    head_only.refinement = vec![RefinementSpec::none()];
    head_only.bottleneck = RefinementSpec::none();
    assert_eq!(topounet_model::count_parameters(&head_only).unwrap(), 5 * 3 + 3);
}
