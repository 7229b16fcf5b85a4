//! Acceptance run: one PASS/FAIL/SKIPPED line per criterion.
//!
//! Optional data:
//!   TOPOUNET_WEBKB_DIR  directory with texas/cornell/wisconsin edge lists
//!   TOPOUNET_MNIST_CSV  label-first MNIST CSV (pixels 0..255, header optional)

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use topounet_cli::verify;
use topounet_core::io::{parse_edge_list, parse_grid_csv};
use topounet_core::lift::{lift_graph, lift_grid, GraphInput, GraphLiftOptions, GridInput, TriangleMode};
use topounet_core::support_profile;
use topounet_harness::{run_ablation, train_seeds, Dataset, RunResult, SplitScheme, TrainOptions};
use topounet_model::{count_parameters, Head, TopoUNetConfig, TransportKind};
use topounet_tensor::{Activation, Adam};

enum Status {
    Pass,
    Fail,
    Skipped,
}

struct Line {
    id: &'static str,
    status: Status,
    detail: String,
}

fn judge(id: &'static str, ok: bool, detail: String) -> Line {
    Line {
        id,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_secs, format!("{s:.2}s of {limit_secs}s"))
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn ac1() -> Line {
    let t = Instant::now();
    let cc = lift_grid(&GridInput::blank(28, 28)).unwrap();
    let counts = (cc.num_cells(0), cc.num_cells(1), cc.num_cells(2));
    let profile = support_profile(&cc, &common::path(&[0, 1, 2])).unwrap();
    let rho = profile.bottleneck().value();
    let (fast, time) = within(t.elapsed(), 1.0);
    let ok = counts == (784, 1512, 729) && (rho - 729.0 / 784.0).abs() < 1e-12 && fast;
    judge("AC1", ok, format!("counts {counts:?}, rho_bot {rho:.15}, {time}"))
}

fn ac2() -> Line {
    let mut bad = Vec::new();
    for h in 2..=10 {
        for w in 2..=10 {
            let cc = lift_grid(&GridInput::blank(h, w)).unwrap();
            let got = (cc.num_cells(0), cc.num_cells(1), cc.num_cells(2));
            let want = (h * w, h * (w - 1) + w * (h - 1), (h - 1) * (w - 1));
            if got != want {
                bad.push(format!("{h}x{w}: {got:?} vs {want:?}"));
            }
        }
    }
    judge(
        "AC2",
        bad.is_empty(),
        format!(
            "81 sizes, {} mismatches{}",
            bad.len(),
            bad.iter().map(|b| format!("; {b}")).collect::<String>()
        ),
    )
}

/// Edge list and node count for one WebKB graph. Accepts `<name>.tsv` or the
/// Geom-GCN layout `<name>/out1_graph_edges.txt`, whose node file fixes the
/// node count including isolated nodes.
fn webkb_graph(dir: &Path, name: &str) -> Result<GraphInput, String> {
    let candidates = [
        dir.join(format!("{name}.tsv")),
        dir.join(name).join("out1_graph_edges.txt"),
    ];
    let edges_path = candidates
        .iter()
        .find(|p| p.exists())
        .ok_or(format!("no edge file for {name}"))?;
    let text = fs::read_to_string(edges_path).map_err(|e| e.to_string())?;
    let body = skip_header(&text, |l| l.split('\t').all(|f| f.trim().parse::<usize>().is_ok()));
    let edges = parse_edge_list(body, &edges_path.display().to_string()).map_err(|e| e.to_string())?;
    let from_edges = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let node_file = dir.join(name).join("out1_node_feature_label.txt");
    let from_nodes = fs::read_to_string(node_file)
        .map(|t| {
            skip_header(&t, |l| {
                l.split('\t').next().is_some_and(|f| f.trim().parse::<usize>().is_ok())
            })
            .lines()
            .filter(|l| !l.trim().is_empty())
            .count()
        })
        .unwrap_or(0);
    GraphInput::new(from_edges.max(from_nodes), edges).map_err(|e| e.to_string())
}

fn skip_header(text: &str, is_data: impl Fn(&str) -> bool) -> &str {
    match text.split_once('\n') {
        Some((first, rest)) if !first.trim().is_empty() && !is_data(first.trim()) => rest,
        _ => text,
    }
}

fn ac3() -> Line {
    let Some(dir) = std::env::var_os("TOPOUNET_WEBKB_DIR").map(PathBuf::from) else {
        return Line {
            id: "AC3",
            status: Status::Skipped,
            detail: "set TOPOUNET_WEBKB_DIR to run".into(),
        };
    };
    let expected = [
        ("texas", (183, 325, 52, 1)),
        ("cornell", (183, 298, 47, 1)),
        ("wisconsin", (251, 515, 89, 1)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, want) in expected {
        let g = match webkb_graph(&dir, name) {
            Ok(g) => g,
            Err(e) => {
                ok = false;
                parts.push(e);
                continue;
            }
        };
        let mut matched = Vec::new();
        let mut seen = Vec::new();
        for mode in [TriangleMode::AllTriangles, TriangleMode::MaximalOnly] {
            let opts = GraphLiftOptions {
                with_triangles: true,
                with_global: true,
                triangle_mode: mode,
            };
            match lift_graph(&g, opts) {
                Ok(cc) => {
                    let got = (cc.num_cells(0), cc.num_cells(1), cc.num_cells(2), cc.num_cells(3));
                    if got == want {
                        matched.push(format!("{mode:?}"));
                    }
                    seen.push(format!("{mode:?} {got:?}"));
                }
                Err(e) => seen.push(format!("{mode:?} error {e}")),
            }
        }
        ok &= !matched.is_empty();
        parts.push(if matched.is_empty() {
            format!("{name}: no mode gives {want:?} ({})", seen.join(", "))
        } else {
            format!("{name}: {want:?} with {}", matched.join("+"))
        });
    }
    judge("AC3", ok, parts.join("; "))
}

fn from_check(id: &'static str, c: verify::CheckOutcome, elapsed: Duration, limit_secs: Option<f64>) -> Line {
    let (fast, time) = match limit_secs {
        Some(l) => within(elapsed, l),
        None => (true, format!("{:.2}s", elapsed.as_secs_f64())),
    };
    judge(id, c.passed && fast, format!("{}, {time}", c.detail))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn ac8_ac9() -> (Line, Line) {
    let config = common::rings_config(300, (0..10).collect());
    let dataset = topounet_cli::load_dataset(config.task, &config.data).unwrap();
    let (table, elapsed) = timed(|| {
        run_ablation(
            &config.model,
            &config.ablation,
            &dataset,
            config.split,
            &config.training,
            &config.seeds,
            threads(),
        )
        .unwrap()
    });
    let rho_bot = table.rows.iter().map(|r| r.rho_total).fold(f64::INFINITY, f64::min);
    let mean = |path: &str, skips: bool| {
        table
            .rows
            .iter()
            .find(|r| r.path == path && r.use_skips == skips)
            .map(|r| r.mean)
            .unwrap()
    };
    let shapes = ["0-1-0", "0-1-2-1-0", "0-1-2-3-2-1-0"];
    let gap = |p: &str| mean(p, true) - mean(p, false);

    let (fast8, time8) = within(elapsed, 600.0);
    let deep = shapes[2];
    let ok8 = rho_bot < 0.01 && gap(deep) > 0.0 && gap(shapes[0]) < gap(deep) && fast8;
    let l8 = judge(
        "AC8",
        ok8,
        format!(
            "rho_bot {rho_bot:.4}; {deep} skip {:.4} vs no-skip {:.4} (gap {:.4}); 0-1-0 gap {:.4}; {time8}",
            mean(deep, true),
            mean(deep, false),
            gap(deep),
            gap(shapes[0])
        ),
    );

    let means: Vec<f64> = shapes.iter().map(|p| mean(p, true)).collect();
    let (fast9, time9) = within(elapsed, 900.0);
    let ok9 = means.windows(2).all(|w| w[1] >= w[0]) && fast9;
    let l9 = judge(
        "AC9",
        ok9,
        format!(
            "mean accuracy {} over 10 seeds; {time9}",
            shapes
                .iter()
                .zip(&means)
                .map(|(p, m)| format!("{p} {m:.4}"))
                .collect::<Vec<_>>()
                .join(" <= ")
        ),
    );
    (l8, l9)
}

const MNIST_IMAGES: usize = 5000;

fn mnist_images(path: &Path) -> Result<Vec<GridInput>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let body = skip_header(&text, |l| l.split(',').all(|f| f.trim().parse::<f64>().is_ok()));
    let head: String = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .take(MNIST_IMAGES)
        .map(|l| format!("{l}\n"))
        .collect();
    let (mut images, _) =
        parse_grid_csv(&head, &path.display().to_string(), 28, 28, true).map_err(|e| e.to_string())?;
    let max = images.iter().flat_map(|g| g.pixels.iter().copied()).fold(0.0, f64::max);
    if max > 1.0 {
        for g in &mut images {
            g.pixels /= 255.0;
        }
    }
    Ok(images)
}

fn mnist_config(use_skips: bool) -> TopoUNetConfig {
    let mut c = TopoUNetConfig::uniform(
        common::path(&[0, 1, 2]),
        vec![1, 32, 32],
        TransportKind::NormalizedIncidence,
        32,
        Head::Reconstruct { target_dim: 1 },
    );
    c.activation = Activation::LeakyRelu;
    c.use_skips = use_skips;
    c
}

fn ac10() -> Line {
    let Some(path) = std::env::var_os("TOPOUNET_MNIST_CSV").map(PathBuf::from) else {
        return Line {
            id: "AC10",
            status: Status::Skipped,
            detail: "set TOPOUNET_MNIST_CSV to run".into(),
        };
    };
    let images = match mnist_images(&path) {
        Ok(i) => i,
        Err(e) => return judge("AC10", false, e),
    };
    let n = images.len();
    let cc = lift_grid(&images[0]).unwrap();
    let dataset = Dataset::reconstruction(cc, images.into_iter().map(|g| g.pixels).collect()).unwrap();
    let options = TrainOptions {
        epochs: 20,
        patience: 20,
        batch_size: 32,
        adam: Adam {
            lr: 2e-3,
            ..Adam::default()
        },
    };
    let scheme = SplitScheme::RandomPercent { train: 0.8, val: 0.1 };
    let run = |skips: bool| -> RunResult {
        train_seeds(&mnist_config(skips), &dataset, scheme, &options, &[0], 1)
            .unwrap()
            .remove(0)
    };
    let params = count_parameters(&mnist_config(true)).unwrap();
    let with = run(true);
    let without = run(false);
    let ok = n >= MNIST_IMAGES
        && (10_000..=14_000).contains(&params)
        && with.test_metric <= 5e-3
        && without.test_metric >= with.test_metric;
    judge(
        "AC10",
        ok,
        format!(
            "{n} images, {params} params, held-out MSE {:.3e} with skips, {:.3e} without",
            with.test_metric, without.test_metric
        ),
    )
}

fn ac11() -> Line {
    let mut config = common::toy_grid_config(15);
    config.model.dropout = 0.2;
    let grids = topounet_cli::load_dataset(config.task, &config.data).unwrap();
    let rings = common::rings_config(10, vec![3, 4]);
    let ring_data = topounet_cli::load_dataset(rings.task, &rings.data).unwrap();
    let go = |c: &topounet_cli::ExperimentConfig, d: &Dataset, threads: usize| {
        train_seeds(&c.model, d, c.split, &c.training, &c.seeds, threads).unwrap()
    };
    let bits = |runs: &[RunResult]| -> Vec<u64> {
        runs.iter()
            .flat_map(|r| {
                std::iter::once(r.test_metric.to_bits()).chain(
                    r.epochs
                        .iter()
                        .flat_map(|e| [e.train_metric.to_bits(), e.val_metric.to_bits()]),
                )
            })
            .collect()
    };
    let mut ok = true;
    let mut compared = 0;
    for (c, d) in [(&config, &grids), (&rings, &ring_data)] {
        let a = bits(&go(c, d, 1));
        let b = bits(&go(c, d, 1));
        let p = bits(&go(c, d, 2));
        ok &= a == b && a == p;
        compared += a.len();
    }
    judge(
        "AC11",
        ok,
        format!("{compared} metric values bit-identical across reruns and thread counts"),
    )
}

fn main() -> ExitCode {
    let seed = 0;
    let mut lines = vec![ac1(), ac2(), ac3()];
    let (c, t) = timed(|| verify::equivariance(seed, 50));
    lines.push(from_check("AC4", c, t, Some(30.0)));
    let (c, t) = timed(|| verify::structural_compatibility(seed, 50));
    lines.push(from_check("AC5", c, t, None));
    let (c, t) = timed(|| verify::gradients(seed, 10));
    lines.push(from_check("AC6", c, t, Some(60.0)));
    let (c, t) = timed(|| verify::capacity(seed, 20));
    lines.push(from_check("AC7", c, t, None));
    let (l8, l9) = ac8_ac9();
    lines.push(l8);
    lines.push(l9);
    lines.push(ac10());
    lines.push(ac11());

    let mut failed = 0;
    for l in &lines {
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skipped => "SKIPPED",
        };
        println!("{:<5} {:<8} {}", l.id, tag, l.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
