use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use topounet_core::io::{load_graph, load_grid_binary, load_hypergraph, load_xyz};
use topounet_core::lift::{
    lift_graph, lift_grid, lift_hypergraph, lift_point_cloud, GraphInput, GraphLiftOptions, GridInput, PointCloudInput,
};
use topounet_core::{min_bottleneck_width, support_profile, CombinatorialComplex, ComplexJson, RankPath};
use topounet_harness::ablation::{AblationTable, DeltaRow};
use topounet_harness::report::{aggregate, config_hash, runs_csv, short_hash, Aggregate, OutputSet};
use topounet_harness::{run_ablation, train_seeds, Metric, RunResult};

use crate::error::CliError;
use crate::experiment::{load_dataset, ExperimentConfig};
use crate::verify::{run_all, CheckOutcome};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

/// What a command prints, the files it wrote, and whether a check failed.
#[derive(Debug, Default)]
pub struct Report {
    pub stdout: String,
    pub files: Vec<PathBuf>,
    pub failure: Option<String>,
}

/// Raw inputs `build` can lift.
#[derive(Clone, Debug)]
pub enum BuildSource {
    Graph {
        edges: PathBuf,
        num_nodes: Option<usize>,
        lift: GraphLiftOptions,
    },
    Hypergraph {
        path: PathBuf,
        num_nodes: Option<usize>,
        with_rank2: bool,
        min_pairwise_overlap: usize,
    },
    /// An all-zero image; only the size matters for the complex.
    BlankGrid {
        height: usize,
        width: usize,
    },
    /// The first image of a binary grid file.
    GridBinary {
        path: PathBuf,
    },
    PointCloud {
        path: PathBuf,
        k: usize,
    },
}

pub fn lift_source(source: &BuildSource) -> Result<CombinatorialComplex, CliError> {
    Ok(match source {
        BuildSource::Graph { edges, num_nodes, lift } => {
            let g = load_graph(edges, None, None)?;
            let g = match num_nodes {
                Some(n) if *n > g.num_nodes() => GraphInput::new(*n, g.edges().iter().copied())?,
                Some(n) if *n < g.num_nodes() => {
                    return Err(CliError::Data(format!(
                        "{}: node {} exceeds --num-nodes {n}",
                        edges.display(),
                        g.num_nodes() - 1
                    )))
                }
                _ => g,
            };
            lift_graph(&g, *lift)?
        }
        BuildSource::Hypergraph {
            path,
            num_nodes,
            with_rank2,
            min_pairwise_overlap,
        } => lift_hypergraph(&load_hypergraph(path, *num_nodes)?, *with_rank2, *min_pairwise_overlap)?,
        BuildSource::BlankGrid { height, width } => lift_grid(&GridInput::blank(*height, *width))?,
        BuildSource::GridBinary { path } => {
            let images = load_grid_binary(path)?;
            let first = images
                .first()
                .ok_or_else(|| CliError::Data(format!("{}: no images", path.display())))?;
            lift_grid(first)?
        }
        BuildSource::PointCloud { path, k } => lift_point_cloud(&PointCloudInput::new(load_xyz(path)?, *k)?)?,
    })
}

/// `n0=… n1=…` over ranks `0..=max(top rank, 1)`.
pub fn count_summary(cc: &CombinatorialComplex) -> String {
    let top = cc.active_ranks().into_iter().max().unwrap_or(0).max(1);
    (0..=top)
        .map(|r| format!("n{r}={}", cc.num_cells(r)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn build(source: &BuildSource, out: &Path, force: bool, format: Format) -> Result<Report, CliError> {
    let cc = lift_source(source)?;
    let json = cc.to_json();
    let hash = config_hash(&json)?;
    let outputs = OutputSet {
        dir: out.to_path_buf(),
        stem: "complex".into(),
        hash: hash.clone(),
    };
    outputs.check_writable(&["json"], force)?;
    let files = outputs.write_all(&[("json", serde_json::to_string(&json)?)])?;
    let top = cc.active_ranks().into_iter().max().unwrap_or(0).max(1);
    let stdout = match format {
        Format::Text => count_summary(&cc) + "\n",
        Format::Csv => {
            let mut s = "rank,count\n".to_string();
            for r in 0..=top {
                writeln!(s, "{r},{}", cc.num_cells(r)).expect("string write");
            }
            s
        }
        Format::Json => {
            let counts: Vec<usize> = (0..=top).map(|r| cc.num_cells(r)).collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "hash": hash,
                "counts": counts,
                "file": files[0],
            }))? + "\n"
        }
    };
    Ok(Report {
        stdout,
        files,
        failure: None,
    })
}

pub fn load_complex(path: &Path) -> Result<CombinatorialComplex, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let json: ComplexJson =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(CombinatorialComplex::from_json(json)?)
}

#[derive(Debug, Serialize)]
struct ProfileRow {
    rank: usize,
    count: usize,
    /// `n_r / n_prev`, absent on the first level.
    rho: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ProfileReport {
    path: String,
    levels: Vec<ProfileRow>,
    rho_bot: f64,
    rho_bot_exact: String,
    d0: Option<usize>,
    min_bottleneck_width: Option<usize>,
}

pub fn analyze(
    cc: &CombinatorialComplex,
    path: &RankPath,
    d0: Option<usize>,
    format: Format,
) -> Result<Report, CliError> {
    let profile = support_profile(cc, path)?;
    let ratios = profile.ratios();
    let levels: Vec<ProfileRow> = profile
        .levels
        .iter()
        .enumerate()
        .map(|(i, &(rank, count))| ProfileRow {
            rank,
            count,
            rho: i.checked_sub(1).map(|j| ratios[j].value()),
        })
        .collect();
    let bot = profile.bottleneck();
    let report = ProfileReport {
        path: path.ranks().iter().map(usize::to_string).collect::<Vec<_>>().join("-"),
        levels,
        rho_bot: bot.value(),
        rho_bot_exact: bot.to_string(),
        d0,
        min_bottleneck_width: d0.map(|d| min_bottleneck_width(d, &profile)),
    };
    let stdout = match format {
        Format::Text => {
            let mut s = format!("{:>5} {:>8} {:>10}\n", "rank", "n_r", "rho_i");
            for l in &report.levels {
                let rho = l.rho.map_or("-".to_string(), |r| format!("{r:.4}"));
                writeln!(s, "{:>5} {:>8} {:>10}", l.rank, l.count, rho).expect("string write");
            }
            writeln!(s, "rho_bot = {} = {:.6}", report.rho_bot_exact, report.rho_bot).expect("string write");
            if let (Some(d), Some(w)) = (report.d0, report.min_bottleneck_width) {
                writeln!(s, "min bottleneck width for d0={d}: {w}").expect("string write");
            }
            s
        }
        Format::Csv => {
            let mut s = "rank,count,rho\n".to_string();
            for l in &report.levels {
                writeln!(
                    s,
                    "{},{},{}",
                    l.rank,
                    l.count,
                    l.rho.map_or(String::new(), |r| r.to_string())
                )
                .expect("string write");
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    Ok(Report {
        stdout,
        files: vec![],
        failure: None,
    })
}

fn outputs_for(config: &ExperimentConfig, stem: &str) -> Result<OutputSet, CliError> {
    Ok(OutputSet {
        dir: config.output_dir.clone(),
        stem: stem.into(),
        hash: config_hash(&config.hashed())?,
    })
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Accuracy => "accuracy",
        Metric::Mse => "mse",
    }
}

pub fn train(config: &ExperimentConfig, threads: usize, force: bool, format: Format) -> Result<Report, CliError> {
    let outputs = outputs_for(config, "train")?;
    outputs.check_writable(&["csv", "json"], force)?;
    let dataset = load_dataset(config.task, &config.data)?;
    let runs = train_seeds(
        &config.model,
        &dataset,
        config.split,
        &config.training,
        &config.seeds,
        threads,
    )?;
    let label = config.model.path.u_shape();
    let agg = aggregate(&outputs.hash, &label, &runs);
    let labeled: Vec<(String, RunResult)> = runs.iter().map(|r| (label.clone(), r.clone())).collect();
    let csv = runs_csv(&labeled)?;
    let json = serde_json::to_string_pretty(&agg)? + "\n";
    let files = outputs.write_all(&[("csv", csv.clone()), ("json", json.clone())])?;
    let stdout = match format {
        Format::Text => train_text(&agg, &runs),
        Format::Csv => csv,
        Format::Json => json,
    };
    Ok(Report {
        stdout,
        files,
        failure: None,
    })
}

fn train_text(agg: &Aggregate, runs: &[RunResult]) -> String {
    let mut s = format!(
        "config {}  path {}  metric {}\n",
        short_hash(&agg.config_hash),
        agg.label,
        metric_name(agg.metric)
    );
    for r in runs {
        writeln!(
            s,
            "seed {:>4}: test {:.4}  best epoch {} of {}  params {}",
            r.seed,
            r.test_metric,
            r.best_epoch,
            r.epochs.len() - 1,
            r.num_parameters
        )
        .expect("string write");
    }
    writeln!(s, "mean {:.4}  std {:.4}  seeds {}", agg.mean, agg.std, agg.n_seeds).expect("string write");
    s
}

#[derive(Debug, Serialize)]
struct AblationSummaryRow<'a> {
    path: &'a str,
    use_skips: bool,
    rho_total: f64,
    num_parameters: usize,
    mean: f64,
    std: f64,
    n_seeds: usize,
}

#[derive(Debug, Serialize)]
struct AblationReport<'a> {
    config_hash: &'a str,
    metric: Metric,
    rows: Vec<AblationSummaryRow<'a>>,
    deltas: &'a [DeltaRow],
}

fn ablation_report<'a>(hash: &'a str, table: &'a AblationTable) -> AblationReport<'a> {
    AblationReport {
        config_hash: hash,
        metric: table.metric,
        rows: table
            .rows
            .iter()
            .map(|r| AblationSummaryRow {
                path: &r.path,
                use_skips: r.use_skips,
                rho_total: r.rho_total,
                num_parameters: r.num_parameters,
                mean: r.mean,
                std: r.std,
                n_seeds: r.runs.len(),
            })
            .collect(),
        deltas: &table.deltas,
    }
}

pub fn ablate(config: &ExperimentConfig, threads: usize, force: bool, format: Format) -> Result<Report, CliError> {
    if config.ablation.is_empty() {
        return Err(CliError::Usage("config: `ablation` lists no variants".into()));
    }
    let outputs = outputs_for(config, "ablate")?;
    outputs.check_writable(&["csv", "json"], force)?;
    let dataset = load_dataset(config.task, &config.data)?;
    let table = run_ablation(
        &config.model,
        &config.ablation,
        &dataset,
        config.split,
        &config.training,
        &config.seeds,
        threads,
    )?;
    let runs: Vec<(String, RunResult)> = table
        .rows
        .iter()
        .flat_map(|r| {
            let label = format!("{}{}", r.path, if r.use_skips { "" } else { " no-skip" });
            r.runs.iter().map(move |run| (label.clone(), run.clone()))
        })
        .collect();
    let csv = runs_csv(&runs)?;
    let json = serde_json::to_string_pretty(&ablation_report(&outputs.hash, &table))? + "\n";
    let files = outputs.write_all(&[("csv", csv), ("json", json.clone())])?;
    let stdout = match format {
        Format::Text => format!(
            "config {}  metric {}\n{}",
            short_hash(&outputs.hash),
            metric_name(table.metric),
            table.to_text()
        ),
        Format::Csv => topounet_harness::report::ablation_csv(&table)?,
        Format::Json => json,
    };
    Ok(Report {
        stdout,
        files,
        failure: None,
    })
}

pub fn verify(seed: u64, format: Format) -> Result<Report, CliError> {
    let outcomes = run_all(seed);
    verify_report(&outcomes, format)
}

pub fn verify_report(outcomes: &[CheckOutcome], format: Format) -> Result<Report, CliError> {
    let stdout = match format {
        Format::Text => outcomes
            .iter()
            .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect(),
        Format::Csv => {
            let mut s = "check,passed,detail\n".to_string();
            for c in outcomes {
                writeln!(s, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'")).expect("string write");
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(outcomes)? + "\n",
    };
    let failure = outcomes
        .iter()
        .find(|c| !c.passed)
        .map(|c| format!("check {} failed: {}", c.name, c.detail));
    Ok(Report {
        stdout,
        files: vec![],
        failure,
    })
}
