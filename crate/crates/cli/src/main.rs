use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use topounet_cli::commands::{self, BuildSource, Format};
use topounet_cli::{CliError, ExperimentConfig};
use topounet_core::lift::{GraphLiftOptions, TriangleMode};
use topounet_core::RankPath;

#[derive(Parser, Debug)]
#[command(name = "topounet", version, about = "Topological U-Nets on combinatorial complexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed list of the config with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lift raw input to a complex, write it as JSON, print cell counts.
    Build(BuildArgs),
    /// Support ratios of a rank path on a saved complex.
    Analyze(AnalyzeArgs),
    /// Train on every seed of a config.
    Train,
    /// Run the ablation matrix of a config.
    Ablate,
    /// Run the built-in correctness checks.
    Verify,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true)))]
struct BuildArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long, group = "source")]
    graph: Option<PathBuf>,
    /// Hyperedges, one whitespace-separated vertex list per line.
    #[arg(long, group = "source")]
    hypergraph: Option<PathBuf>,
    /// Blank image grid of size HxW, e.g. 28x28.
    #[arg(long, group = "source", value_parser = parse_size)]
    grid: Option<(usize, usize)>,
    /// Binary grid file; the first image is lifted.
    #[arg(long, group = "source")]
    grid_bin: Option<PathBuf>,
    /// Point cloud, one `x y z` per line.
    #[arg(long, group = "source")]
    points: Option<PathBuf>,
    /// Node count when the edge list leaves trailing nodes isolated.
    #[arg(long)]
    num_nodes: Option<usize>,
    #[arg(long)]
    no_triangles: bool,
    /// Add one rank-3 cell spanning all nodes.
    #[arg(long)]
    with_global: bool,
    #[arg(long)]
    maximal_triangles: bool,
    /// Hypergraph lifts: skip rank-2 unions.
    #[arg(long)]
    no_rank2: bool,
    #[arg(long, default_value_t = 1)]
    min_overlap: usize,
    /// Neighbours per point.
    #[arg(long, default_value_t = 6)]
    k: usize,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Complex JSON written by `build`.
    #[arg(long)]
    complex: PathBuf,
    /// Strictly increasing ranks, e.g. 0-1-2-3.
    #[arg(long)]
    path: String,
    /// Input width for the minimum bottleneck width.
    #[arg(long)]
    d0: Option<usize>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HxW")?;
    Ok((
        h.trim().parse().map_err(|e| format!("height: {e}"))?,
        w.trim().parse().map_err(|e| format!("width: {e}"))?,
    ))
}

fn parse_path(s: &str) -> Result<RankPath, CliError> {
    let ranks = s
        .split(['-', ','])
        .map(|r| r.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("path {s:?}: {e}")))?;
    RankPath::new(ranks).map_err(|e| CliError::Usage(format!("path {s:?}: {e}")))
}

fn build_source(a: &BuildArgs) -> BuildSource {
    if let Some(edges) = &a.graph {
        BuildSource::Graph {
            edges: edges.clone(),
            num_nodes: a.num_nodes,
            lift: GraphLiftOptions {
                with_triangles: !a.no_triangles,
                with_global: a.with_global,
                triangle_mode: if a.maximal_triangles {
                    TriangleMode::MaximalOnly
                } else {
                    TriangleMode::AllTriangles
                },
            },
        }
    } else if let Some(path) = &a.hypergraph {
        BuildSource::Hypergraph {
            path: path.clone(),
            num_nodes: a.num_nodes,
            with_rank2: !a.no_rank2,
            min_pairwise_overlap: a.min_overlap,
        }
    } else if let Some((height, width)) = a.grid {
        BuildSource::BlankGrid { height, width }
    } else if let Some(path) = &a.grid_bin {
        BuildSource::GridBinary { path: path.clone() }
    } else {
        BuildSource::PointCloud {
            path: a.points.clone().expect("clap enforces one source"),
            k: a.k,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<commands::Report, CliError> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    match &cli.command {
        Command::Build(a) => commands::build(&build_source(a), &out, cli.force, cli.format),
        Command::Analyze(a) => {
            let path = parse_path(&a.path)?;
            let cc = commands::load_complex(&a.complex)?;
            commands::analyze(&cc, &path, a.d0, cli.format)
        }
        Command::Train => commands::train(&load_config(cli)?, cli.threads, cli.force, cli.format),
        Command::Ablate => commands::ablate(&load_config(cli)?, cli.threads, cli.force, cli.format),
        Command::Verify => commands::verify(cli.seed.unwrap_or(0), cli.format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.stdout);
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            match report.failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
