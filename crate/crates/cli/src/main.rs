use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use distidx::bench::{
    context, evaluate_mre, measure_index_size, prepare, run_benchmark, train_index, BenchConfig, GraphSource,
    WorkloadSpec,
};
use distidx::graph::largest_connected_component;
use distidx::oracle::write_samples;
use distidx::zoo::MODEL_NAMES;
use distidx::DistanceIndex;

#[derive(Parser)]
#[command(name = "distidx", version, about = "Shortest-path distance indexes for road networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the graph, build the query workload and label it.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory for the component graph and labels.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and save its checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        model: String,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and measure every requested model.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated model names, or `all`.
        #[arg(long, default_value = "all")]
        models: String,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        /// Write per-query predictions for every model.
        #[arg(long)]
        dump_predictions: bool,
        /// Single thread, epoch and tree caps, timings in a side file.
        #[arg(long)]
        serial: bool,
        #[arg(long, default_value_t = 100_000)]
        latency_queries: usize,
        #[arg(long, default_value_t = 5)]
        latency_repeats: usize,
    },
    /// Answer `u v` lines from standard input with one distance per line.
    Query {
        #[arg(long)]
        checkpoint: PathBuf,
        /// With --coords, read ids as they appear in these graph files;
        /// otherwise ids are 0-based node indices.
        #[arg(long, requires = "coords")]
        graph: Option<PathBuf>,
        #[arg(long)]
        coords: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Edge file (`u v w` lines).
    #[arg(long, requires = "coords", conflicts_with = "grid")]
    graph: Option<PathBuf>,
    /// Coordinate file (`id lat lon` lines).
    #[arg(long)]
    coords: Option<PathBuf>,
    /// Synthetic perturbed grid `ROWSxCOLS` instead of graph files.
    #[arg(long, default_value = "20x25")]
    grid: String,
    /// Trip CSV with `o_lat,o_lon,d_lat,d_lon` columns for workload queries.
    #[arg(long)]
    trips: Option<PathBuf>,
    /// Query count for trip or random workloads; all pairs when omitted
    /// and the graph is small enough.
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long, default_value_t = 2)]
    hops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_ratio: f64,
    /// Ground-truth cache directory.
    #[arg(long, env = "DISTIDX_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 300.0)]
    budget_secs: f64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 64)]
    landmarks: usize,
    /// Epoch cap for neural models.
    #[arg(long)]
    epochs: Option<usize>,
    /// Tree cap per boosting stage.
    #[arg(long)]
    trees: Option<usize>,
}

const ALL_PAIRS_BUDGET: u64 = 2_000_000;

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once('x').ok_or_else(|| format!("grid `{s}` is not ROWSxCOLS"))?;
    let parse = |t: &str| t.parse::<usize>().map_err(|_| format!("grid `{s}` is not ROWSxCOLS"));
    Ok((parse(r)?, parse(c)?))
}

impl DataArgs {
    fn config(&self) -> Result<BenchConfig, String> {
        let graph = match (&self.graph, &self.coords) {
            (Some(e), Some(c)) => GraphSource::Files { edges: e.clone(), coords: c.clone() },
            _ => {
                let (rows, cols) = parse_grid(&self.grid)?;
                GraphSource::Grid { rows, cols, seed: self.seed }
            }
        };
        let workload = match (&self.trips, self.queries) {
            (Some(p), q) => WorkloadSpec::Trips { path: p.clone(), target: q.unwrap_or(100_000), hops: self.hops },
            (None, Some(count)) => WorkloadSpec::Random { count },
            (None, None) => WorkloadSpec::AllPairs { budget: ALL_PAIRS_BUDGET },
        };
        Ok(BenchConfig {
            graph,
            workload,
            seed: self.seed,
            train_ratio: self.train_ratio,
            cache_dir: self.cache_dir.clone(),
            ..BenchConfig::default()
        })
    }
}

fn with_train(mut cfg: BenchConfig, t: &TrainArgs) -> BenchConfig {
    cfg.budget_seconds = t.budget_secs;
    cfg.dim = t.dim;
    cfg.landmarks = t.landmarks;
    cfg.epochs = t.epochs;
    cfg.trees = t.trees;
    cfg
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Prepare { data, out } => {
            let cfg = data.config()?;
            let p = prepare(&cfg)?;
            std::fs::create_dir_all(&out)?;
            p.graph.write_files(&out.join("graph.edges"), &out.join("graph.coords"))?;
            let hash = p.graph.content_hash();
            write_samples(&out.join("ground_truth.txt"), &hash, &p.samples)?;
            let summary = serde_json::json!({
                "n": p.graph.n(),
                "m": p.graph.m(),
                "dropped": p.dropped,
                "graph_hash": hash,
                "queries": p.samples.len(),
                "train": p.split.train.len(),
                "test": p.split.test.len(),
                "ground_truth_seconds": p.ground_truth_seconds,
            });
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            println!("{summary}");
            Ok(true)
        }
        Command::Train { data, train, model, out } => {
            let cfg = BenchConfig { models: vec![model.clone()], ..with_train(data.config()?, &train) };
            cfg.validate()?;
            let p = prepare(&cfg)?;
            let mut ctx = context(&cfg, &p);
            let t = train_index(&model, &cfg, &mut ctx)?;
            t.index.save(&out)?;
            let line = serde_json::json!({
                "model": model,
                "mre": evaluate_mre(&t.index, &p.split.test.samples)?,
                "pt_seconds": t.pt_seconds,
                "epochs": t.epochs,
                "ms_bytes": measure_index_size(&t.index),
                "checkpoint": out,
            });
            println!("{line}");
            Ok(true)
        }
        Command::Bench { data, train, models, out, dump_predictions, serial, latency_queries, latency_repeats } => {
            let models: Vec<String> = if models == "all" {
                MODEL_NAMES.iter().map(|s| s.to_string()).collect()
            } else {
                models.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            };
            let mut cfg = BenchConfig {
                models,
                out_dir: Some(out.clone()),
                dump_predictions,
                serial,
                latency_queries,
                latency_repeats,
                ..with_train(data.config()?, &train)
            };
            if serial {
                cfg.epochs = cfg.epochs.or(Some(5));
                cfg.trees = cfg.trees.or(Some(200));
            }
            let report = run_benchmark(&cfg)?;
            for r in &report.reports {
                match (&r.error, r.mre_percent) {
                    (Some(e), _) => eprintln!("{:14} FAILED {e}", r.model),
                    (None, Some(m)) => println!(
                        "{:14} mre {m:7.3}%  ms {:>10} B  qt {}",
                        r.model,
                        r.ms_bytes.unwrap_or(0),
                        r.qt_mean_us.map_or("-".into(), |q| format!("{q:.3} us"))
                    ),
                    _ => {}
                }
            }
            println!("report written to {}", out.join("report.json").display());
            Ok(report.all_ok())
        }
        Command::Query { checkpoint, graph, coords } => {
            let index = DistanceIndex::load(&checkpoint, None)?;
            let ids: Option<HashMap<i64, usize>> = match (graph, coords) {
                (Some(e), Some(c)) => {
                    let raw = distidx::graph::load_graph(&e, &c)?;
                    let (g, _) = largest_connected_component(&raw)?;
                    if g.content_hash() != index.graph_hash() {
                        return Err("checkpoint was built for a different graph".into());
                    }
                    Some((0..g.n()).map(|v| (g.original_id(v), v)).collect())
                }
                _ => None,
            };
            let stdin = std::io::stdin();
            let mut out = BufWriter::new(std::io::stdout().lock());
            for (lineno, line) in stdin.lock().lines().enumerate() {
                let line = line?;
                let body = line.trim();
                if body.is_empty() || body.starts_with('#') {
                    continue;
                }
                let f: Vec<&str> = body.split_whitespace().collect();
                if f.len() != 2 {
                    return Err(format!("line {}: expected `u v`", lineno + 1).into());
                }
                let node = |s: &str| -> Result<usize, String> {
                    let raw: i64 = s.parse().map_err(|_| format!("line {}: bad node id `{s}`", lineno + 1))?;
                    match &ids {
                        Some(m) => m.get(&raw).copied().ok_or_else(|| format!("line {}: unknown node {raw}", lineno + 1)),
                        None => usize::try_from(raw).map_err(|_| format!("line {}: bad node id `{s}`", lineno + 1)),
                    }
                };
                let (u, v) = (node(f[0])?, node(f[1])?);
                writeln!(out, "{}", index.predict(u, v)?)?;
            }
            out.flush()?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
