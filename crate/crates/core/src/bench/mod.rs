//! End-to-end benchmark pipeline: load, largest component, workload,
//! ground truth, split, then per model build, train, and measure.

pub mod metrics;
pub mod report;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gbdt::{fit_gbdt_model, BoostParams, GbdtConfig};
use crate::graph::{largest_connected_component, load_graph, IdMap, RoadNetwork};
use crate::index::DistanceIndex;
use crate::oracle::{cached_ground_truth, GroundTruthSample};
use crate::synthetic::{perturbed_grid, GridSpec};
use crate::util::{derive_seed, is_serial, set_serial};
use crate::workload::{
    load_trips, sample_all_pairs, sample_random_pairs, split_train_test, workload_queries, QueryPair, SplitDataset,
};
use crate::zoo::{build_model, train_model, BuildContext};

pub use metrics::{
    evaluate_mre, evaluate_mre_with, measure_index_size, measure_precompute, measure_query_latency, mre, pearson, per_query_latency_ns,
    predictions, Latency,
};
pub use report::{BenchReport, CurveRow, GraphSummary, MetricReport, Status};

pub const CACHE_ENV: &str = "DISTIDX_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphSource {
    Files { edges: PathBuf, coords: PathBuf },
    /// [`perturbed_grid`] with default spacing and noise.
    Grid { rows: usize, cols: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WorkloadSpec {
    /// Every unordered pair; fails above `budget` pairs.
    AllPairs { budget: u64 },
    /// Uniformly sampled distinct pairs.
    Random { count: usize },
    /// Trip endpoints grown to `target` pairs through `hops`-hop
    /// neighborhoods.
    Trips { path: PathBuf, target: usize, hops: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub graph: GraphSource,
    pub workload: WorkloadSpec,
    pub models: Vec<String>,
    pub seed: u64,
    pub budget_seconds: f64,
    pub landmarks: usize,
    pub dim: usize,
    pub train_ratio: f64,
    /// Single-threaded, epoch-capped training with timings moved to a side
    /// file, so that the JSON report is reproducible byte for byte.
    pub serial: bool,
    /// Epoch cap for neural models; required in serial mode.
    pub epochs: Option<usize>,
    /// Tree cap per boosting stage.
    pub trees: Option<usize>,
    pub latency_queries: usize,
    pub latency_repeats: usize,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    #[serde(skip)]
    pub dump_predictions: bool,
    /// Falls back to `DISTIDX_CACHE_DIR`.
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            graph: GraphSource::Grid { rows: 20, cols: 25, seed: 7 },
            workload: WorkloadSpec::AllPairs { budget: 2_000_000 },
            models: vec!["manhattan".into()],
            seed: 0,
            budget_seconds: 300.0,
            landmarks: 64,
            dim: 64,
            train_ratio: 0.8,
            serial: false,
            epochs: None,
            trees: None,
            latency_queries: 100_000,
            latency_repeats: 5,
            out_dir: None,
            dump_predictions: false,
            cache_dir: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidArgument("at least one model is required".into()));
        }
        if !(self.budget_seconds > 0.0) {
            return Err(Error::InvalidArgument(format!("budget {} must be positive", self.budget_seconds)));
        }
        if self.dim == 0 || self.landmarks == 0 {
            return Err(Error::InvalidArgument("dim and landmark count must be positive".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::InvalidArgument("train ratio must lie in (0, 1)".into()));
        }
        if self.serial && (self.epochs.is_none() || self.trees.is_none()) {
            return Err(Error::InvalidArgument("serial mode needs both an epoch cap and a tree cap".into()));
        }
        if self.latency_queries == 0 || self.latency_repeats == 0 {
            return Err(Error::InvalidArgument("latency needs queries and at least one pass".into()));
        }
        Ok(())
    }

    /// SHA-256 over the serialized config, first 16 hex digits.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir.clone().or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
    }
}

/// Everything shared by all models of a run.
pub struct Prepared {
    pub graph: RoadNetwork,
    pub id_map: IdMap,
    pub dropped: usize,
    pub samples: Vec<GroundTruthSample>,
    pub split: SplitDataset,
    pub ground_truth_seconds: f64,
}

pub fn load_source(src: &GraphSource) -> Result<RoadNetwork> {
    match src {
        GraphSource::Files { edges, coords } => load_graph(edges, coords),
        GraphSource::Grid { rows, cols, seed } => {
            Ok(perturbed_grid(&GridSpec { rows: *rows, cols: *cols, ..GridSpec::default() }, *seed))
        }
    }
}

fn query_pairs(g: &RoadNetwork, spec: &WorkloadSpec, seed: u64) -> Result<Vec<QueryPair>> {
    match spec {
        WorkloadSpec::AllPairs { budget } => sample_all_pairs(g, *budget),
        WorkloadSpec::Random { count } => sample_random_pairs(g, *count, derive_seed(seed, 0x9a1e)),
        WorkloadSpec::Trips { path, target, hops } => {
            workload_queries(g, &load_trips(path)?, *target, *hops, derive_seed(seed, 0x791b))
        }
    }
}

pub fn prepare(cfg: &BenchConfig) -> Result<Prepared> {
    prepare_graph(&load_source(&cfg.graph)?, cfg)
}

/// [`prepare`] on an already loaded network; `cfg.graph` is ignored.
pub fn prepare_graph(raw: &RoadNetwork, cfg: &BenchConfig) -> Result<Prepared> {
    let (graph, id_map) = largest_connected_component(raw)?;
    let dropped = raw.n() - graph.n();
    if dropped > 0 {
        log::info!("largest component keeps {} of {} vertices", graph.n(), raw.n());
    }
    let pairs = query_pairs(&graph, &cfg.workload, cfg.seed)?;
    let start = Instant::now();
    let samples = cached_ground_truth(&graph, &pairs, cfg.resolved_cache_dir().as_deref())?;
    let ground_truth_seconds = start.elapsed().as_secs_f64();
    let split = split_train_test(&samples, cfg.train_ratio, cfg.seed)?;
    Ok(Prepared { graph, id_map, dropped, samples, split, ground_truth_seconds })
}

/// A trained index with its precomputation accounting.
pub struct Trained {
    pub index: DistanceIndex,
    pub pt_seconds: f64,
    pub pretrain_seconds: f64,
    pub curve: Vec<CurveRow>,
    pub epochs: usize,
    pub best_val_mre: Option<f64>,
}

pub fn context<'a>(cfg: &BenchConfig, data: &'a Prepared) -> BuildContext<'a> {
    let mut ctx = BuildContext::new(&data.graph, &data.split, cfg.dim, cfg.landmarks, cfg.seed);
    ctx.parallel_pretrain = !cfg.serial;
    ctx
}

/// Builds and trains `name` under the run's budget or caps.
pub fn train_index(name: &str, cfg: &BenchConfig, ctx: &mut BuildContext) -> Result<Trained> {
    if name == "gbdt" {
        let boost = BoostParams {
            budget_seconds: if cfg.serial { f64::INFINITY } else { cfg.budget_seconds },
            max_trees: cfg.trees.map_or(BoostParams::default().max_trees, |t| 2 * t),
            ..BoostParams::default()
        };
        let gcfg = GbdtConfig { boost, ..GbdtConfig::default() };
        let ((model, curves), pt) = measure_precompute(|| fit_gbdt_model(ctx, &gcfg))?;
        let mut curve = Vec::new();
        for c in &curves {
            for (&mse, &s) in c.train_mse.iter().zip(&c.seconds) {
                curve.push(CurveRow { epoch: curve.len(), seconds: Some(s), train_loss: mse, val_mre: None });
            }
        }
        let epochs = model.ensembles.tree_count();
        return Ok(Trained {
            index: model.into(),
            pt_seconds: pt,
            pretrain_seconds: 0.0,
            curve,
            epochs,
            best_val_mre: None,
        });
    }
    let start = Instant::now();
    let built = build_model(name, ctx)?;
    let mut model = built.model;
    let mut tc = model.config.clone();
    if cfg.serial {
        tc.budget_seconds = f64::INFINITY;
    } else {
        tc.budget_seconds = cfg.budget_seconds;
    }
    tc.max_epochs = cfg.epochs;
    let curve = train_model(&mut model, ctx.g, ctx.split, &tc)?;
    let pt = start.elapsed().as_secs_f64() + built.reused_seconds;
    Ok(Trained {
        index: model.into(),
        pt_seconds: pt,
        pretrain_seconds: built.reused_seconds,
        curve: curve
            .points
            .iter()
            .map(|p| CurveRow { epoch: p.epoch, seconds: Some(p.seconds), train_loss: p.train_loss, val_mre: p.val_mre })
            .collect(),
        epochs: curve.epochs,
        best_val_mre: curve.best_val_mre,
    })
}

/// Test pairs repeated until a pass holds at least `count` queries.
pub fn latency_queries(test: &[GroundTruthSample], count: usize) -> Vec<QueryPair> {
    if test.is_empty() {
        return Vec::new();
    }
    test.iter().cycle().take(count.max(test.len())).map(|s| (s.u, s.v)).collect()
}

fn measure(
    name: &str,
    cfg: &BenchConfig,
    ctx: &mut BuildContext,
    data: &Prepared,
    hash: &str,
) -> Result<MetricReport> {
    let t = train_index(name, cfg, ctx)?;
    let test = &data.split.test.samples;
    let pred = predictions(&t.index, test)?;
    let truth: Vec<f64> = test.iter().map(|q| q.d).collect();
    let m = mre(&pred, &truth)?;
    if cfg.dump_predictions {
        if let Some(dir) = &cfg.out_dir {
            dump_predictions(&dir.join(format!("predictions-{name}.csv")), test, &pred)?;
        }
    }
    let lat = measure_query_latency(&t.index, &latency_queries(test, cfg.latency_queries), 1, cfg.latency_repeats)?;
    Ok(MetricReport {
        model: name.to_string(),
        status: Status::Ok,
        error: None,
        mre: Some(m),
        mre_percent: Some(m * 100.0),
        pt_seconds: Some(t.pt_seconds),
        pretrain_seconds: Some(t.pretrain_seconds),
        qt_mean_us: Some(lat.mean_us),
        qt_std_us: Some(lat.std_us),
        qt_batch_us: Some(lat.batch_us),
        ms_bytes: Some(measure_index_size(&t.index)),
        epochs: Some(t.epochs),
        best_val_mre: t.best_val_mre,
        seed: cfg.seed,
        config_hash: hash.to_string(),
        curve: t.curve,
    })
}

/// `u,v,d,pred` per test query, values printed round-trip exact.
pub fn dump_predictions(path: &Path, test: &[GroundTruthSample], pred: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["u", "v", "d", "pred"])?;
    for (q, p) in test.iter().zip(pred) {
        w.write_record([q.u.to_string(), q.v.to_string(), q.d.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every configured model; a failing model yields a failed row and
/// the run continues. Reports are written to `out_dir` when set.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    if !cfg.serial {
        return run_inner(cfg);
    }
    let was = is_serial();
    set_serial(true);
    let result = run_inner(cfg);
    set_serial(was);
    result
}

fn run_inner(cfg: &BenchConfig) -> Result<BenchReport> {
    let hash = cfg.hash();
    let data = prepare(cfg)?;
    let mut ctx = context(cfg, &data);
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut reports = Vec::new();
    for name in &cfg.models {
        log::info!("benchmarking {name}");
        let row = match catch_unwind(AssertUnwindSafe(|| measure(name, cfg, &mut ctx, &data, &hash))) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => MetricReport::failed(name, e.to_string(), cfg.seed, &hash),
            Err(p) => MetricReport::failed(name, format!("panicked: {}", panic_message(p)), cfg.seed, &hash),
        };
        if let Some(e) = &row.error {
            log::warn!("{name} failed: {e}");
        }
        reports.push(row);
    }
    let full = BenchReport {
        config_hash: hash.clone(),
        seed: cfg.seed,
        graph: GraphSummary {
            n: data.graph.n(),
            m: data.graph.m(),
            content_hash: data.graph.content_hash(),
            dropped: data.dropped,
        },
        train_queries: data.split.train.len(),
        test_queries: data.split.test.len(),
        model_selection: "best epoch on a validation slice held out from the training split".into(),
        timings_file: None,
        ranking: report::ranking(&reports),
        reports,
    };
    let out = if cfg.serial {
        let mut r = full.clone();
        r.timings_file = Some("timings.json".into());
        r.reports = r.reports.iter().map(MetricReport::without_timings).collect();
        r
    } else {
        full.clone()
    };
    if let Some(dir) = &cfg.out_dir {
        out.write_json(&dir.join("report.json"))?;
        full.write_csv(&dir.join("report.csv"))?;
        if cfg.serial {
            full.write_json(&dir.join("timings.json"))?;
        }
    }
    Ok(out)
}
