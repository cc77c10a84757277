//! Exact shortest-path distances: binary-heap Dijkstra, grouped batch
//! labeling, and the on-disk `u v d` sample format shared by ground-truth
//! caches and query datasets.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{hex_digest, open_text, NodeId, RoadNetwork};

#[derive(Clone, Debug)]
pub struct DistanceRow {
    pub source: NodeId,
    pub dist: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSample {
    pub u: NodeId,
    pub v: NodeId,
    pub d: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // reversed: BinaryHeap is a max-heap, we pop the smallest (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths. Unreachable nodes are left at infinity.
pub fn dijkstra_sssp(g: &RoadNetwork, source: NodeId) -> Result<DistanceRow> {
    g.check_node(source)?;
    let mut dist = vec![f64::INFINITY; g.n()];
    let mut settled = vec![false; g.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        for (v, w) in g.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    Ok(DistanceRow { source, dist })
}

pub fn exact_distance(g: &RoadNetwork, u: NodeId, v: NodeId) -> Result<f64> {
    g.check_node(v)?;
    let row = dijkstra_sssp(g, u)?;
    let d = row.dist[v];
    if !d.is_finite() {
        return Err(Error::Disconnected { u, v });
    }
    Ok(d)
}

/// Rows for several sources, computed on worker threads; output order
/// follows `sources`.
pub fn sssp_rows(g: &RoadNetwork, sources: &[NodeId]) -> Result<Vec<DistanceRow>> {
    for &s in sources {
        g.check_node(s)?;
    }
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(sources.len().max(1));
    if workers <= 1 || sources.len() < 4 {
        return sources.iter().map(|&s| dijkstra_sssp(g, s)).collect();
    }
    let chunk = sources.len().div_ceil(workers);
    let rows: Vec<Result<Vec<DistanceRow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&s| dijkstra_sssp(g, s)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("dijkstra worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(sources.len());
    for part in rows {
        out.extend(part?);
    }
    Ok(out)
}

/// Exact labeling oracle over one graph, counting single-source runs.
pub struct ExactOracle<'g> {
    g: &'g RoadNetwork,
    runs: AtomicUsize,
}

impl<'g> ExactOracle<'g> {
    pub fn new(g: &'g RoadNetwork) -> Self {
        ExactOracle { g, runs: AtomicUsize::new(0) }
    }

    pub fn sssp_runs(&self) -> usize {
        self.runs.load(AtomicOrdering::Relaxed)
    }

    /// Labels `pairs`, preserving input order.
    ///
    /// Each pair is assigned to whichever endpoint occurs more often across
    /// the batch (ties to the smaller id) and one Dijkstra runs per
    /// distinct assigned source.
    pub fn batch_ground_truth(&self, pairs: &[(NodeId, NodeId)]) -> Result<Vec<GroundTruthSample>> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no pairs to label".into()));
        }
        let mut freq: HashMap<NodeId, usize> = HashMap::new();
        for &(u, v) in pairs {
            self.g.check_node(u)?;
            self.g.check_node(v)?;
            *freq.entry(u).or_default() += 1;
            *freq.entry(v).or_default() += 1;
        }
        let source_of = |u: NodeId, v: NodeId| match freq[&u].cmp(&freq[&v]) {
            Ordering::Greater => u,
            Ordering::Less => v,
            Ordering::Equal => u.min(v),
        };
        let mut sources: Vec<NodeId> = pairs.iter().map(|&(u, v)| source_of(u, v)).collect();
        sources.sort_unstable();
        sources.dedup();
        let rows = sssp_rows(self.g, &sources)?;
        self.runs.fetch_add(rows.len(), AtomicOrdering::Relaxed);
        let slot: HashMap<NodeId, usize> = sources.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        pairs
            .iter()
            .map(|&(u, v)| {
                let s = source_of(u, v);
                let other = if s == u { v } else { u };
                let d = rows[slot[&s]].dist[other];
                if !d.is_finite() {
                    return Err(Error::Disconnected { u, v });
                }
                Ok(GroundTruthSample { u, v, d })
            })
            .collect()
    }
}

pub fn batch_ground_truth(g: &RoadNetwork, pairs: &[(NodeId, NodeId)]) -> Result<Vec<GroundTruthSample>> {
    ExactOracle::new(g).batch_ground_truth(pairs)
}

const SAMPLE_MAGIC: &str = "# distidx-samples v1";

/// Writes `u v d` rows (1-based ids) under a header carrying `graph_hash`.
pub fn write_samples(path: &Path, graph_hash: &str, samples: &[GroundTruthSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SAMPLE_MAGIC} graph={graph_hash} count={}", samples.len())?;
    for s in samples {
        writeln!(w, "{} {} {:?}", s.u + 1, s.v + 1, s.d)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample file, returning the recorded graph hash and the samples.
pub fn read_samples(path: &Path) -> Result<(String, Vec<GroundTruthSample>)> {
    let mut lines = open_text(path)?.lines().enumerate();
    let parse_err = |line: usize, msg: String| Error::Parse { path: PathBuf::from(path), line, msg };
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(parse_err(1, "empty sample file".into())),
    };
    let hash = header
        .strip_prefix(SAMPLE_MAGIC)
        .and_then(|rest| rest.split_whitespace().find_map(|kv| kv.strip_prefix("graph=")))
        .ok_or_else(|| parse_err(1, "missing `distidx-samples` header".into()))?
        .to_owned();
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(i + 1, format!("expected `u v d`, found {} fields", f.len())));
        }
        let id = |s: &str| -> Result<NodeId> {
            let x: usize = s.parse().map_err(|_| parse_err(i + 1, format!("bad node id `{s}`")))?;
            x.checked_sub(1).ok_or_else(|| parse_err(i + 1, "node ids are 1-based".into()))
        };
        let d: f64 = f[2].parse().map_err(|_| parse_err(i + 1, format!("bad distance `{}`", f[2])))?;
        out.push(GroundTruthSample { u: id(f[0])?, v: id(f[1])?, d });
    }
    Ok((hash, out))
}

fn pairs_digest(pairs: &[(NodeId, NodeId)]) -> String {
    let mut h = Sha256::new();
    for &(u, v) in pairs {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    hex_digest(h)
}

/// Ground truth for `pairs`, reusing a cache file in `cache_dir` when its
/// recorded graph hash and pair list match.
pub fn cached_ground_truth(
    g: &RoadNetwork,
    pairs: &[(NodeId, NodeId)],
    cache_dir: Option<&Path>,
) -> Result<Vec<GroundTruthSample>> {
    let Some(dir) = cache_dir else {
        return batch_ground_truth(g, pairs);
    };
    let graph_hash = g.content_hash();
    let name = format!("gt-{}-{}.txt", &graph_hash[..16], &pairs_digest(pairs)[..16]);
    let path = dir.join(name);
    if path.exists() {
        if let Ok((hash, samples)) = read_samples(&path) {
            let same_pairs = samples.len() == pairs.len()
                && samples.iter().zip(pairs).all(|(s, &(u, v))| s.u == u && s.v == v);
            if hash == graph_hash && same_pairs {
                log::info!("reusing ground-truth cache {}", path.display());
                return Ok(samples);
            }
        }
        log::warn!("ignoring stale ground-truth cache {}", path.display());
    }
    let samples = batch_ground_truth(g, pairs)?;
    std::fs::create_dir_all(dir)?;
    write_samples(&path, &graph_hash, &samples)?;
    Ok(samples)
}
