//! Road networks: loading, validation, connectivity preprocessing and
//! neighborhood queries.
//!
//! A [`RoadNetwork`] is an undirected weighted graph stored as symmetric CSR
//! adjacency plus a coordinate per node. Node ids are dense `0..n`; the
//! original file ids are kept alongside so results can be written back.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = usize;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub lat: f64,
    pub lon: f64,
}

impl Coordinate {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let c = Coordinate { lat, lon };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Validation(format!(
                "coordinate ({}, {}) outside lat [-90, 90] / lon [-180, 180]",
                self.lat, self.lon
            )));
        }
        Ok(())
    }

    /// Great-circle distance in meters.
    pub fn haversine(&self, other: &Coordinate) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }
}

/// Bidirectional mapping between the node ids of a parent graph and a
/// derived graph (component or induced subgraph).
#[derive(Clone, Debug, Default)]
pub struct IdMap {
    pub old_to_new: Vec<Option<NodeId>>,
    pub new_to_old: Vec<NodeId>,
}

impl IdMap {
    fn from_kept(parent_n: usize, kept: &[NodeId]) -> Self {
        let mut old_to_new = vec![None; parent_n];
        for (new, &old) in kept.iter().enumerate() {
            old_to_new[old] = Some(new);
        }
        IdMap {
            old_to_new,
            new_to_old: kept.to_vec(),
        }
    }

    pub fn to_new(&self, old: NodeId) -> Option<NodeId> {
        self.old_to_new.get(old).copied().flatten()
    }

    pub fn to_old(&self, new: NodeId) -> NodeId {
        self.new_to_old[new]
    }
}

#[derive(Clone, Debug)]
pub struct RoadNetwork {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<f64>,
    coords: Vec<Coordinate>,
    /// Id of each node in the source files.
    original_ids: Vec<i64>,
    pub d_max_hint: Option<f64>,
}

impl RoadNetwork {
    /// Builds a network from coordinates and an undirected edge list.
    ///
    /// Duplicate edges keep the minimum weight; self-loops are dropped.
    pub fn from_edges(coords: Vec<Coordinate>, edges: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        let ids = (0..coords.len() as i64).collect();
        Self::build(coords, ids, edges)
    }

    fn build(coords: Vec<Coordinate>, original_ids: Vec<i64>, edges: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        let n = coords.len();
        for c in &coords {
            c.validate()?;
        }
        let mut dedup: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has non-positive or non-finite weight {w}"
                )));
            }
            if u == v {
                log::warn!("dropping self-loop on node {u}");
                continue;
            }
            let key = (u.min(v), u.max(v));
            dedup
                .entry(key)
                .and_modify(|old| *old = old.min(w))
                .or_insert(w);
        }

        let mut degree = vec![0usize; n];
        for &(u, v) in dedup.keys() {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        // BTreeMap iteration keeps every adjacency list sorted by neighbor id.
        for (&(u, v), &w) in &dedup {
            targets[fill[u]] = v;
            weights[fill[u]] = w;
            fill[u] += 1;
        }
        for (&(u, v), &w) in &dedup {
            targets[fill[v]] = u;
            weights[fill[v]] = w;
            fill[v] += 1;
        }
        for v in 0..n {
            let (s, e) = (offsets[v], offsets[v + 1]);
            let mut row: Vec<(NodeId, f64)> = targets[s..e].iter().copied().zip(weights[s..e].iter().copied()).collect();
            row.sort_by_key(|&(t, _)| t);
            for (i, (t, w)) in row.into_iter().enumerate() {
                targets[s + i] = t;
                weights[s + i] = w;
            }
        }
        Ok(RoadNetwork {
            offsets,
            targets,
            weights,
            coords,
            original_ids,
            d_max_hint: None,
        })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn m(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Neighbor ids of `v`, sorted ascending.
    pub fn neighbor_ids(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn coord(&self, v: NodeId) -> Coordinate {
        self.coords[v]
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn original_id(&self, v: NodeId) -> i64 {
        self.original_ids[v]
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v >= self.n() {
            return Err(Error::NodeOutOfRange { node: v, n: self.n() });
        }
        Ok(())
    }

    /// Each undirected edge once, as `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut out = Vec::with_capacity(self.m());
        for u in 0..self.n() {
            for (v, w) in self.neighbors(u) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn mean_latitude(&self) -> f64 {
        if self.coords.is_empty() {
            return 0.0;
        }
        self.coords.iter().map(|c| c.lat).sum::<f64>() / self.n() as f64
    }

    /// SHA-256 over node count, coordinates and adjacency; hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        for c in &self.coords {
            h.update(c.lat.to_le_bytes());
            h.update(c.lon.to_le_bytes());
        }
        for &o in &self.offsets {
            h.update((o as u64).to_le_bytes());
        }
        for (&t, &w) in self.targets.iter().zip(&self.weights) {
            h.update((t as u64).to_le_bytes());
            h.update(w.to_le_bytes());
        }
        hex_digest(h)
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbor_ids(u) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.components().len() == 1
    }

    /// Writes the network as edge and coordinate files with 1-based ids.
    pub fn write_files(&self, edge_path: &Path, coord_path: &Path) -> Result<()> {
        use std::io::Write;
        let mut e = std::io::BufWriter::new(File::create(edge_path)?);
        writeln!(e, "# u v w (meters), {} nodes {} edges", self.n(), self.m())?;
        for (u, v, w) in self.edges() {
            writeln!(e, "{} {} {:?}", u + 1, v + 1, w)?;
        }
        let mut c = std::io::BufWriter::new(File::create(coord_path)?);
        writeln!(c, "# id lat lon")?;
        for (i, co) in self.coords.iter().enumerate() {
            writeln!(c, "{} {:?} {:?}", i + 1, co.lat, co.lon)?;
        }
        Ok(())
    }
}

pub(crate) fn hex_digest(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

fn data_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in open_text(path)?.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push((i + 1, body.split_whitespace().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: PathBuf::from(path),
        line,
        msg: format!("cannot parse {what} from `{s}`"),
    })
}

/// Loads `u v w` edge lines and `id lat lon` coordinate lines.
///
/// Node ids may be arbitrary integers; they are re-indexed densely in
/// ascending order. Files ending in `.gz` are decompressed.
pub fn load_graph(edge_path: &Path, coord_path: &Path) -> Result<RoadNetwork> {
    let mut by_id: BTreeMap<i64, Coordinate> = BTreeMap::new();
    for (line, f) in data_lines(coord_path)? {
        if f.len() != 3 {
            return Err(Error::Parse {
                path: coord_path.into(),
                line,
                msg: format!("expected `id lat lon`, found {} fields", f.len()),
            });
        }
        let id: i64 = parse_field(coord_path, line, &f[0], "node id")?;
        let lat: f64 = parse_field(coord_path, line, &f[1], "latitude")?;
        let lon: f64 = parse_field(coord_path, line, &f[2], "longitude")?;
        let c = Coordinate { lat, lon };
        c.validate().map_err(|e| Error::Validation(format!("{}: line {line}: {e}", coord_path.display())))?;
        if by_id.insert(id, c).is_some() {
            return Err(Error::Validation(format!(
                "{}: line {line}: duplicate node id {id}",
                coord_path.display()
            )));
        }
    }
    let index: BTreeMap<i64, NodeId> = by_id.keys().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut edges = Vec::new();
    for (line, f) in data_lines(edge_path)? {
        if f.len() != 3 {
            return Err(Error::Parse {
                path: edge_path.into(),
                line,
                msg: format!("expected `u v w`, found {} fields", f.len()),
            });
        }
        let u: i64 = parse_field(edge_path, line, &f[0], "node id")?;
        let v: i64 = parse_field(edge_path, line, &f[1], "node id")?;
        let w: f64 = parse_field(edge_path, line, &f[2], "weight")?;
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Validation(format!(
                "{}: line {line}: edge weight {w} is not positive",
                edge_path.display()
            )));
        }
        let lookup = |id: i64| {
            index.get(&id).copied().ok_or_else(|| {
                Error::Validation(format!("{}: line {line}: unknown node {id}", edge_path.display()))
            })
        };
        edges.push((lookup(u)?, lookup(v)?, w));
    }
    let ids = by_id.keys().copied().collect();
    RoadNetwork::build(by_id.into_values().collect(), ids, &edges)
}

/// Induced subgraph on the largest connected component.
///
/// Ties between equally large components go to the one containing the
/// smallest node id. Surviving nodes keep their relative order.
pub fn largest_connected_component(g: &RoadNetwork) -> Result<(RoadNetwork, IdMap)> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut best: Vec<NodeId> = Vec::new();
    for comp in g.components() {
        if comp.len() > best.len() {
            best = comp;
        }
    }
    induced_subgraph(g, &best)
}

/// Subgraph with exactly the edges whose endpoints both lie in `nodes`.
pub fn induced_subgraph(g: &RoadNetwork, nodes: &[NodeId]) -> Result<(RoadNetwork, IdMap)> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("induced subgraph of an empty node set".into()));
    }
    let mut kept = nodes.to_vec();
    kept.sort_unstable();
    kept.dedup();
    for &v in &kept {
        g.check_node(v)?;
    }
    let map = IdMap::from_kept(g.n(), &kept);
    let mut edges = Vec::new();
    for (new_u, &u) in kept.iter().enumerate() {
        for (v, w) in g.neighbors(u) {
            if let Some(new_v) = map.to_new(v) {
                if new_u < new_v {
                    edges.push((new_u, new_v, w));
                }
            }
        }
    }
    let coords = kept.iter().map(|&v| g.coords[v]).collect();
    let ids = kept.iter().map(|&v| g.original_ids[v]).collect();
    let mut sub = RoadNetwork::build(coords, ids, &edges)?;
    sub.d_max_hint = g.d_max_hint;
    Ok((sub, map))
}

/// Node closest to `c` by great-circle distance; ties go to the smallest id.
pub fn nearest_vertex(g: &RoadNetwork, c: Coordinate) -> NodeId {
    let mut best = (f64::INFINITY, 0);
    for (v, vc) in g.coords.iter().enumerate() {
        let d = c.haversine(vc);
        if d < best.0 {
            best = (d, v);
        }
    }
    best.1
}

/// All nodes within `k` edges of `v`, including `v`, sorted ascending.
pub fn k_hop_neighborhood(g: &RoadNetwork, v: NodeId, k: usize) -> Vec<NodeId> {
    k_hop_union(g, &[v], k)
}

/// Union of the `k`-hop neighborhoods of `sources`, sorted ascending.
pub fn k_hop_union(g: &RoadNetwork, sources: &[NodeId], k: usize) -> Vec<NodeId> {
    let mut depth = vec![usize::MAX; g.n()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if depth[s] == usize::MAX {
            depth[s] = 0;
            queue.push_back(s);
        }
    }
    let mut out = Vec::new();
    while let Some(u) = queue.pop_front() {
        out.push(u);
        if depth[u] == k {
            continue;
        }
        for &w in g.neighbor_ids(u) {
            if depth[w] == usize::MAX {
                depth[w] = depth[u] + 1;
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    out
}
