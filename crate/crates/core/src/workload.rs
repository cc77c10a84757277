//! Query dataset construction: workload-driven pairs from trip records,
//! synthetic all-pairs and landmark pairs, landmark selection, and the
//! train/test split.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, sq_dist};
use crate::error::{Error, Result};
use crate::graph::{k_hop_neighborhood, nearest_vertex, open_text, Coordinate, NodeId, RoadNetwork};
use crate::oracle::GroundTruthSample;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub origin: Coordinate,
    pub destination: Coordinate,
}

pub type QueryPair = (NodeId, NodeId);

#[inline]
pub fn canonical((u, v): QueryPair) -> QueryPair {
    (u.min(v), u.max(v))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryDataset {
    pub samples: Vec<GroundTruthSample>,
    pub d_max: f64,
}

impl QueryDataset {
    pub fn new(samples: Vec<GroundTruthSample>) -> Self {
        let d_max = samples.iter().map(|s| s.d).fold(0.0, f64::max);
        QueryDataset { samples, d_max }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pairs(&self) -> Vec<QueryPair> {
        self.samples.iter().map(|s| (s.u, s.v)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: QueryDataset,
    pub test: QueryDataset,
    pub seed: u64,
}

impl SplitDataset {
    /// Scaling constant shared by every model: the largest train label.
    pub fn d_max(&self) -> f64 {
        self.train.d_max
    }
}

#[derive(Debug, Deserialize)]
struct TripRow {
    o_lat: f64,
    o_lon: f64,
    d_lat: f64,
    d_lon: f64,
}

/// Reads a CSV with columns `o_lat,o_lon,d_lat,d_lon`; other columns are
/// ignored. `.gz` input is decompressed.
pub fn load_trips(path: &Path) -> Result<Vec<TripRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open_text(path)?);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: TripRow = row?;
        out.push(TripRecord {
            origin: Coordinate::new(row.o_lat, row.o_lon)?,
            destination: Coordinate::new(row.d_lat, row.d_lon)?,
        });
    }
    Ok(out)
}

/// Workload-driven query pairs.
///
/// Trip endpoints are snapped to their nearest vertices and deduplicated
/// (canonical `u < v`, self pairs dropped). The set is then grown to
/// `target` by picking a base pair uniformly and replacing each endpoint
/// with a uniform member of its `hops`-hop neighborhood. If the trips
/// alone exceed `target`, a seeded uniform subset is returned.
pub fn workload_queries(
    g: &RoadNetwork,
    trips: &[TripRecord],
    target: usize,
    hops: usize,
    seed: u64,
) -> Result<Vec<QueryPair>> {
    if trips.is_empty() {
        return Err(Error::InvalidArgument("no trip records".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut base = Vec::new();
    for t in trips {
        let p = canonical((nearest_vertex(g, t.origin), nearest_vertex(g, t.destination)));
        if p.0 != p.1 && seen.insert(p) {
            base.push(p);
        }
    }
    if base.is_empty() {
        return Err(Error::WorkloadTarget { achieved: 0, target });
    }
    if base.len() >= target {
        let keep = index::sample(&mut rng, base.len(), target).into_vec();
        let mut keep = keep;
        keep.sort_unstable();
        return Ok(keep.into_iter().map(|i| base[i]).collect());
    }

    let mut hood: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut out = base.clone();
    let max_attempts = 10 * target;
    let mut attempts = 0;
    while out.len() < target && attempts < max_attempts {
        attempts += 1;
        let (bu, bv) = base[rng.random_range(0..base.len())];
        let hu = hood.entry(bu).or_insert_with(|| k_hop_neighborhood(g, bu, hops));
        let u = hu[rng.random_range(0..hu.len())];
        let hv = hood.entry(bv).or_insert_with(|| k_hop_neighborhood(g, bv, hops));
        let v = hv[rng.random_range(0..hv.len())];
        let p = canonical((u, v));
        if p.0 != p.1 && seen.insert(p) {
            out.push(p);
        }
    }
    if out.len() < target {
        return Err(Error::WorkloadTarget { achieved: out.len(), target });
    }
    Ok(out)
}

/// Every unordered pair `u < v`, provided at most `budget` pairs result.
pub fn sample_all_pairs(g: &RoadNetwork, budget: u64) -> Result<Vec<QueryPair>> {
    let n = g.n() as u64;
    let count = n * n.saturating_sub(1) / 2;
    if count > budget {
        return Err(Error::AllPairsBudget { pairs: count, budget });
    }
    let mut out = Vec::with_capacity(count as usize);
    for u in 0..g.n() {
        for v in u + 1..g.n() {
            out.push((u, v));
        }
    }
    Ok(out)
}

/// `count` distinct unordered pairs `u < v`, uniform without replacement,
/// in ascending order; every pair when `count` reaches `n(n−1)/2`.
pub fn sample_random_pairs(g: &RoadNetwork, count: usize, seed: u64) -> Result<Vec<QueryPair>> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes for query pairs".into()));
    }
    let total = (n as u64) * (n as u64 - 1) / 2;
    if count as u64 >= total {
        return sample_all_pairs(g, total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count);
    while seen.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            seen.insert(canonical((u, v)));
        }
    }
    let mut out: Vec<QueryPair> = seen.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkStrategy {
    Random,
    Kmeans,
}

/// Picks `l` distinct landmarks from `candidates` (all nodes when `None`).
///
/// `Kmeans` clusters candidate coordinates in Euclidean lat/lon space and
/// takes the candidate nearest each centroid; collisions are refilled with
/// random unused candidates.
pub fn select_landmarks(
    g: &RoadNetwork,
    l: usize,
    strategy: LandmarkStrategy,
    candidates: Option<&[NodeId]>,
    seed: u64,
) -> Result<Vec<NodeId>> {
    let all: Vec<NodeId>;
    let cands = match candidates {
        Some(c) => {
            let mut c = c.to_vec();
            c.sort_unstable();
            c.dedup();
            all = c;
            &all[..]
        }
        None => {
            all = (0..g.n()).collect();
            &all[..]
        }
    };
    if l > cands.len() {
        return Err(Error::InvalidArgument(format!(
            "{l} landmarks requested from {} candidates",
            cands.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if l == 0 {
        return Ok(Vec::new());
    }
    match strategy {
        LandmarkStrategy::Random => Ok(index::sample(&mut rng, cands.len(), l)
            .into_iter()
            .map(|i| cands[i])
            .collect()),
        LandmarkStrategy::Kmeans => {
            let pts: Vec<[f64; 2]> = cands.iter().map(|&v| [g.coord(v).lat, g.coord(v).lon]).collect();
            let km = kmeans(&pts, l, 100, &mut rng);
            let mut used = HashSet::new();
            let mut out = Vec::with_capacity(l);
            for c in &km.centers {
                let mut best = (f64::INFINITY, 0);
                for (i, &p) in pts.iter().enumerate() {
                    let d = sq_dist(p, *c);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                if used.insert(cands[best.1]) {
                    out.push(cands[best.1]);
                }
            }
            if out.len() < l {
                let mut rest: Vec<NodeId> = cands.iter().copied().filter(|v| !used.contains(v)).collect();
                rest.shuffle(&mut rng);
                out.extend(rest.into_iter().take(l - out.len()));
            }
            Ok(out)
        }
    }
}

/// `(v, landmark)` for every node `v` and landmark, skipping `v == landmark`.
pub fn sample_landmark_pairs(g: &RoadNetwork, landmarks: &[NodeId]) -> Vec<QueryPair> {
    let mut out = Vec::with_capacity(g.n() * landmarks.len());
    for &l in landmarks {
        for v in 0..g.n() {
            if v != l {
                out.push((v, l));
            }
        }
    }
    out
}

/// Seeded uniform shuffle followed by a prefix split at `ratio`.
pub fn split_train_test(samples: &[GroundTruthSample], ratio: f64, seed: u64) -> Result<SplitDataset> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples to split".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut shuffled = samples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((samples.len() as f64 * ratio).round() as usize).clamp(1, samples.len() - 1);
    let test = shuffled.split_off(cut);
    Ok(SplitDataset {
        train: QueryDataset::new(shuffled),
        test: QueryDataset::new(test),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{perturbed_grid, GridSpec};

    fn line(n: usize) -> RoadNetwork {
        let coords = (0..n).map(|i| Coordinate { lat: 0.0, lon: i as f64 * 0.01 }).collect();
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        RoadNetwork::from_edges(coords, &edges).unwrap()
    }

    fn trip(g: &RoadNetwork, a: NodeId, b: NodeId) -> TripRecord {
        TripRecord { origin: g.coord(a), destination: g.coord(b) }
    }

    #[test]
    fn trips_without_augmentation() {
        let g = line(10);
        let trips = [trip(&g, 1, 5), trip(&g, 7, 2), trip(&g, 5, 1), trip(&g, 3, 3)];
        let q = workload_queries(&g, &trips, 2, 0, 1).unwrap();
        assert_eq!(q, vec![(1, 5), (2, 7)]);
    }

    #[test]
    fn augmentation_stays_in_hop_sets() {
        let g = perturbed_grid(&GridSpec { rows: 10, cols: 10, ..Default::default() }, 4);
        let trips = [trip(&g, 0, 99), trip(&g, 12, 57)];
        let q = workload_queries(&g, &trips, 60, 2, 7).unwrap();
        assert_eq!(q.len(), 60);
        assert_eq!(q.iter().copied().collect::<HashSet<_>>().len(), 60);
        let bases = [(0, 99), (12, 57)];
        for &(u, v) in &q {
            assert!(u < v);
            let ok = bases.iter().any(|&(a, b)| {
                let (ha, hb) = (k_hop_neighborhood(&g, a, 2), k_hop_neighborhood(&g, b, 2));
                (ha.contains(&u) && hb.contains(&v)) || (ha.contains(&v) && hb.contains(&u))
            });
            assert!(ok, "({u}, {v}) not reachable from any base pair");
        }
        assert_eq!(q, workload_queries(&g, &trips, 60, 2, 7).unwrap());
    }

    #[test]
    fn unreachable_target_reports_count() {
        let g = line(3);
        let trips = [trip(&g, 0, 2)];
        match workload_queries(&g, &trips, 50, 1, 0) {
            Err(Error::WorkloadTarget { achieved, target }) => {
                assert_eq!(target, 50);
                assert_eq!(achieved, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_pairs_counts() {
        assert_eq!(sample_all_pairs(&line(3), u64::MAX).unwrap().len(), 3);
        assert_eq!(sample_all_pairs(&line(100), u64::MAX).unwrap().len(), 4950);
        assert!(matches!(sample_all_pairs(&line(1000), 100), Err(Error::AllPairsBudget { pairs: 499500, .. })));
    }

    #[test]
    fn landmark_pairs() {
        let g = line(4);
        assert_eq!(sample_landmark_pairs(&g, &[0]), vec![(1, 0), (2, 0), (3, 0)]);
    }

    #[test]
    fn landmark_selection() {
        let g = line(20);
        let cands = [3, 4, 5];
        let mut all = select_landmarks(&g, 3, LandmarkStrategy::Random, Some(&cands), 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![3, 4, 5]);
        let km = select_landmarks(&g, 3, LandmarkStrategy::Kmeans, Some(&cands), 1).unwrap();
        assert_eq!(km.len(), 3);
        assert!(select_landmarks(&g, 4, LandmarkStrategy::Random, Some(&cands), 1).is_err());
        let r = select_landmarks(&g, 10, LandmarkStrategy::Random, None, 5).unwrap();
        assert_eq!(r.iter().collect::<HashSet<_>>().len(), 10);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s: Vec<_> = (0..10).map(|i| GroundTruthSample { u: i, v: i + 1, d: i as f64 + 1.0 }).collect();
        let a = split_train_test(&s, 0.8, 3).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (8, 2));
        assert_eq!(a, split_train_test(&s, 0.8, 3).unwrap());
        assert_eq!(a.train.d_max, a.train.samples.iter().map(|s| s.d).fold(0.0, f64::max));
        assert!(split_train_test(&s[..1], 0.8, 3).is_err());
        assert!(split_train_test(&s, 1.0, 3).is_err());
    }
}
