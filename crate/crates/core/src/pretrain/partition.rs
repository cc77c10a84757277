//! Coarse-to-fine partition hierarchy by recursive balanced k-means on node
//! coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::{balanced_kmeans, Point};
use crate::graph::{NodeId, RoadNetwork};
use crate::nn::DenseMatrix;
use crate::util::derive_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionTree {
    /// `levels[k][v]` is the partition of node `v` at level `k`, coarse to
    /// fine. The last level is the identity.
    pub levels: Vec<Vec<usize>>,
    pub counts: Vec<usize>,
    /// One `counts[k] × d` table per level.
    pub tables: Vec<DenseMatrix>,
}

impl PartitionTree {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.tables.first().map_or(0, |t| t.cols)
    }

    pub fn n(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    /// Replaces the tables with zeros of width `d`.
    pub fn reset_tables(&mut self, d: usize) {
        self.tables = self.counts.iter().map(|&c| DenseMatrix::zeros(c, d)).collect();
    }

    /// Sum of `v`'s partition vectors over `levels[..upto]`.
    pub fn aggregate_into(&self, v: NodeId, upto: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..upto {
            let row = self.tables[k].row(self.levels[k][v]);
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
    }

    /// Aggregated `n × d` table over every level.
    pub fn aggregate_all(&self) -> DenseMatrix {
        let d = self.dim();
        let mut out = DenseMatrix::zeros(self.n(), d);
        for v in 0..self.n() {
            self.aggregate_into(v, self.level_count(), out.row_mut(v));
        }
        out
    }

    /// Whether every level refines the previous one.
    pub fn is_refinement(&self) -> bool {
        for k in 1..self.levels.len() {
            let mut parent = vec![usize::MAX; self.counts[k]];
            for v in 0..self.n() {
                let (c, p) = (self.levels[k][v], self.levels[k - 1][v]);
                if parent[c] == usize::MAX {
                    parent[c] = p;
                } else if parent[c] != p {
                    return false;
                }
            }
        }
        true
    }
}

/// Elementwise sum of `v`'s partition embedding at every level.
pub fn aggregate_rne_embedding(tree: &PartitionTree, v: NodeId) -> Vec<f64> {
    let mut out = vec![0.0; tree.dim()];
    tree.aggregate_into(v, tree.level_count(), &mut out);
    out
}

/// Total level count (identity included) for `n` nodes: `⌈log_b n⌉`
/// clamped to 2..=5, i.e. at most four intermediate levels.
pub fn rne_level_count(n: usize, branching: usize) -> usize {
    let mut levels = 0;
    let mut cap = 1usize;
    while cap < n {
        cap = cap.saturating_mul(branching);
        levels += 1;
    }
    // the split that reaches n singletons is the identity itself
    levels.clamp(2, 5)
}

fn local_points(g: &RoadNetwork) -> Vec<Point> {
    let k = g.mean_latitude().to_radians().cos();
    g.coords().iter().map(|c| [c.lat, c.lon * k]).collect()
}

/// `levels` counts every level including the trailing identity level, so
/// `levels = 2` gives one level of `branching` parts plus the identity.
/// Empty partition tables of width 0 are allocated; see
/// [`PartitionTree::reset_tables`].
pub fn hierarchical_partition(g: &RoadNetwork, levels: usize, branching: usize, seed: u64) -> PartitionTree {
    assert!(branching >= 2, "branching must be at least 2");
    assert!(levels >= 2, "need at least one level above the identity");
    let n = g.n();
    let pts = local_points(g);
    let mut out_levels: Vec<Vec<usize>> = Vec::new();
    let mut counts = Vec::new();
    let mut groups: Vec<Vec<NodeId>> = vec![(0..n).collect()];
    for level in 0..levels - 1 {
        let mut assign = vec![0; n];
        let mut next_groups = Vec::new();
        for (gi, members) in groups.iter().enumerate() {
            let k = branching.min(members.len());
            if k <= 1 {
                for &v in members {
                    assign[v] = next_groups.len();
                }
                next_groups.push(members.clone());
                continue;
            }
            let sub: Vec<Point> = members.iter().map(|&v| pts[v]).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ((level as u64) << 40) | gi as u64));
            let km = balanced_kmeans(&sub, k, 10, &mut rng);
            let base = next_groups.len();
            let mut children = vec![Vec::new(); k];
            for (i, &v) in members.iter().enumerate() {
                children[km.assign[i]].push(v);
            }
            for (c, ch) in children.into_iter().enumerate() {
                for &v in &ch {
                    assign[v] = base + c;
                }
                next_groups.push(ch);
            }
        }
        counts.push(next_groups.len());
        out_levels.push(assign);
        groups = next_groups;
    }
    out_levels.push((0..n).collect());
    counts.push(n);
    let tables = counts.iter().map(|&c| DenseMatrix::zeros(c, 0)).collect();
    PartitionTree { levels: out_levels, counts, tables }
}
