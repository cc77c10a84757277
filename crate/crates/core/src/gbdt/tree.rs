//! Histogram regression trees over quantile-binned features.

use crate::util::par_map;

/// Row-major `rows × cols` feature matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(cols: usize) -> Self {
        FeatureMatrix { rows: 0, cols, data: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "feature row width");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy with `extra[r]` appended to row `r`.
    pub fn with_column(&self, extra: &[f64]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.cols + 1);
        out.data.reserve(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            out.data.extend_from_slice(self.row(r));
            out.data.push(extra[r]);
        }
        out.rows = self.rows;
        out
    }
}

/// Per-feature split candidates at quantiles; `x ≤ cuts[f][b]` sends a row
/// left of candidate `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileBins {
    pub cuts: Vec<Vec<f64>>,
}

impl QuantileBins {
    /// At most `bins − 1` distinct cut values per feature.
    pub fn fit(x: &FeatureMatrix, bins: usize) -> Self {
        assert!((2..=256).contains(&bins), "bins must be in 2..=256");
        let stride = (x.rows / 200_000).max(1);
        let cuts = (0..x.cols)
            .map(|f| {
                let mut col: Vec<f64> = (0..x.rows).step_by(stride).map(|r| x.data[r * x.cols + f]).collect();
                col.sort_by(f64::total_cmp);
                col.dedup();
                if col.len() <= 1 {
                    return Vec::new();
                }
                if col.len() <= bins {
                    // every distinct value but the largest is a cut
                    col.pop();
                    return col;
                }
                let mut c: Vec<f64> = (1..bins).map(|k| col[k * col.len() / bins - 1]).collect();
                c.dedup();
                c
            })
            .collect();
        QuantileBins { cuts }
    }

    /// Column-major bin codes.
    pub fn transform(&self, x: &FeatureMatrix) -> Vec<Vec<u8>> {
        (0..x.cols)
            .map(|f| {
                let c = &self.cuts[f];
                (0..x.rows).map(|r| c.partition_point(|&t| t < x.data[r * x.cols + f]) as u8).collect()
            })
            .collect()
    }
}

pub const LEAF: u32 = u32::MAX;

/// Preorder node: the left child follows its parent directly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeNode {
    /// [`LEAF`] for leaves.
    pub feature: u32,
    pub threshold: f64,
    pub value: f64,
    pub right: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.threshold { i + 1 } else { n.right as usize };
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> (usize, usize) {
            // (depth, index after subtree)
            if nodes[i].feature == LEAF {
                return (0, i + 1);
            }
            let (dl, next) = walk(nodes, i + 1);
            let (dr, end) = walk(nodes, nodes[i].right as usize);
            debug_assert_eq!(next, nodes[i].right as usize);
            (1 + dl.max(dr), end)
        }
        walk(&self.nodes, 0).0
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }

    pub fn is_stump_leaf(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// A tree padded to a complete binary tree of its own depth, stored
/// breadth-first. Padding nodes send everything left and every leaf under
/// a padded subtree carries the original leaf value, so predictions match
/// the preorder tree exactly while every query walks the same number of
/// levels without data-dependent branches.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompleteTree {
    pub depth: usize,
    pub feature: Vec<u32>,
    pub threshold: Vec<f64>,
    pub leaves: Vec<f64>,
}

impl CompleteTree {
    pub fn from_tree(t: &RegressionTree) -> Self {
        let depth = t.depth();
        let internal = (1usize << depth) - 1;
        let mut out = CompleteTree {
            depth,
            feature: vec![0; internal],
            threshold: vec![f64::INFINITY; internal],
            leaves: vec![0.0; 1 << depth],
        };
        // (preorder node, breadth-first slot, level)
        let mut stack = vec![(0usize, 0usize, 0usize)];
        while let Some((i, slot, level)) = stack.pop() {
            let node = &t.nodes[i];
            if node.feature == LEAF {
                let span = 1usize << (depth - level);
                let first = ((slot + 1) << (depth - level)) - 1 - internal;
                out.leaves[first..first + span].fill(node.value);
                continue;
            }
            out.feature[slot] = node.feature;
            out.threshold[slot] = node.threshold;
            stack.push((i + 1, 2 * slot + 1, level + 1));
            stack.push((node.right as usize, 2 * slot + 2, level + 1));
        }
        out
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        for _ in 0..self.depth {
            let go_right = (x[self.feature[i] as usize] > self.threshold[i]) as usize;
            i = 2 * i + 1 + go_right;
        }
        self.leaves[i + 1 - self.leaves.len()]
    }
}

#[derive(Clone, Copy, Debug)]
struct Split {
    feature: usize,
    bin: usize,
    gain: f64,
}

/// Per-feature `(sum, count)` histograms, `cols × nbins`.
#[derive(Clone, Debug)]
struct Hist {
    nbins: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl Hist {
    fn sub(&self, other: &Hist) -> Hist {
        Hist {
            nbins: self.nbins,
            sum: self.sum.iter().zip(&other.sum).map(|(a, b)| a - b).collect(),
            count: self.count.iter().zip(&other.count).map(|(a, b)| a - b).collect(),
        }
    }
}

pub struct TreeFitter<'a> {
    pub binned: &'a [Vec<u8>],
    pub bins: &'a QuantileBins,
    pub max_depth: usize,
    pub min_leaf: usize,
    nbins: usize,
}

impl<'a> TreeFitter<'a> {
    pub fn new(binned: &'a [Vec<u8>], bins: &'a QuantileBins, max_depth: usize) -> Self {
        let nbins = bins.cuts.iter().map(Vec::len).max().unwrap_or(0) + 1;
        TreeFitter { binned, bins, max_depth, min_leaf: 1, nbins }
    }

    fn histogram(&self, rows: &[u32], residual: &[f64]) -> Hist {
        let cols = self.binned.len();
        let nb = self.nbins;
        let feats: Vec<usize> = (0..cols).collect();
        let build = |&f: &usize| {
            let mut sum = vec![0.0; nb];
            let mut count = vec![0u32; nb];
            let col = &self.binned[f];
            for &r in rows {
                let b = col[r as usize] as usize;
                sum[b] += residual[r as usize];
                count[b] += 1;
            }
            (sum, count)
        };
        let parts: Vec<(Vec<f64>, Vec<u32>)> =
            if rows.len() * cols >= 200_000 { par_map(&feats, build) } else { feats.iter().map(build).collect() };
        let mut h = Hist { nbins: nb, sum: Vec::with_capacity(cols * nb), count: Vec::with_capacity(cols * nb) };
        for (s, c) in parts {
            h.sum.extend(s);
            h.count.extend(c);
        }
        h
    }

    /// Highest variance reduction; ties go to the lowest feature, then the
    /// lowest threshold.
    fn best_split(&self, h: &Hist, total: f64, n: usize) -> Option<Split> {
        let parent = total * total / n as f64;
        let mut best: Option<Split> = None;
        for f in 0..self.binned.len() {
            let cands = self.bins.cuts[f].len();
            let (mut sl, mut nl) = (0.0, 0usize);
            for b in 0..cands {
                sl += h.sum[f * h.nbins + b];
                nl += h.count[f * h.nbins + b] as usize;
                let nr = n - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
                if gain > best.map_or(0.0, |s| s.gain) {
                    best = Some(Split { feature: f, bin: b, gain });
                }
            }
        }
        // gains at rounding level come from constant residuals
        best.filter(|s| s.gain > 1e-12 * parent.abs().max(1e-300))
    }

    /// Fits one tree to `residual` over `rows`; `leaf_out[r]` receives the
    /// leaf value of every fitted row.
    pub fn fit(&self, rows: &mut [u32], residual: &[f64], leaf_out: &mut [f64]) -> RegressionTree {
        let mut nodes = Vec::new();
        let h = self.histogram(rows, residual);
        self.grow(rows, residual, 0, h, &mut nodes, leaf_out);
        RegressionTree { nodes }
    }

    fn grow(
        &self,
        rows: &mut [u32],
        residual: &[f64],
        depth: usize,
        h: Hist,
        nodes: &mut Vec<TreeNode>,
        leaf_out: &mut [f64],
    ) {
        let total: f64 = rows.iter().map(|&r| residual[r as usize]).sum();
        let n = rows.len();
        let split = if depth < self.max_depth && n >= 2 * self.min_leaf { self.best_split(&h, total, n) } else { None };
        let Some(s) = split else {
            let value = if n > 0 { total / n as f64 } else { 0.0 };
            for &r in rows.iter() {
                leaf_out[r as usize] = value;
            }
            nodes.push(TreeNode { feature: LEAF, threshold: 0.0, value, right: 0 });
            return;
        };
        let col = &self.binned[s.feature];
        let (mut left, mut right): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| col[r as usize] as usize <= s.bin);
        let nl = left.len();
        rows[..nl].copy_from_slice(&left);
        rows[nl..].copy_from_slice(&right);
        // histogram of the smaller child, the other by subtraction
        let (hl, hr) = if nl <= right.len() {
            let hl = self.histogram(&left, residual);
            let hr = h.sub(&hl);
            (hl, hr)
        } else {
            let hr = self.histogram(&right, residual);
            (h.sub(&hr), hr)
        };
        left.clear();
        right.clear();
        let me = nodes.len();
        nodes.push(TreeNode { feature: s.feature as u32, threshold: self.bins.cuts[s.feature][s.bin], value: 0.0, right: 0 });
        let (lrows, rrows) = rows.split_at_mut(nl);
        self.grow(lrows, residual, depth + 1, hl, nodes, leaf_out);
        nodes[me].right = nodes.len() as u32;
        self.grow(rrows, residual, depth + 1, hr, nodes, leaf_out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(rows[0].len());
        rows.iter().for_each(|r| m.push(r));
        m
    }

    #[test]
    fn bins_cover_distinct_values() {
        let x = matrix(&[vec![1.0], vec![2.0], vec![2.0], vec![3.0]]);
        let b = QuantileBins::fit(&x, 64);
        assert_eq!(b.cuts[0], vec![1.0, 2.0]);
        assert_eq!(b.transform(&x), vec![vec![0, 1, 1, 2]]);
    }

    #[test]
    fn two_cluster_target_is_one_split() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 7) as f64, i as f64]).collect();
        let y: Vec<f64> = (0..100).map(|i| if i < 40 { -3.0 } else { 2.0 }).collect();
        let x = matrix(&rows);
        let bins = QuantileBins::fit(&x, 64);
        let binned = bins.transform(&x);
        let fitter = TreeFitter::new(&binned, &bins, 1);
        let mut idx: Vec<u32> = (0..100).collect();
        let mut leaf = vec![0.0; 100];
        let t = fitter.fit(&mut idx, &y, &mut leaf);
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[0].feature, 1);
        assert!(t.nodes[0].threshold >= 39.0 && t.nodes[0].threshold < 40.0);
        assert_eq!(leaf, y);
        assert_eq!(t.predict(&[0.0, 10.0]), -3.0);
        assert_eq!(t.predict(&[0.0, 90.0]), 2.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn constant_residual_gives_single_leaf() {
        let x = matrix(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let bins = QuantileBins::fit(&x, 8);
        let binned = bins.transform(&x);
        let mut idx: Vec<u32> = (0..20).collect();
        let mut leaf = vec![0.0; 20];
        let t = TreeFitter::new(&binned, &bins, 8).fit(&mut idx, &[0.5; 20], &mut leaf);
        assert!(t.is_stump_leaf());
        assert_eq!(t.nodes[0].value, 0.5);
    }

    #[test]
    fn complete_layout_matches_preorder_walk() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![(i * 37 % 101) as f64, (i % 13) as f64, i as f64]).collect();
        // a ragged target so leaves stop at different depths
        let y: Vec<f64> = rows.iter().map(|r| if r[2] < 50.0 { 1.0 } else { (r[0] * r[1]).sin() * r[2] }).collect();
        let x = matrix(&rows);
        let bins = QuantileBins::fit(&x, 16);
        let binned = bins.transform(&x);
        let mut idx: Vec<u32> = (0..300).collect();
        let mut leaf = vec![0.0; 300];
        let t = TreeFitter::new(&binned, &bins, 5).fit(&mut idx, &y, &mut leaf);
        let c = CompleteTree::from_tree(&t);
        assert_eq!(c.depth, t.depth());
        assert!(t.leaf_count() < c.leaves.len());
        for r in &rows {
            assert_eq!(c.predict(r), t.predict(r));
        }
        let probe = [-1.0, 1e9, 25.5];
        assert_eq!(c.predict(&probe), t.predict(&probe));
    }
}
