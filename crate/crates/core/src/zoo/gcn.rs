//! Graph convolution encoder `H_i = σ(Â H_{i−1} W_i + b_i)` with manual
//! backprop, and L-hop subgraph minibatching.
//!
//! `Â = D^{-1/2}(A + I)D^{-1/2}` is unweighted. Subgraph operators keep the
//! degrees of the full graph, so every node within `L − 1` hops of a batch
//! endpoint sees exactly the rows of `Â` it would see in the full graph.
//! That makes batch outputs, and hence batch gradients, equal to the
//! full-graph ones.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{k_hop_union, NodeId, RoadNetwork};
use crate::nn::init::{fill, Init};
use crate::nn::mlp::Activation;
use crate::nn::DenseMatrix;

/// Sparse symmetric propagation operator over a node subset.
#[derive(Clone, Debug)]
pub struct NormAdjacency {
    /// Global ids of the local rows.
    pub nodes: Vec<NodeId>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormAdjacency {
    pub fn full(g: &RoadNetwork) -> Self {
        let all: Vec<NodeId> = (0..g.n()).collect();
        Self::restricted(g, &all)
    }

    /// `Â` restricted to `nodes` (sorted ascending), full-graph degrees.
    pub fn restricted(g: &RoadNetwork, nodes: &[NodeId]) -> Self {
        let mut local = vec![usize::MAX; g.n()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let inv_sqrt = |v: NodeId| 1.0 / ((g.degree(v) + 1) as f64).sqrt();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &v in nodes {
            // self loop and neighbors in ascending global order
            let mut entries: Vec<NodeId> = g.neighbor_ids(v).to_vec();
            entries.push(v);
            entries.sort_unstable();
            for u in entries {
                if local[u] != usize::MAX {
                    cols.push(local[u]);
                    vals.push(inv_sqrt(v) * inv_sqrt(u));
                }
            }
            offsets.push(cols.len());
        }
        NormAdjacency { nodes: nodes.to_vec(), offsets, cols, vals }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Â · h`
    pub fn propagate(&self, h: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.len(), h.cols);
        for r in 0..self.len() {
            let o = out.row_mut(r);
            for k in self.offsets[r]..self.offsets[r + 1] {
                crate::nn::matrix::axpy(self.vals[k], h.row(self.cols[k]), o);
            }
        }
        out
    }

    pub fn dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.len(), self.len());
        for r in 0..self.len() {
            for k in self.offsets[r]..self.offsets[r + 1] {
                m.data[r * self.len() + self.cols[k]] = self.vals[k];
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    pub w: DenseMatrix,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gcn {
    pub layers: Vec<GcnLayer>,
    /// Applied after every layer but the last, which is linear.
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct GcnTape {
    /// `Â H_{i−1}` per layer.
    aggregated: Vec<DenseMatrix>,
    pre: Vec<DenseMatrix>,
}

#[derive(Clone, Debug)]
pub struct GcnGrads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl GcnGrads {
    pub fn flat(&self) -> Vec<&[f64]> {
        self.w.iter().zip(&self.b).flat_map(|(w, b)| [&w[..], &b[..]]).collect()
    }
}

impl Gcn {
    /// `widths = [in, hidden…, out]`.
    pub fn new<R: Rng>(widths: &[usize], activation: Activation, rng: &mut R) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| {
                let mut m = DenseMatrix::zeros(w[0], w[1]);
                fill(Init::XavierUniform, w[0], w[1], &mut m.data, rng);
                GcnLayer { w: m, b: vec![0.0; w[1]] }
            })
            .collect();
        Gcn { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.cols
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum()
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| [(format!("gcn{i}.weight"), &mut l.w.data[..]), (format!("gcn{i}.bias"), &mut l.b[..])])
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [&l.w.data[..], &l.b[..]]).collect()
    }

    pub fn forward(&self, adj: &NormAdjacency, x: &DenseMatrix) -> Result<(DenseMatrix, GcnTape)> {
        if x.rows != adj.len() || x.cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "gcn input {}x{} for {} nodes and input width {}",
                x.rows,
                x.cols,
                adj.len(),
                self.input_dim()
            )));
        }
        let mut aggregated = Vec::new();
        let mut pre = Vec::new();
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let a = adj.propagate(&h);
            let mut z = a.matmul(&l.w);
            z.add_row_vector(&l.b);
            h = z.clone();
            if i != last {
                h.data.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            aggregated.push(a);
            pre.push(z);
        }
        Ok((h, GcnTape { aggregated, pre }))
    }

    /// Gradients of `⟨upstream, H_out⟩`.
    pub fn backward(&self, adj: &NormAdjacency, tape: &GcnTape, upstream: &DenseMatrix) -> GcnGrads {
        let last = self.layers.len() - 1;
        let mut delta = upstream.clone();
        let mut w = vec![Vec::new(); self.layers.len()];
        let mut b = vec![Vec::new(); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            if i != last {
                for (g, &z) in delta.data.iter_mut().zip(&tape.pre[i].data) {
                    *g *= self.activation.derivative(z);
                }
            }
            w[i] = tape.aggregated[i].t_matmul(&delta).data;
            b[i] = delta.column_sums();
            if i > 0 {
                // Â is symmetric, so Âᵀ = Â
                delta = adj.propagate(&delta.matmul_t(&self.layers[i].w));
            }
        }
        GcnGrads { w, b }
    }

    /// Full-graph inference over every node, `n × out`.
    pub fn encode_all(&self, g: &RoadNetwork, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.forward(&NormAdjacency::full(g), x)?.0)
    }
}

/// Local view for a batch: the L-hop union of the endpoints, its operator,
/// and the local row of every endpoint.
#[derive(Clone, Debug)]
pub struct BatchSubgraph {
    pub adj: NormAdjacency,
    pub features: DenseMatrix,
    pub local: Vec<usize>,
}

impl BatchSubgraph {
    pub fn new(g: &RoadNetwork, x: &DenseMatrix, endpoints: &[NodeId], hops: usize) -> Self {
        let nodes = k_hop_union(g, endpoints, hops);
        let adj = NormAdjacency::restricted(g, &nodes);
        let mut pos = vec![usize::MAX; g.n()];
        for (i, &v) in nodes.iter().enumerate() {
            pos[v] = i;
        }
        let mut features = DenseMatrix::zeros(nodes.len(), x.cols);
        for (i, &v) in nodes.iter().enumerate() {
            features.row_mut(i).copy_from_slice(x.row(v));
        }
        let local = endpoints.iter().map(|&v| pos[v]).collect();
        BatchSubgraph { adj, features, local }
    }
}

/// Gradients of `Σ_r upstream_r · f(h_{u_r}, h_{v_r})` where the caller
/// supplies `∂/∂h` for each endpoint row. `endpoint_grads[i]` belongs to
/// `endpoints[i]`.
pub fn gcn_minibatch_grads(
    gcn: &Gcn,
    g: &RoadNetwork,
    x: &DenseMatrix,
    endpoints: &[NodeId],
    endpoint_grads: impl Fn(&DenseMatrix, &[usize]) -> DenseMatrix,
) -> Result<GcnGrads> {
    let sub = BatchSubgraph::new(g, x, endpoints, gcn.layers.len());
    let (h, tape) = gcn.forward(&sub.adj, &sub.features)?;
    let upstream = endpoint_grads(&h, &sub.local);
    Ok(gcn.backward(&sub.adj, &tape, &upstream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Coordinate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, edges: &[(usize, usize)]) -> RoadNetwork {
        let coords = (0..n).map(|i| Coordinate { lat: 0.0, lon: i as f64 * 1e-3 }).collect();
        let e: Vec<_> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        RoadNetwork::from_edges(coords, &e).unwrap()
    }

    #[test]
    fn edgeless_graph_is_per_node_layer() {
        let g = graph(3, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gcn = Gcn::new(&[2, 4], Activation::LeakyRelu, &mut rng);
        let x = DenseMatrix::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0]).unwrap();
        let (h, _) = gcn.forward(&NormAdjacency::full(&g), &x).unwrap();
        let mut want = x.matmul(&gcn.layers[0].w);
        want.add_row_vector(&gcn.layers[0].b);
        assert_eq!(h, want);
    }

    #[test]
    fn symmetric_pair_gets_equal_embeddings() {
        let g = graph(2, &[(0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gcn = Gcn::new(&[2, 8, 3], Activation::LeakyRelu, &mut rng);
        let x = DenseMatrix::from_vec(2, 2, vec![0.3, -0.7, 0.3, -0.7]).unwrap();
        let (h, _) = gcn.forward(&NormAdjacency::full(&g), &x).unwrap();
        assert_eq!(h.row(0), h.row(1));
    }

    #[test]
    fn path_subgraph_is_small() {
        let edges: Vec<_> = (0..199).map(|i| (i, i + 1)).collect();
        let g = graph(200, &edges);
        let x = DenseMatrix::zeros(200, 2);
        let sub = BatchSubgraph::new(&g, &x, &[50, 120], 2);
        assert_eq!(sub.adj.len(), 10);
        let one = BatchSubgraph::new(&g, &x, &[100], 2);
        assert!(one.adj.len() <= 10);
    }
}
