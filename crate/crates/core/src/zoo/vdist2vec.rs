//! Vdist2vec extras: the adaptive Huber threshold and opt-in cluster-based
//! scaling.
//!
//! With cluster scaling a query is answered through the centers of the two
//! endpoint clusters, `λ1·m(u, c_u) + D[c_u][c_v] + λ2·m(v, c_v)`, where `m`
//! is the learned model and `D` the exact center-to-center table.

use rand_chacha::ChaCha8Rng;

use super::model::{DistanceModel, Decoder, QueryScratch};
use super::train::{fused_inputs, scatter_table_grads, Labeled, Stepper, TableOpt, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoadNetwork};
use crate::nn::adam::AdamState;
use crate::nn::loss::LossKind;
use crate::oracle::sssp_rows;
use crate::util::derive_seed;
use crate::workload::{select_landmarks, LandmarkStrategy};

/// 99th-percentile absolute residual: the smallest value with fewer than
/// 1% of residuals strictly above it, so 1..=100 gives 100.
pub fn vdist2vec_adaptive_delta(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let mut r: Vec<f64> = residuals.iter().map(|x| x.abs()).collect();
    r.sort_by(f64::total_cmp);
    let rank = ((0.99 * r.len() as f64).floor() as usize + 1).min(r.len());
    r[rank - 1]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterScaling {
    pub centers: Vec<NodeId>,
    /// Cluster index of every node.
    pub assign: Vec<usize>,
    /// `k × k` exact center distances in meters.
    pub center_dist: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ClusterScaling {
    /// Picks `k` centers by k-means on coordinates and assigns every node
    /// to its nearest center by network distance. Also returns each node's
    /// exact distance to its center.
    pub fn build(g: &RoadNetwork, k: usize, seed: u64) -> Result<(Self, Vec<f64>)> {
        if k == 0 || k > g.n() {
            return Err(Error::InvalidArgument(format!("cluster count {k} for {} nodes", g.n())));
        }
        let centers = select_landmarks(g, k, LandmarkStrategy::Kmeans, None, derive_seed(seed, 0xc1))?;
        let rows = sssp_rows(g, &centers)?;
        let mut assign = vec![0; g.n()];
        let mut self_dist = vec![f64::INFINITY; g.n()];
        for (c, r) in rows.iter().enumerate() {
            for (v, &d) in r.dist.iter().enumerate() {
                if d < self_dist[v] {
                    self_dist[v] = d;
                    assign[v] = c;
                }
            }
        }
        if let Some(v) = self_dist.iter().position(|d| !d.is_finite()) {
            return Err(Error::Disconnected { u: centers[0], v });
        }
        let center_dist = rows.iter().flat_map(|r| centers.iter().map(|&c| r.dist[c])).collect();
        Ok((ClusterScaling { centers, assign, center_dist, lambda1: 1.0, lambda2: 1.0 }, self_dist))
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Estimate in meters.
    pub fn predict(&self, model: &DistanceModel, u: NodeId, v: NodeId, s: &mut QueryScratch) -> f64 {
        let (cu, cv) = (self.assign[u], self.assign[v]);
        let a = model.raw(u, self.centers[cu], s);
        let b = model.raw(v, self.centers[cv], s);
        crate::opcount::add(5);
        model.label_scale * (self.lambda1 * a + self.lambda2 * b) + self.center_dist[cu * self.k() + cv]
    }
}

/// Joint training of the MLP, the optional table and `λ1, λ2` on the
/// composite estimate, plus auxiliary losses on the node-to-center legs.
pub(crate) struct ClusterTrainer {
    adam: AdamState,
    base_lr: f64,
    lambdas: AdamState,
    table: Option<TableOpt>,
    loss: LossKind,
    self_dist: Vec<f64>,
}

impl ClusterTrainer {
    pub fn new(model: &mut DistanceModel, g: &RoadNetwork, k: usize, cfg: &TrainConfig) -> Result<Self> {
        let (cs, self_dist) = ClusterScaling::build(g, k, cfg.seed)?;
        model.cluster = Some(cs);
        let Decoder::Mlp(m) = &model.decoder else {
            return Err(Error::InvalidArgument("cluster scaling needs an MLP decoder".into()));
        };
        let sizes: Vec<usize> = m.params().iter().map(|p| p.len()).collect();
        Ok(ClusterTrainer {
            adam: AdamState::new(&sizes, cfg.lr),
            base_lr: cfg.lr,
            lambdas: AdamState::new(&[1, 1], cfg.lr),
            table: TableOpt::for_model(model, cfg.lr),
            loss: cfg.loss,
            self_dist,
        })
    }
}

impl Stepper for ClusterTrainer {
    fn set_lr_scale(&mut self, scale: f64) {
        self.adam.lr = self.base_lr * scale;
        self.lambdas.lr = self.base_lr * scale;
        if let Some(t) = &mut self.table {
            t.adam.lr = t.base_lr * scale;
        }
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], _rng: &mut ChaCha8Rng) -> Result<f64> {
        let cs = model.cluster.clone().expect("cluster installed");
        let b = batch.len();
        let k = cs.k();
        let scale = model.label_scale;
        let mut pairs = Vec::with_capacity(2 * b);
        pairs.extend(batch.iter().map(|s| (s.u, cs.centers[cs.assign[s.u]])));
        pairs.extend(batch.iter().map(|s| (s.v, cs.centers[cs.assign[s.v]])));
        let x = fused_inputs(model, &pairs);
        let Decoder::Mlp(mlp) = &model.decoder else { unreachable!() };
        let (out, tape) = mlp.forward(&x, None)?;
        let inv = 1.0 / b as f64;
        let mut up = vec![0.0; 2 * b];
        let (mut g1, mut g2) = (0.0, 0.0);
        let mut total = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let (a, bb) = (out[i], out[b + i]);
            let dc = cs.center_dist[cs.assign[s.u] * k + cs.assign[s.v]] / scale;
            let r = cs.lambda1 * a + dc + cs.lambda2 * bb - s.y;
            let ra = a - self.self_dist[s.u] / scale;
            let rb = bb - self.self_dist[s.v] / scale;
            total += self.loss.value(r) + self.loss.value(ra) + self.loss.value(rb);
            let g = self.loss.derivative(r) * inv;
            up[i] = g * cs.lambda1 + self.loss.derivative(ra) * inv;
            up[b + i] = g * cs.lambda2 + self.loss.derivative(rb) * inv;
            g1 += g * a;
            g2 += g * bb;
        }
        let grads = mlp.backward(&tape, &up)?;
        if let Some(t) = &mut self.table {
            scatter_table_grads(model, &pairs, &grads.input, &mut t.grad);
        }
        let Decoder::Mlp(mlp) = &mut model.decoder else { unreachable!() };
        self.adam.step(&mut mlp.params_mut(), &grads.flat())?;
        let c = model.cluster.as_mut().unwrap();
        let (mut l1, mut l2) = ([c.lambda1], [c.lambda2]);
        self.lambdas.step(&mut [("lambda1".into(), &mut l1[..]), ("lambda2".into(), &mut l2[..])], &[&[g1], &[g2]])?;
        c.lambda1 = l1[0];
        c.lambda2 = l2[0];
        if let Some(t) = &mut self.table {
            t.apply(model)?;
        }
        Ok(total * inv)
    }
}
