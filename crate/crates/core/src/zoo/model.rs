//! Encoder, fusion and decoder assembly into a queryable [`DistanceModel`],
//! with checkpoint serialization.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::decoder::{decode_inverse_dot, decode_l1, decode_landmark_min, ManhattanScale};
use super::fusion::FusionOp;
use super::gcn::{Gcn, GcnLayer};
use super::train::TrainConfig;
use super::vdist2vec::ClusterScaling;
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoadNetwork};
use crate::nn::checkpoint::{Checkpoint, Tensor, TensorData};
use crate::nn::mlp::{Activation, Mlp, MlpScratch, MlpSpec};
use crate::nn::DenseMatrix;
use crate::oracle::sssp_rows;
use crate::pretrain::{EmbeddingTable, PartitionTree};

/// Node coordinates at 32-bit storage width, with standardization
/// constants for use as network inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordFeatures {
    pub raw: Vec<[f32; 2]>,
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl CoordFeatures {
    pub fn from_graph(g: &RoadNetwork) -> Self {
        let raw: Vec<[f32; 2]> = g.coords().iter().map(|c| [c.lat as f32, c.lon as f32]).collect();
        let n = raw.len().max(1) as f64;
        let mut mean = [0.0; 2];
        for r in &raw {
            mean[0] += r[0] as f64 / n;
            mean[1] += r[1] as f64 / n;
        }
        let mut var = [0.0; 2];
        for r in &raw {
            var[0] += (r[0] as f64 - mean[0]).powi(2) / n;
            var[1] += (r[1] as f64 - mean[1]).powi(2) / n;
        }
        let std = [var[0].sqrt().max(1e-12), var[1].sqrt().max(1e-12)];
        CoordFeatures { raw, mean, std }
    }

    #[inline]
    pub fn lat_lon(&self, v: NodeId) -> (f64, f64) {
        (self.raw[v][0] as f64, self.raw[v][1] as f64)
    }

    #[inline]
    pub fn standardized_into(&self, v: NodeId, out: &mut [f64]) {
        let (lat, lon) = self.lat_lon(v);
        out[0] = (lat - self.mean[0]) / self.std[0];
        out[1] = (lon - self.mean[1]) / self.std[1];
    }

    pub fn standardized_matrix(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.raw.len(), 2);
        for v in 0..self.raw.len() {
            self.standardized_into(v, m.row_mut(v));
        }
        m
    }
}

/// Exact distances from every node to each landmark, `n × l` meters.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkTable {
    pub landmarks: Vec<NodeId>,
    pub rows: DenseMatrix,
}

impl LandmarkTable {
    pub fn compute(g: &RoadNetwork, landmarks: &[NodeId]) -> Result<Self> {
        let sssp = sssp_rows(g, landmarks)?;
        let l = landmarks.len();
        let mut rows = DenseMatrix::zeros(g.n(), l);
        for (j, r) in sssp.iter().enumerate() {
            for (v, &d) in r.dist.iter().enumerate() {
                if !d.is_finite() {
                    return Err(Error::Disconnected { u: landmarks[j], v });
                }
                rows.data[v * l + j] = d;
            }
        }
        Ok(LandmarkTable { landmarks: landmarks.to_vec(), rows })
    }

    pub fn l(&self) -> usize {
        self.landmarks.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Encoder {
    Coordinates(CoordFeatures),
    Landmarks(LandmarkTable),
    /// Landmark rows divided by `scale`, followed by standardized
    /// coordinates.
    LandmarksCoords { landmarks: LandmarkTable, coords: CoordFeatures, scale: f64 },
    Table(EmbeddingTable),
    /// `cache` holds the per-node sum over all levels.
    Hierarchical { tree: PartitionTree, cache: DenseMatrix },
    /// `cache` holds the full-graph output, recomputed after training.
    Gcn { gcn: Gcn, features: DenseMatrix, cache: DenseMatrix, edges: Vec<(NodeId, NodeId)> },
}

impl Encoder {
    pub fn kind(&self) -> &'static str {
        match self {
            Encoder::Coordinates(_) => "coordinates",
            Encoder::Landmarks(_) => "landmark_vector",
            Encoder::LandmarksCoords { .. } => "landmark_coordinates",
            Encoder::Table(t) if t.trainable => "learnable",
            Encoder::Table(_) => "pretrained",
            Encoder::Hierarchical { .. } => "hierarchical",
            Encoder::Gcn { .. } => "gcn",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Coordinates(_) => 2,
            Encoder::Landmarks(t) => t.l(),
            Encoder::LandmarksCoords { landmarks, .. } => landmarks.l() + 2,
            Encoder::Table(t) => t.d(),
            Encoder::Hierarchical { cache, .. } | Encoder::Gcn { cache, .. } => cache.cols,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Encoder::Coordinates(c) => c.raw.len(),
            Encoder::Landmarks(t) => t.rows.rows,
            Encoder::LandmarksCoords { landmarks, .. } => landmarks.rows.rows,
            Encoder::Table(t) => t.n(),
            Encoder::Hierarchical { cache, .. } | Encoder::Gcn { cache, .. } => cache.rows,
        }
    }

    /// Borrowed row when the encoder is a plain lookup.
    #[inline]
    pub fn lookup(&self, v: NodeId) -> Option<&[f64]> {
        match self {
            Encoder::Landmarks(t) => Some(t.rows.row(v)),
            Encoder::Table(t) => Some(t.row(v)),
            Encoder::Hierarchical { cache, .. } | Encoder::Gcn { cache, .. } => Some(cache.row(v)),
            _ => None,
        }
    }

    /// Writes `φ(v)` into `out` (resized to [`Encoder::dim`]).
    #[inline]
    pub fn encode_into(&self, v: NodeId, out: &mut Vec<f64>) {
        out.resize(self.dim(), 0.0);
        match self {
            Encoder::Coordinates(c) => c.standardized_into(v, out),
            Encoder::LandmarksCoords { landmarks, coords, scale } => {
                let l = landmarks.l();
                for (o, &d) in out[..l].iter_mut().zip(landmarks.rows.row(v)) {
                    *o = d / scale;
                }
                coords.standardized_into(v, &mut out[l..]);
                crate::opcount::add(l as u64 + 4);
            }
            other => out.copy_from_slice(other.lookup(v).expect("lookup encoder")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiBranch {
    pub branches: Vec<Mlp>,
    /// Softmax logits of the aggregation weights.
    pub logits: Vec<f64>,
    pub learnable: bool,
}

impl MultiBranch {
    pub fn weights(&self) -> Vec<f64> {
        let m = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|&z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    /// ℓ1 over coordinates converted to local meters.
    Manhattan(ManhattanScale),
    LandmarkMin,
    InverseDot,
    L1,
    Mlp(Mlp),
    MultiBranch(MultiBranch),
}

impl Decoder {
    pub fn kind(&self) -> &'static str {
        match self {
            Decoder::Manhattan(_) => "manhattan_l1",
            Decoder::LandmarkMin => "landmark_min",
            Decoder::InverseDot => "inverse_dot",
            Decoder::L1 => "l1_norm",
            Decoder::Mlp(_) => "mlp",
            Decoder::MultiBranch(_) => "multibranch_mlp",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Decoder::Mlp(m) => m.param_count(),
            Decoder::MultiBranch(mb) => mb.branches.iter().map(Mlp::param_count).sum::<usize>() + mb.logits.len(),
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct QueryScratch {
    pub hu: Vec<f64>,
    pub hv: Vec<f64>,
    pub x: Vec<f64>,
    pub mlp: MlpScratch,
    pub feat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceModel {
    pub name: String,
    pub encoder: Encoder,
    /// Absent for functional decoders that consume both vectors directly.
    pub fusion: Option<FusionOp>,
    pub decoder: Decoder,
    /// Largest train-split label.
    pub d_max: f64,
    /// Learned decoders predict `label / label_scale`.
    pub label_scale: f64,
    pub config: TrainConfig,
    pub trained: bool,
    pub graph_hash: String,
    pub cluster: Option<ClusterScaling>,
}

impl DistanceModel {
    pub fn n(&self) -> usize {
        self.encoder.n()
    }

    /// Whether the model has parameters fitted by gradient descent.
    pub fn is_learnable(&self) -> bool {
        matches!(self.decoder, Decoder::Mlp(_) | Decoder::MultiBranch(_))
            || matches!(&self.encoder, Encoder::Table(t) if t.trainable)
            || matches!(self.encoder, Encoder::Hierarchical { .. } | Encoder::Gcn { .. })
    }

    pub fn trainable_param_count(&self) -> usize {
        let enc = match &self.encoder {
            Encoder::Table(t) if t.trainable => t.values.data.len(),
            Encoder::Hierarchical { tree, .. } => tree.tables.iter().map(|t| t.data.len()).sum(),
            Encoder::Gcn { gcn, .. } => gcn.param_count(),
            _ => 0,
        };
        let cl = if self.cluster.is_some() { 2 } else { 0 };
        enc + self.decoder.param_count() + cl
    }

    pub fn is_symmetric(&self) -> bool {
        if self.cluster.is_some() {
            return false;
        }
        match &self.decoder {
            Decoder::Manhattan(_) | Decoder::LandmarkMin | Decoder::InverseDot | Decoder::L1 => true,
            Decoder::Mlp(_) | Decoder::MultiBranch(_) => self.fusion.is_some_and(FusionOp::is_symmetric),
        }
    }

    /// Decoder output in label units (before `label_scale`), for learned
    /// decoders.
    #[inline]
    pub fn raw(&self, u: NodeId, v: NodeId, s: &mut QueryScratch) -> f64 {
        match &self.decoder {
            Decoder::Manhattan(_) | Decoder::LandmarkMin => self.base_meters(u, v, s) / self.label_scale,
            Decoder::InverseDot => {
                let (a, b) = (self.encoder.lookup(u).unwrap(), self.encoder.lookup(v).unwrap());
                decode_inverse_dot(a, b, 1.0)
            }
            Decoder::L1 => decode_l1(self.encoder.lookup(u).unwrap(), self.encoder.lookup(v).unwrap()),
            Decoder::Mlp(m) => {
                self.fused_into(u, v, s);
                m.predict_one(&s.x, &mut s.mlp)
            }
            Decoder::MultiBranch(mb) => {
                self.fused_into(u, v, s);
                let w = mb.weights();
                let mut out = 0.0;
                for (k, m) in mb.branches.iter().enumerate() {
                    out += w[k] * m.predict_one(&s.x, &mut s.mlp);
                }
                crate::opcount::add(2 * mb.branches.len() as u64);
                out
            }
        }
    }

    #[inline]
    fn fused_into(&self, u: NodeId, v: NodeId, s: &mut QueryScratch) {
        let op = self.fusion.expect("mlp decoder needs a fusion operator");
        self.encoder.encode_into(u, &mut s.hu);
        self.encoder.encode_into(v, &mut s.hv);
        s.x.resize(op.output_dim(s.hu.len()), 0.0);
        op.fuse_into(&s.hu, &s.hv, &mut s.x);
    }

    #[inline]
    fn base_meters(&self, u: NodeId, v: NodeId, s: &mut QueryScratch) -> f64 {
        match (&self.decoder, &self.encoder) {
            (Decoder::Manhattan(scale), Encoder::Coordinates(c)) => {
                let (a, b) = (c.lat_lon(u), c.lat_lon(v));
                crate::opcount::add(5);
                scale.from_deltas(a.0 - b.0, a.1 - b.1)
            }
            (Decoder::LandmarkMin, enc) => decode_landmark_min(enc.lookup(u).unwrap(), enc.lookup(v).unwrap()),
            (Decoder::InverseDot, enc) => decode_inverse_dot(enc.lookup(u).unwrap(), enc.lookup(v).unwrap(), self.d_max),
            _ => self.label_scale * self.raw(u, v, s),
        }
    }

    /// Unchecked estimate in meters.
    #[inline]
    pub fn predict_with(&self, u: NodeId, v: NodeId, s: &mut QueryScratch) -> f64 {
        let d = match &self.cluster {
            Some(c) => c.predict(self, u, v, s),
            None => self.base_meters(u, v, s),
        };
        d.max(0.0)
    }

    pub fn check_query(&self, u: NodeId, v: NodeId) -> Result<()> {
        let n = self.n();
        for x in [u, v] {
            if x >= n {
                return Err(Error::NodeOutOfRange { node: x, n });
            }
        }
        if self.is_learnable() && !self.trained {
            return Err(Error::Untrained(self.name.clone()));
        }
        Ok(())
    }

    pub fn predict(&self, u: NodeId, v: NodeId) -> Result<f64> {
        self.check_query(u, v)?;
        Ok(self.predict_with(u, v, &mut QueryScratch::default()))
    }

    /// Rebuilds derived inference tables (hierarchical sums, GCN outputs).
    pub fn refresh_cache(&mut self) -> Result<()> {
        match &mut self.encoder {
            Encoder::Hierarchical { tree, cache } => *cache = tree.aggregate_all(),
            Encoder::Gcn { gcn, features, cache, edges } => {
                let g = edge_graph(cache.rows, edges)?;
                *cache = gcn.encode_all(&g, features)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Rounds trained parameters to their 32-bit storage width so the
    /// in-memory model equals its checkpoint.
    pub fn quantize(&mut self) -> Result<()> {
        let q = |xs: &mut [f64]| xs.iter_mut().for_each(|x| *x = *x as f32 as f64);
        match &mut self.encoder {
            Encoder::Table(t) => q(&mut t.values.data),
            Encoder::Hierarchical { tree, .. } => tree.tables.iter_mut().for_each(|t| q(&mut t.data)),
            Encoder::Gcn { gcn, .. } => gcn.params_mut().into_iter().for_each(|(_, p)| q(p)),
            _ => {}
        }
        match &mut self.decoder {
            Decoder::Mlp(m) => m.quantize(),
            Decoder::MultiBranch(mb) => {
                mb.branches.iter_mut().for_each(Mlp::quantize);
                q(&mut mb.logits);
            }
            _ => {}
        }
        if let Some(c) = &mut self.cluster {
            c.lambda1 = c.lambda1 as f32 as f64;
            c.lambda2 = c.lambda2 as f32 as f64;
        }
        self.refresh_cache()?;
        if let Encoder::Gcn { cache, .. } = &mut self.encoder {
            q(&mut cache.data);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = Vec::new();
        let mut enc = json!({ "kind": self.encoder.kind(), "dim": self.encoder.dim() });
        match &self.encoder {
            Encoder::Coordinates(c) => push_coords(&mut tensors, &mut enc, c),
            Encoder::Landmarks(t) => push_landmarks(&mut tensors, t),
            Encoder::LandmarksCoords { landmarks, coords, scale } => {
                push_landmarks(&mut tensors, landmarks);
                push_coords(&mut tensors, &mut enc, coords);
                enc["scale"] = json!(scale);
            }
            Encoder::Table(t) => tensors.push(Tensor::f32_from("embedding", vec![t.n(), t.d()], &t.values.data)),
            Encoder::Hierarchical { tree, .. } => {
                enc["counts"] = json!(tree.counts);
                for (k, t) in tree.tables.iter().enumerate() {
                    tensors.push(Tensor::f32_from(format!("level{k}.table"), vec![t.rows, t.cols], &t.data));
                    // the identity level needs no map
                    if k + 1 < tree.level_count() {
                        tensors.push(Tensor::u32_from(format!("level{k}.assign"), &tree.levels[k]));
                    }
                }
            }
            Encoder::Gcn { gcn, features, cache, edges } => {
                enc["widths"] = json!(gcn_widths(gcn));
                enc["activation"] = json!(gcn.activation);
                for (i, l) in gcn.layers.iter().enumerate() {
                    tensors.push(Tensor::f32_from(format!("gcn{i}.weight"), vec![l.w.rows, l.w.cols], &l.w.data));
                    tensors.push(Tensor::f32_from(format!("gcn{i}.bias"), vec![l.b.len()], &l.b));
                }
                tensors.push(Tensor::f32_from("features", vec![features.rows, features.cols], &features.data));
                let flat: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
                let mut et = Tensor::u32_from("edges", &flat);
                et.dims = vec![edges.len(), 2];
                tensors.push(et);
                tensors.push(Tensor::f32_from("cache", vec![cache.rows, cache.cols], &cache.data));
            }
        }
        let mut dec = json!({ "kind": self.decoder.kind() });
        match &self.decoder {
            Decoder::Manhattan(s) => dec["scale"] = json!(s),
            Decoder::Mlp(m) => {
                dec["spec"] = json!(m.spec);
                push_mlp(&mut tensors, "mlp", m);
            }
            Decoder::MultiBranch(mb) => {
                dec["spec"] = json!(mb.branches[0].spec);
                dec["branches"] = json!(mb.branches.len());
                dec["learnable"] = json!(mb.learnable);
                for (k, m) in mb.branches.iter().enumerate() {
                    push_mlp(&mut tensors, &format!("branch{k}"), m);
                }
                tensors.push(Tensor::f32_from("branch_logits", vec![mb.logits.len()], &mb.logits));
            }
            _ => {}
        }
        let mut manifest = json!({
            "model": self.name,
            "encoder": enc,
            "fusion": self.fusion,
            "decoder": dec,
            "d_max": self.d_max,
            "label_scale": self.label_scale,
            "seed": self.config.seed,
            "graph_hash": self.graph_hash,
            "n": self.n(),
            "trained": self.trained,
        });
        if let Some(c) = &self.cluster {
            manifest["cluster"] = json!({ "lambda1": c.lambda1, "lambda2": c.lambda2, "k": c.centers.len() });
            tensors.push(Tensor::u32_from("cluster.centers", &c.centers));
            tensors.push(Tensor::u32_from("cluster.assign", &c.assign));
            let k = c.centers.len();
            tensors.push(Tensor::f64("cluster.center_dist", vec![k, k], c.center_dist.clone()));
        }
        Checkpoint::new(manifest, tensors)
    }

    /// Serialized size in bytes.
    pub fn index_bytes(&self) -> usize {
        self.to_checkpoint().to_bytes().len()
    }

    pub fn from_checkpoint(ck: &Checkpoint, graph_hash: Option<&str>) -> Result<Self> {
        let m = &ck.manifest;
        let stored_hash = m["graph_hash"].as_str().unwrap_or_default().to_string();
        if let Some(h) = graph_hash {
            if h != stored_hash {
                return Err(Error::Checkpoint(format!("checkpoint built for graph {stored_hash}, loaded against {h}")));
            }
        }
        let f = |t: &Tensor| -> Result<DenseMatrix> {
            let (r, c) = match t.dims[..] {
                [r, c] => (r, c),
                [r] => (r, 1),
                _ => return Err(Error::Checkpoint(format!("tensor {} has rank {}", t.name, t.dims.len()))),
            };
            DenseMatrix::from_vec(r, c, t.data.to_f64())
        };
        let enc = &m["encoder"];
        let kind = enc["kind"].as_str().unwrap_or_default();
        let coords = |ck: &Checkpoint| -> Result<CoordFeatures> {
            let t = f(ck.get("coords")?)?;
            let mean: [f64; 2] = serde_json::from_value(enc["mean"].clone())?;
            let std: [f64; 2] = serde_json::from_value(enc["std"].clone())?;
            let raw = (0..t.rows).map(|i| [t.get(i, 0) as f32, t.get(i, 1) as f32]).collect();
            Ok(CoordFeatures { raw, mean, std })
        };
        let landmarks = |ck: &Checkpoint| -> Result<LandmarkTable> {
            Ok(LandmarkTable {
                landmarks: ck.get("landmark_ids")?.usize_values()?,
                rows: f(ck.get("landmark_rows")?)?,
            })
        };
        let encoder = match kind {
            "coordinates" => Encoder::Coordinates(coords(ck)?),
            "landmark_vector" => Encoder::Landmarks(landmarks(ck)?),
            "landmark_coordinates" => Encoder::LandmarksCoords {
                landmarks: landmarks(ck)?,
                coords: coords(ck)?,
                scale: enc["scale"].as_f64().unwrap_or(1.0),
            },
            "learnable" | "pretrained" => {
                Encoder::Table(EmbeddingTable { values: f(ck.get("embedding")?)?, trainable: kind == "learnable" })
            }
            "hierarchical" => {
                let counts: Vec<usize> = serde_json::from_value(enc["counts"].clone())?;
                let nlev = counts.len();
                let n = *counts.last().ok_or_else(|| Error::Checkpoint("empty partition tree".into()))?;
                let mut levels = Vec::new();
                let mut tables = Vec::new();
                for k in 0..nlev {
                    tables.push(f(ck.get(&format!("level{k}.table"))?)?);
                    levels.push(if k + 1 < nlev {
                        ck.get(&format!("level{k}.assign"))?.usize_values()?
                    } else {
                        (0..n).collect()
                    });
                }
                let tree = PartitionTree { levels, counts, tables };
                let cache = tree.aggregate_all();
                Encoder::Hierarchical { tree, cache }
            }
            "gcn" => {
                let widths: Vec<usize> = serde_json::from_value(enc["widths"].clone())?;
                let activation: Activation = serde_json::from_value(enc["activation"].clone())?;
                let mut layers = Vec::new();
                for i in 0..widths.len() - 1 {
                    layers.push(GcnLayer {
                        w: f(ck.get(&format!("gcn{i}.weight"))?)?,
                        b: ck.get(&format!("gcn{i}.bias"))?.data.to_f64(),
                    });
                }
                let flat = ck.get("edges")?.usize_values()?;
                Encoder::Gcn {
                    gcn: Gcn { layers, activation },
                    features: f(ck.get("features")?)?,
                    cache: f(ck.get("cache")?)?,
                    edges: flat.chunks_exact(2).map(|c| (c[0], c[1])).collect(),
                }
            }
            other => return Err(Error::Checkpoint(format!("unknown encoder kind {other:?}"))),
        };
        let dec = &m["decoder"];
        let decoder = match dec["kind"].as_str().unwrap_or_default() {
            "manhattan_l1" => Decoder::Manhattan(serde_json::from_value(dec["scale"].clone())?),
            "landmark_min" => Decoder::LandmarkMin,
            "inverse_dot" => Decoder::InverseDot,
            "l1_norm" => Decoder::L1,
            "mlp" => Decoder::Mlp(load_mlp(ck, "mlp", serde_json::from_value(dec["spec"].clone())?)?),
            "multibranch_mlp" => {
                let spec: MlpSpec = serde_json::from_value(dec["spec"].clone())?;
                let b = dec["branches"].as_u64().unwrap_or(4) as usize;
                let branches =
                    (0..b).map(|k| load_mlp(ck, &format!("branch{k}"), spec.clone())).collect::<Result<Vec<_>>>()?;
                Decoder::MultiBranch(MultiBranch {
                    branches,
                    logits: ck.get("branch_logits")?.data.to_f64(),
                    learnable: dec["learnable"].as_bool().unwrap_or(false),
                })
            }
            other => return Err(Error::Checkpoint(format!("unknown decoder kind {other:?}"))),
        };
        let cluster = match m.get("cluster") {
            Some(c) if !c.is_null() => Some(ClusterScaling {
                centers: ck.get("cluster.centers")?.usize_values()?,
                assign: ck.get("cluster.assign")?.usize_values()?,
                center_dist: ck.get("cluster.center_dist")?.data.to_f64(),
                lambda1: c["lambda1"].as_f64().unwrap_or(1.0),
                lambda2: c["lambda2"].as_f64().unwrap_or(1.0),
            }),
            _ => None,
        };
        let config = TrainConfig { seed: m["seed"].as_u64().unwrap_or(0), ..TrainConfig::default() };
        Ok(DistanceModel {
            name: m["model"].as_str().unwrap_or_default().to_string(),
            encoder,
            fusion: serde_json::from_value(m["fusion"].clone())?,
            decoder,
            d_max: m["d_max"].as_f64().unwrap_or(0.0),
            label_scale: m["label_scale"].as_f64().unwrap_or(1.0),
            config,
            trained: m["trained"].as_bool().unwrap_or(false),
            graph_hash: stored_hash,
            cluster,
        })
    }
}

fn gcn_widths(gcn: &Gcn) -> Vec<usize> {
    let mut w = vec![gcn.input_dim()];
    w.extend(gcn.layers.iter().map(|l| l.w.cols));
    w
}

fn push_coords(tensors: &mut Vec<Tensor>, enc: &mut serde_json::Value, c: &CoordFeatures) {
    let flat: Vec<f32> = c.raw.iter().flat_map(|r| [r[0], r[1]]).collect();
    tensors.push(Tensor::new("coords", vec![c.raw.len(), 2], TensorData::F32(flat)));
    enc["mean"] = json!(c.mean);
    enc["std"] = json!(c.std);
}

fn push_landmarks(tensors: &mut Vec<Tensor>, t: &LandmarkTable) {
    tensors.push(Tensor::u32_from("landmark_ids", &t.landmarks));
    // kept at 64 bits so the triangle-inequality bound stays exact
    tensors.push(Tensor::f64("landmark_rows", vec![t.rows.rows, t.rows.cols], t.rows.data.clone()));
}

fn push_mlp(tensors: &mut Vec<Tensor>, prefix: &str, m: &Mlp) {
    for (i, l) in m.layers.iter().enumerate() {
        tensors.push(Tensor::f32_from(format!("{prefix}.layer{i}.weight"), vec![l.w.rows, l.w.cols], &l.w.data));
        tensors.push(Tensor::f32_from(format!("{prefix}.layer{i}.bias"), vec![l.b.len()], &l.b));
    }
}

fn load_mlp(ck: &Checkpoint, prefix: &str, spec: MlpSpec) -> Result<Mlp> {
    let mut m = Mlp::zeros(spec)?;
    for (i, l) in m.layers.iter_mut().enumerate() {
        let w = ck.get(&format!("{prefix}.layer{i}.weight"))?.data.to_f64();
        let b = ck.get(&format!("{prefix}.layer{i}.bias"))?.data.to_f64();
        if w.len() != l.w.data.len() || b.len() != l.b.len() {
            return Err(Error::Checkpoint(format!("{prefix}.layer{i} shape mismatch")));
        }
        l.w.data = w;
        l.b = b;
    }
    Ok(m)
}

/// Topology-only graph for GCN propagation from a stored edge list.
pub(crate) fn edge_graph(n: usize, edges: &[(NodeId, NodeId)]) -> Result<RoadNetwork> {
    let coords = vec![crate::graph::Coordinate { lat: 0.0, lon: 0.0 }; n];
    let e: Vec<_> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
    RoadNetwork::from_edges(coords, &e)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelSummary {
    pub name: String,
    pub encoder: String,
    pub fusion: Option<FusionOp>,
    pub decoder: String,
    pub trainable_params: usize,
}

impl DistanceModel {
    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            name: self.name.clone(),
            encoder: self.encoder.kind().into(),
            fusion: self.fusion,
            decoder: self.decoder.kind().into(),
            trainable_params: self.trainable_param_count(),
        }
    }
}
