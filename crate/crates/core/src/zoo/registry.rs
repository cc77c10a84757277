//! Named model configurations and their default training recipes.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::decoder::ManhattanScale;
use super::fusion::FusionOp;
use super::gcn::Gcn;
use super::model::{CoordFeatures, Decoder, DistanceModel, Encoder, LandmarkTable, MultiBranch};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoadNetwork};
use crate::nn::init::{truncated_normal, Init};
use crate::nn::loss::LossKind;
use crate::nn::mlp::{Activation, Mlp, MlpSpec, OutputActivation};
use crate::nn::DenseMatrix;
use crate::pretrain::{
    hierarchical_partition, random_walks, rne_level_count, skipgram_train, EmbeddingTable, SkipGramConfig,
};
use crate::util::derive_seed;
use crate::workload::{select_landmarks, LandmarkStrategy, SplitDataset};

/// Every model id accepted by [`build_model`] plus the tree ensemble.
pub const MODEL_NAMES: &[&str] = &[
    "manhattan",
    "landmark_rn",
    "landmark_km",
    "geodnn",
    "distancenn",
    "embednn",
    "vdist2vec",
    "vdist2vec-l",
    "vdist2vec-s",
    "ndist2vec",
    "landmarknn",
    "path2vec",
    "aneda",
    "rne",
    "rgcndist2vec",
    "gbdt",
];

pub const WALKS_PER_NODE: usize = 10;
pub const WALK_LENGTH: usize = 80;
pub const RNE_BRANCHING: usize = 32;
pub const GCN_WIDTHS: [usize; 3] = [2, 512, 64];

pub fn unknown_model(name: &str) -> Error {
    Error::UnknownModel { name: name.to_string(), known: MODEL_NAMES.join(", ") }
}

/// Shared inputs for building models on one graph and split. Caches the
/// skip-gram table used by several models.
pub struct BuildContext<'a> {
    pub g: &'a RoadNetwork,
    pub split: &'a SplitDataset,
    pub dim: usize,
    pub landmarks: usize,
    pub seed: u64,
    /// Hogwild skip-gram; results then depend on thread scheduling.
    pub parallel_pretrain: bool,
    skipgram: Option<(EmbeddingTable, f64)>,
}

/// A freshly built model and the seconds of cached shared work it reused,
/// which count toward its precomputation time.
pub struct Built {
    pub model: DistanceModel,
    pub reused_seconds: f64,
}

impl<'a> BuildContext<'a> {
    pub fn new(g: &'a RoadNetwork, split: &'a SplitDataset, dim: usize, landmarks: usize, seed: u64) -> Self {
        BuildContext { g, split, dim, landmarks, seed, parallel_pretrain: false, skipgram: None }
    }

    /// Skip-gram table and the seconds it took, plus whether it was cached.
    fn skipgram(&mut self) -> (EmbeddingTable, f64, bool) {
        if let Some((t, s)) = &self.skipgram {
            return (t.clone(), *s, true);
        }
        let start = Instant::now();
        let corpus = random_walks(self.g, WALKS_PER_NODE, WALK_LENGTH, derive_seed(self.seed, 0x3a1c));
        let cfg = SkipGramConfig {
            dim: self.dim,
            seed: derive_seed(self.seed, 0x5e1),
            parallel: self.parallel_pretrain,
            ..Default::default()
        };
        let t = skipgram_train(&corpus, self.g.n(), &cfg);
        let secs = start.elapsed().as_secs_f64();
        self.skipgram = Some((t.clone(), secs));
        (t, secs, false)
    }

    /// Distinct endpoints of the training queries, ascending.
    pub fn landmark_candidates(&self) -> Vec<NodeId> {
        let mut c: Vec<NodeId> = self.split.train.samples.iter().flat_map(|s| [s.u, s.v]).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// `l` landmarks from the training-query vertices, or from all nodes
    /// when there are too few of those.
    pub fn pick_landmarks(&self, l: usize, strategy: LandmarkStrategy, stream: u64) -> Result<Vec<NodeId>> {
        let cands = self.landmark_candidates();
        let seed = derive_seed(self.seed, stream);
        if cands.len() >= l {
            select_landmarks(self.g, l, strategy, Some(&cands), seed)
        } else {
            select_landmarks(self.g, l.min(self.g.n()), strategy, None, seed)
        }
    }
}

/// Training recipe for `name` at `seed`.
pub fn default_train_config(name: &str, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig { seed, ..TrainConfig::default() };
    match name {
        "landmarknn" => cfg.lr = 0.0003,
        "path2vec" | "aneda" => cfg.lr = 0.03,
        "rne" => cfg.lr = 0.003,
        "rgcndist2vec" => cfg.loss = LossKind::SmoothL1,
        "vdist2vec-l" => {
            cfg.loss = LossKind::Huber(1.0);
            cfg.extras.adaptive_delta = true;
        }
        _ => {}
    }
    if name != "path2vec" {
        cfg.extras.alpha = 0.0;
    }
    cfg
}

fn mlp(widths: Vec<usize>, hidden: Activation, out: OutputActivation, rng: &mut ChaCha8Rng) -> Result<Mlp> {
    Mlp::new(MlpSpec::new(widths, hidden, out)?, Init::XavierUniform, rng)
}

fn normal_table(n: usize, d: usize, rng: &mut ChaCha8Rng) -> EmbeddingTable {
    let std = 1.0 / (d as f64).sqrt();
    let data = (0..n * d).map(|_| truncated_normal(rng, std)).collect();
    EmbeddingTable { values: DenseMatrix { rows: n, cols: d, data }, trainable: true }
}

pub fn build_model(name: &str, ctx: &mut BuildContext) -> Result<Built> {
    let g = ctx.g;
    let n = g.n();
    let d = ctx.dim;
    if d == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let d_max = ctx.split.d_max();
    if !(d_max > 0.0) {
        return Err(Error::InvalidArgument("train split has no positive distance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.seed, 0xb11d));
    let sig = OutputActivation::SigmoidScaled(1.0);
    let relu = Activation::Relu;
    let mut reused = 0.0;
    let (encoder, fusion, decoder, label_scale) = match name {
        "manhattan" => (
            Encoder::Coordinates(CoordFeatures::from_graph(g)),
            None,
            Decoder::Manhattan(ManhattanScale::at_latitude(g.mean_latitude())),
            1.0,
        ),
        "landmark_rn" | "landmark_km" => {
            let strategy = if name == "landmark_rn" { LandmarkStrategy::Random } else { LandmarkStrategy::Kmeans };
            let lm = ctx.pick_landmarks(ctx.landmarks, strategy, 0x1a4d)?;
            (Encoder::Landmarks(LandmarkTable::compute(g, &lm)?), None, Decoder::LandmarkMin, 1.0)
        }
        "geodnn" => (
            Encoder::Coordinates(CoordFeatures::from_graph(g)),
            Some(FusionOp::Concat),
            Decoder::Mlp(mlp(vec![4, 20, 100, 20, 1], relu, sig, &mut rng)?),
            d_max,
        ),
        "distancenn" | "embednn" | "aneda" => {
            let (mut t, secs, cached) = ctx.skipgram();
            if cached {
                reused = secs;
            }
            match name {
                "distancenn" => {
                    let spec = MlpSpec::new(vec![d, 64, 12, 1], relu, OutputActivation::Softplus)?.with_dropout(0.4);
                    let m = Mlp::new(spec, Init::XavierUniform, &mut rng)?;
                    (Encoder::Table(t), Some(FusionOp::Subtract), Decoder::Mlp(m), 1.0)
                }
                "embednn" => (
                    Encoder::Table(t),
                    Some(FusionOp::Average),
                    Decoder::Mlp(mlp(vec![d, 500, 1], relu, sig, &mut rng)?),
                    d_max,
                ),
                _ => {
                    for r in 0..t.n() {
                        let row = t.values.row_mut(r);
                        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if norm > 0.0 {
                            row.iter_mut().for_each(|x| *x /= norm);
                        }
                    }
                    t.trainable = true;
                    (Encoder::Table(t), None, Decoder::InverseDot, d_max)
                }
            }
        }
        "vdist2vec" | "vdist2vec-l" => (
            Encoder::Table(normal_table(n, d, &mut rng)),
            Some(FusionOp::Concat),
            Decoder::Mlp(mlp(vec![2 * d, 100, 20, 1], relu, sig, &mut rng)?),
            d_max,
        ),
        "vdist2vec-s" | "ndist2vec" => {
            let table = normal_table(n, d, &mut rng);
            let branches =
                (0..4).map(|_| mlp(vec![2 * d, 100, 20, 1], relu, sig, &mut rng)).collect::<Result<Vec<_>>>()?;
            let mb = MultiBranch { branches, logits: vec![0.0; 4], learnable: name == "ndist2vec" };
            (Encoder::Table(table), Some(FusionOp::Concat), Decoder::MultiBranch(mb), d_max)
        }
        "landmarknn" => {
            let lm = ctx.pick_landmarks(ctx.landmarks, LandmarkStrategy::Random, 0x1a4d)?;
            let landmarks = LandmarkTable::compute(g, &lm)?;
            let w = 2 * (landmarks.l() + 2);
            let enc = Encoder::LandmarksCoords { landmarks, coords: CoordFeatures::from_graph(g), scale: d_max };
            (enc, Some(FusionOp::Concat), Decoder::Mlp(mlp(vec![w, 1024, 512, 1], relu, sig, &mut rng)?), d_max)
        }
        "path2vec" => (Encoder::Table(normal_table(n, d, &mut rng)), None, Decoder::InverseDot, d_max),
        "rne" => {
            let levels = rne_level_count(n, RNE_BRANCHING);
            let mut tree = hierarchical_partition(g, levels, RNE_BRANCHING, derive_seed(ctx.seed, 0x9a27));
            tree.reset_tables(d);
            // small random starts everywhere: the ℓ1 subgradient at equal
            // vectors is zero, which would freeze an all-zero level
            let bound = 1.0 / d as f64;
            for (k, t) in tree.tables.iter_mut().enumerate() {
                let b = if k == 0 { bound } else { 1e-4 };
                t.data.iter_mut().for_each(|x| *x = rand::Rng::random_range(&mut rng, -b..b));
            }
            let cache = tree.aggregate_all();
            (Encoder::Hierarchical { tree, cache }, None, Decoder::L1, d_max)
        }
        "rgcndist2vec" => {
            let gcn = Gcn::new(&GCN_WIDTHS, Activation::LeakyRelu, &mut rng);
            let features = CoordFeatures::from_graph(g).standardized_matrix();
            let cache = gcn.encode_all(g, &features)?;
            let edges = g.edges().into_iter().map(|(u, v, _)| (u, v)).collect();
            (Encoder::Gcn { gcn, features, cache, edges }, None, Decoder::L1, d_max)
        }
        "gbdt" => {
            return Err(Error::InvalidArgument("gbdt is a tree ensemble; build it with gbdt::fit_gbdt_model".into()))
        }
        other => return Err(unknown_model(other)),
    };
    let model = DistanceModel {
        name: name.to_string(),
        encoder,
        fusion,
        decoder,
        d_max,
        label_scale,
        config: default_train_config(name, ctx.seed),
        trained: false,
        graph_hash: g.content_hash(),
        cluster: None,
    };
    let mut model = model;
    if !model.is_learnable() {
        model.trained = true;
    }
    Ok(Built { model, reused_seconds: reused })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::batch_ground_truth;
    use crate::synthetic::random_connected;
    use crate::workload::{sample_all_pairs, split_train_test};

    fn fixture() -> (RoadNetwork, SplitDataset) {
        let g = random_connected(40, 30, 5.0, 3);
        let pairs = sample_all_pairs(&g, 10_000).unwrap();
        let s = batch_ground_truth(&g, &pairs).unwrap();
        let split = split_train_test(&s, 0.8, 1).unwrap();
        (g, split)
    }

    #[test]
    fn every_neural_name_builds() {
        let (g, split) = fixture();
        let mut ctx = BuildContext::new(&g, &split, 8, 4, 1);
        for &name in MODEL_NAMES.iter().filter(|&&n| n != "gbdt") {
            let b = build_model(name, &mut ctx).unwrap();
            assert_eq!(b.model.name, name);
            assert_eq!(b.model.n(), g.n());
        }
    }

    #[test]
    fn unknown_name_lists_registry() {
        let (g, split) = fixture();
        let mut ctx = BuildContext::new(&g, &split, 8, 4, 1);
        let msg = build_model("nope", &mut ctx).err().unwrap().to_string();
        assert!(msg.contains("vdist2vec") && msg.contains("rgcndist2vec"));
    }

    #[test]
    fn table_widths_and_rates() {
        let (g, split) = fixture();
        let mut ctx = BuildContext::new(&g, &split, 8, 4, 1);
        let widths = |name: &str, ctx: &mut BuildContext| match build_model(name, ctx).unwrap().model.decoder {
            Decoder::Mlp(m) => m.spec.hidden_widths().to_vec(),
            _ => unreachable!(),
        };
        assert_eq!(widths("vdist2vec", &mut ctx), vec![100, 20]);
        assert_eq!(widths("landmarknn", &mut ctx), vec![1024, 512]);
        assert_eq!(widths("geodnn", &mut ctx), vec![20, 100, 20]);
        assert_eq!(widths("distancenn", &mut ctx), vec![64, 12]);
        assert_eq!(widths("embednn", &mut ctx), vec![500]);
        assert_eq!(build_model("manhattan", &mut ctx).unwrap().model.trainable_param_count(), 0);
        assert_eq!(default_train_config("landmarknn", 0).lr, 0.0003);
        assert_eq!(default_train_config("aneda", 0).lr, 0.03);
        assert_eq!(default_train_config("path2vec", 0).lr, 0.03);
        assert_eq!(default_train_config("rne", 0).lr, 0.003);
        assert_eq!(default_train_config("geodnn", 0).lr, 0.01);
        assert_eq!(default_train_config("geodnn", 0).batch_size, 1024);
    }
}
