//! Two-stage tree-ensemble distance model over pair features.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::boost::{fit_two_stage, BoostCurve, BoostParams, BoostedEnsemble, TwoStage};
use super::features::{FeatureMode, PairFeaturizer};
use super::tree::{FeatureMatrix, RegressionTree, TreeNode};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::nn::checkpoint::{hash64, Checkpoint, Tensor, TensorData};
use crate::nn::DenseMatrix;
use crate::oracle::GroundTruthSample;
use crate::util::par_map;
use crate::workload::LandmarkStrategy;
use crate::zoo::model::{CoordFeatures, LandmarkTable};
use crate::zoo::BuildContext;

pub const GBDT_LANDMARKS: usize = 61;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub landmarks: usize,
    pub mode: FeatureMode,
    pub boost: BoostParams,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig { landmarks: GBDT_LANDMARKS, mode: FeatureMode::AbsDiff, boost: BoostParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbdtModel {
    pub name: String,
    pub featurizer: PairFeaturizer,
    pub ensembles: TwoStage,
    pub graph_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Default)]
pub struct GbdtScratch {
    x: Vec<f64>,
    buf: Vec<f64>,
}

/// Feature rows for `samples`, in order.
pub fn feature_matrix(f: &PairFeaturizer, samples: &[GroundTruthSample]) -> FeatureMatrix {
    let chunks: Vec<&[GroundTruthSample]> = samples.chunks(4096).collect();
    let parts = par_map(&chunks, |c| {
        let mut data = Vec::with_capacity(c.len() * f.feature_count());
        let mut row = Vec::new();
        for s in c.iter() {
            f.features_into(s.u, s.v, &mut row);
            data.extend_from_slice(&row);
        }
        data
    });
    FeatureMatrix { rows: samples.len(), cols: f.feature_count(), data: parts.concat() }
}

/// Builds the features from the context's training split and fits both
/// stages.
pub fn fit_gbdt_model(ctx: &BuildContext, cfg: &GbdtConfig) -> Result<(GbdtModel, [BoostCurve; 2])> {
    let lm = ctx.pick_landmarks(cfg.landmarks, LandmarkStrategy::Random, 0x6bd7)?;
    let featurizer =
        PairFeaturizer::new(LandmarkTable::compute(ctx.g, &lm)?, CoordFeatures::from_graph(ctx.g), cfg.mode);
    let train = &ctx.split.train.samples;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    let x = feature_matrix(&featurizer, train);
    let y: Vec<f64> = train.iter().map(|s| s.d).collect();
    let (ensembles, curves) = fit_two_stage(&x, &y, &cfg.boost)?;
    let model = GbdtModel {
        name: "gbdt".into(),
        featurizer,
        ensembles,
        graph_hash: ctx.g.content_hash(),
        seed: ctx.seed,
    };
    Ok((model, curves))
}

fn push_ensemble(tensors: &mut Vec<Tensor>, prefix: &str, e: &BoostedEnsemble) {
    let mut feature = Vec::new();
    let mut threshold = Vec::new();
    let mut value = Vec::new();
    let mut right = Vec::new();
    let mut offsets = Vec::with_capacity(e.trees.len() + 1);
    offsets.push(0usize);
    for t in &e.trees {
        for nd in &t.nodes {
            feature.push(nd.feature);
            threshold.push(nd.threshold);
            value.push(nd.value);
            right.push(nd.right);
        }
        offsets.push(feature.len());
    }
    tensors.push(Tensor::new(format!("{prefix}.feature"), vec![feature.len()], TensorData::U32(feature)));
    tensors.push(Tensor::f64(format!("{prefix}.threshold"), vec![threshold.len()], threshold));
    tensors.push(Tensor::f64(format!("{prefix}.value"), vec![value.len()], value));
    tensors.push(Tensor::new(format!("{prefix}.right"), vec![right.len()], TensorData::U32(right)));
    tensors.push(Tensor::u32_from(format!("{prefix}.offsets"), &offsets));
}

fn load_ensemble(ck: &Checkpoint, prefix: &str, meta: &serde_json::Value) -> Result<BoostedEnsemble> {
    let u32s = |name: &str| -> Result<Vec<u32>> {
        match &ck.get(&format!("{prefix}.{name}"))?.data {
            TensorData::U32(v) => Ok(v.clone()),
            _ => Err(Error::Checkpoint(format!("{prefix}.{name} is not u32"))),
        }
    };
    let feature = u32s("feature")?;
    let right = u32s("right")?;
    let threshold = ck.get(&format!("{prefix}.threshold"))?.data.to_f64();
    let value = ck.get(&format!("{prefix}.value"))?.data.to_f64();
    let offsets = ck.get(&format!("{prefix}.offsets"))?.usize_values()?;
    if [right.len(), threshold.len(), value.len()].iter().any(|&l| l != feature.len())
        || offsets.last() != Some(&feature.len())
    {
        return Err(Error::Checkpoint(format!("{prefix}: inconsistent node arrays")));
    }
    let trees = offsets
        .windows(2)
        .map(|w| RegressionTree {
            nodes: (w[0]..w[1])
                .map(|i| TreeNode { feature: feature[i], threshold: threshold[i], value: value[i], right: right[i] })
                .collect(),
        })
        .collect();
    Ok(BoostedEnsemble::new(
        trees,
        meta["learning_rate"].as_f64().unwrap_or(0.3),
        meta["base_score"].as_f64().unwrap_or(0.0),
        meta["stage"].as_u64().unwrap_or(1) as u8,
        meta["n_features"].as_u64().unwrap_or(0) as usize,
    ))
}

impl GbdtModel {
    pub fn n(&self) -> usize {
        self.featurizer.landmarks.rows.rows
    }

    #[inline]
    pub fn predict_with(&self, u: NodeId, v: NodeId, s: &mut GbdtScratch) -> f64 {
        self.featurizer.features_into(u, v, &mut s.x);
        self.ensembles.predict_unchecked(&s.x, &mut s.buf)
    }

    pub fn predict(&self, u: NodeId, v: NodeId) -> Result<f64> {
        let n = self.n();
        for x in [u, v] {
            if x >= n {
                return Err(Error::NodeOutOfRange { node: x, n });
            }
        }
        Ok(self.predict_with(u, v, &mut GbdtScratch::default()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let f = &self.featurizer;
        let mut tensors = Vec::new();
        tensors.push(Tensor::u32_from("landmark_ids", &f.landmarks.landmarks));
        let lr = &f.landmarks.rows;
        tensors.push(Tensor::f64("landmark_rows", vec![lr.rows, lr.cols], lr.data.clone()));
        let flat: Vec<f32> = f.coords.raw.iter().flat_map(|r| [r[0], r[1]]).collect();
        tensors.push(Tensor::new("coords", vec![f.coords.raw.len(), 2], TensorData::F32(flat)));
        push_ensemble(&mut tensors, "stage1", &self.ensembles.stage1);
        push_ensemble(&mut tensors, "stage2", &self.ensembles.stage2);
        let meta = |e: &BoostedEnsemble| {
            json!({
                "learning_rate": e.learning_rate,
                "base_score": e.base_score,
                "stage": e.stage,
                "n_features": e.n_features,
                "trees": e.trees.len(),
            })
        };
        let schema = f.schema();
        let manifest = json!({
            "model": self.name,
            "kind": "gbdt",
            "graph_hash": self.graph_hash,
            "seed": self.seed,
            "n": self.n(),
            "feature_mode": f.mode,
            "feature_schema": schema,
            "feature_schema_hash": hash64(schema.as_bytes()),
            "coord_mean": f.coords.mean,
            "coord_std": f.coords.std,
            "stage1": meta(&self.ensembles.stage1),
            "stage2": meta(&self.ensembles.stage2),
        });
        Checkpoint::new(manifest, tensors)
    }

    pub fn index_bytes(&self) -> usize {
        self.to_checkpoint().to_bytes().len()
    }

    pub fn from_checkpoint(ck: &Checkpoint, graph_hash: Option<&str>) -> Result<Self> {
        let m = &ck.manifest;
        let stored = m["graph_hash"].as_str().unwrap_or_default().to_string();
        if let Some(h) = graph_hash {
            if h != stored {
                return Err(Error::Checkpoint(format!("checkpoint built for graph {stored}, loaded against {h}")));
            }
        }
        let ids = ck.get("landmark_ids")?.usize_values()?;
        let rows_t = ck.get("landmark_rows")?;
        let n = rows_t.dims.first().copied().unwrap_or(0);
        let rows = DenseMatrix::from_vec(n, ids.len(), rows_t.data.to_f64())?;
        let c = ck.get("coords")?.data.to_f64();
        let coords = CoordFeatures {
            raw: c.chunks_exact(2).map(|p| [p[0] as f32, p[1] as f32]).collect(),
            mean: serde_json::from_value(m["coord_mean"].clone())?,
            std: serde_json::from_value(m["coord_std"].clone())?,
        };
        let mode: FeatureMode = serde_json::from_value(m["feature_mode"].clone())?;
        let featurizer = PairFeaturizer::new(LandmarkTable { landmarks: ids, rows }, coords, mode);
        let schema = featurizer.schema();
        if m["feature_schema_hash"].as_u64() != Some(hash64(schema.as_bytes())) {
            return Err(Error::Checkpoint(format!("feature schema mismatch for {schema}")));
        }
        let stage1 = load_ensemble(ck, "stage1", &m["stage1"])?;
        let stage2 = load_ensemble(ck, "stage2", &m["stage2"])?;
        if stage1.n_features != featurizer.feature_count() || stage2.n_features != stage1.n_features + 1 {
            return Err(Error::Checkpoint("ensemble feature counts do not match the schema".into()));
        }
        Ok(GbdtModel {
            name: m["model"].as_str().unwrap_or("gbdt").to_string(),
            featurizer,
            ensembles: TwoStage { stage1, stage2 },
            graph_hash: stored,
            seed: m["seed"].as_u64().unwrap_or(0),
        })
    }
}
