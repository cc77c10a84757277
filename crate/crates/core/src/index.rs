//! One type over every trained index, for evaluation and persistence.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gbdt::{GbdtModel, GbdtScratch};
use crate::graph::NodeId;
use crate::nn::checkpoint::Checkpoint;
use crate::zoo::{DistanceModel, QueryScratch};

#[derive(Clone, Debug, PartialEq)]
pub enum DistanceIndex {
    Neural(DistanceModel),
    Gbdt(GbdtModel),
}

#[derive(Clone, Debug, Default)]
pub struct IndexScratch {
    neural: QueryScratch,
    gbdt: GbdtScratch,
}

impl From<DistanceModel> for DistanceIndex {
    fn from(m: DistanceModel) -> Self {
        DistanceIndex::Neural(m)
    }
}

impl From<GbdtModel> for DistanceIndex {
    fn from(m: GbdtModel) -> Self {
        DistanceIndex::Gbdt(m)
    }
}

impl DistanceIndex {
    pub fn name(&self) -> &str {
        match self {
            DistanceIndex::Neural(m) => &m.name,
            DistanceIndex::Gbdt(m) => &m.name,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DistanceIndex::Neural(m) => m.n(),
            DistanceIndex::Gbdt(m) => m.n(),
        }
    }

    pub fn graph_hash(&self) -> &str {
        match self {
            DistanceIndex::Neural(m) => &m.graph_hash,
            DistanceIndex::Gbdt(m) => &m.graph_hash,
        }
    }

    /// Unchecked hot path; endpoints must be below [`Self::n`].
    #[inline]
    pub fn predict_with(&self, u: NodeId, v: NodeId, s: &mut IndexScratch) -> f64 {
        match self {
            DistanceIndex::Neural(m) => m.predict_with(u, v, &mut s.neural),
            DistanceIndex::Gbdt(m) => m.predict_with(u, v, &mut s.gbdt),
        }
    }

    pub fn predict(&self, u: NodeId, v: NodeId) -> Result<f64> {
        match self {
            DistanceIndex::Neural(m) => m.predict(u, v),
            DistanceIndex::Gbdt(m) => m.predict(u, v),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            DistanceIndex::Neural(m) => m.to_checkpoint(),
            DistanceIndex::Gbdt(m) => m.to_checkpoint(),
        }
    }

    /// Serialized size in bytes; equals the checkpoint file size.
    pub fn index_bytes(&self) -> usize {
        self.to_checkpoint().to_bytes().len()
    }

    pub fn from_checkpoint(ck: &Checkpoint, graph_hash: Option<&str>) -> Result<Self> {
        if ck.manifest["kind"].as_str() == Some("gbdt") {
            Ok(DistanceIndex::Gbdt(GbdtModel::from_checkpoint(ck, graph_hash)?))
        } else {
            Ok(DistanceIndex::Neural(DistanceModel::from_checkpoint(ck, graph_hash)?))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path, graph_hash: Option<&str>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, graph_hash)
    }

    pub fn as_neural(&self) -> Result<&DistanceModel> {
        match self {
            DistanceIndex::Neural(m) => Ok(m),
            DistanceIndex::Gbdt(_) => Err(Error::InvalidArgument("gbdt index has no encoder".into())),
        }
    }
}
