//! Unsupervised encoder inputs: random-walk skip-gram embeddings and the
//! coarse-to-fine partition tree.

pub mod partition;
pub mod skipgram;
pub mod walks;

use crate::error::{Error, Result};
use crate::nn::checkpoint::{Checkpoint, Tensor};
use crate::nn::DenseMatrix;

pub use partition::{aggregate_rne_embedding, hierarchical_partition, rne_level_count, PartitionTree};
pub use skipgram::{skipgram_train, SkipGramConfig};
pub use walks::{random_walks, WalkCorpus};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub values: DenseMatrix,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn zeros(n: usize, d: usize, trainable: bool) -> Self {
        EmbeddingTable { values: DenseMatrix::zeros(n, d), trainable }
    }

    pub fn n(&self) -> usize {
        self.values.rows
    }

    pub fn d(&self) -> usize {
        self.values.cols
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[f64] {
        self.values.row(v)
    }

    /// Bytes at the 32-bit storage width.
    pub fn stored_bytes(&self) -> usize {
        4 * self.values.data.len()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            serde_json::json!({ "kind": "embedding", "n": self.n(), "d": self.d(), "trainable": self.trainable }),
            vec![Tensor::f32_from("embedding", vec![self.n(), self.d()], &self.values.data)],
        )
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let t = ck.get("embedding")?;
        let dims = &t.dims;
        if dims.len() != 2 {
            return Err(Error::Checkpoint("embedding tensor must be 2-D".into()));
        }
        let n = ck.manifest["n"].as_u64().map(|x| x as usize);
        let d = ck.manifest["d"].as_u64().map(|x| x as usize);
        if n != Some(dims[0]) || d != Some(dims[1]) {
            return Err(Error::Checkpoint("embedding header disagrees with tensor shape".into()));
        }
        Ok(EmbeddingTable {
            values: DenseMatrix::from_vec(dims[0], dims[1], t.data.to_f64())?,
            trainable: ck.manifest["trainable"].as_bool().unwrap_or(false),
        })
    }
}
