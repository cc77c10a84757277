//! Learned and classical shortest-path distance indexes for road networks:
//! graph loading, exact oracles, workload construction, a model zoo of
//! embedding-plus-decoder indexes, gradient-boosted trees, and a
//! benchmark harness measuring accuracy, precomputation time, query
//! latency and index size.

pub mod bench;
pub mod cluster;
pub mod error;
pub mod gbdt;
pub mod graph;
pub mod index;
pub mod nn;
pub mod opcount;
pub mod oracle;
pub mod pretrain;
pub mod synthetic;
pub mod util;
pub mod workload;
pub mod zoo;

pub use error::{Error, Result};
pub use index::{DistanceIndex, IndexScratch};
