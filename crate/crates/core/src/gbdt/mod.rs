//! Gradient-boosted regression trees over hand-crafted pair features.

pub mod boost;
pub mod features;
pub mod model;
pub mod tree;

pub use boost::{fit_stage, fit_two_stage, BoostCurve, BoostParams, BoostedEnsemble, TwoStage};
pub use features::{cosine, FeatureMode, PairFeaturizer};
pub use model::{feature_matrix, fit_gbdt_model, GbdtConfig, GbdtModel, GbdtScratch, GBDT_LANDMARKS};
pub use tree::{FeatureMatrix, QuantileBins, RegressionTree};
