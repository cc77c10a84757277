//! Encoder-decoder distance models, their training loops and the model
//! registry.

pub mod decoder;
pub mod fusion;
pub mod gcn;
pub mod model;
pub mod ndist2vec;
pub mod path2vec;
pub mod registry;
pub mod train;
pub mod update;
pub mod vdist2vec;

pub use fusion::FusionOp;
pub use model::{DistanceModel, Decoder, Encoder, QueryScratch};
pub use registry::{build_model, default_train_config, BuildContext, Built, MODEL_NAMES};
pub use train::{train_model, TrainConfig, TrainExtras, TrainingCurve};
pub use update::update_heuristic_predict;
