//! The joint attribute/graph deep embedded clustering model.

pub mod assign;
pub mod checkpoint;
pub mod config;
pub mod kmeans;
pub mod model;
pub mod train;

pub use assign::{hard_assign, kl_divergence, soft_assignment, target_distribution, SoftAssignment};
pub use checkpoint::{load_checkpoint, load_checkpoint_like, save_checkpoint};
pub use config::{AeConfig, GaeConfig, LossWeights, TrainConfig};
pub use kmeans::{kmeans, KMeansResult};
pub use model::{
    ae_forward, ae_recon_loss, evaluate, gae_recon_loss, gcn_forward, inner_product_decode,
    total_loss, ClusterCenters, Evaluation, GraphInput, LossTerms, ModelGrads, ModelState,
    ParamBlocks, Targets, Term,
};
pub use train::{
    extract_outputs, fit, pretrain, train, EpochRecord, FitResult, History, Outputs,
    PretrainReport, Variant,
};
