//! Dynamics clustering: encode trajectories, assign them to a noisy and a
//! clean centroid, sharpen the assignments into targets, and train with the
//! clustering + alignment objective while selecting the epoch by the
//! label-free validation metric.

pub mod checkpoint;
pub mod clustering;
pub mod fit;
pub mod model;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use clustering::{
    alignment_loss, assign, cluster_loss, cosine_distance, target_distribution, validation_metric, verdict,
    Assignment,
};
pub use fit::{detect, fit, fit_and_detect, select_epoch, Detection, FitHistory, FitOutcome, RowAssignment};
pub use model::{build_encoder, init_centroids, ClusterModel, EncoderConfig};
