//! Desk-scale contrastive pretraining and linear evaluation.

pub mod augment;
pub mod encoder;
pub mod lineval;
pub mod loss;
pub mod train;

pub use augment::{
    augment, flip_horizontal, gaussian_blur, standardize, AugmentConfig, ChannelStats,
};
pub use encoder::{Activation, EncoderParams, EncoderShape};
pub use lineval::{
    linear_eval, linear_probe, EvalViews, FeatureLayer, LinearEvalConfig, LinearEvalReport,
};
pub use loss::{
    cosine_sim, nt_xent_grad, nt_xent_loss, nt_xent_loss_and_grad, EmbeddingBatch, LossReport,
};
pub use train::{pretrain, train_step, PretrainResult, TrainConfig};
