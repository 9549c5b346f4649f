//! Label/acoustic auto-encoder with a residual vector-quantized bottleneck.

pub mod acoustic;
pub mod check;
pub mod ctc;
pub mod label;
pub mod model;
pub mod train;

pub use acoustic::{AcousticCache, AcousticNet, AcousticNetConfig};
pub use check::{loss_gradient_checks, TermCheck};
pub use ctc::{ctc_align_first_emission, ctc_loss, min_frames, AlignmentInfo, CtcOutput};
pub use label::{LabelDecoder, LabelEncoder, LabelEncoderCache, CAUSAL_WIDTH};
pub use model::{
    acoustic_embedding_mixture, AcousticSettings, AutoEncoderModel, LabelEncoding, LossBreakdown,
    LossWeights, ModelConfig, UtteranceOutcome,
};
pub use train::{train_autoencoder, EpochReport, TrainConfig, TrainingReport};
