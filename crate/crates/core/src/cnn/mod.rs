//! Small convolutional feature extractors trained from scratch.
//!
//! Models are plain layer stacks ending in a softmax. Features for fusion are
//! read from a named layer ("fc1" for the 2-D extractor) after its ReLU.

mod gradcheck;
mod layers;
mod model;
mod serialize;
mod tensor;
mod train;

pub use gradcheck::{
    gradient_check, gradient_check_with, GradCheckOptions, GradCheckReport, LayerGradCheck,
};
pub(crate) use model::argmax;
pub use model::{
    build_1d_cnn, build_1d_cnn_with, build_signal_cnn, build_signal_cnn_with, extract_features,
    CnnModel, FeatureMatrix, LayerKind, LayerParams, LayerSpec,
};
pub use serialize::MODEL_FORMAT_VERSION;
pub use tensor::{Shape, Tensor};
pub use train::{train, train_log_csv, write_train_log, EpochLog, TrainConfig};

/// Feature tap of the 2-D extractors.
pub const FEATURE_LAYER: &str = "fc1";
