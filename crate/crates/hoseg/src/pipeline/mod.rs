//! The sequential hand -> contact boundary -> interacting object prediction
//! pipeline, its parallel-decode baseline, and their training/inference
//! loops over pluggable dense predictors.

pub mod checkpoint;
pub mod infer;
pub mod loss;
pub mod predictor;
pub mod stage;
pub mod tensor;
mod train;

pub use checkpoint::{
    load_checkpoint, load_sequential, save_checkpoint, save_sequential, PredictorRole,
};
pub use infer::{
    argmax_classes, run_parallel_inference, run_parallel_on_tensor, run_sequential_inference,
    run_sequential_on_tensor, SequentialPredictors, DEFAULT_BOUNDARY_THRESHOLD,
};
pub use loss::{boundary_loss, cross_entropy_with_grad, softmax};
pub use predictor::{ConvNet, ConvNetShape, DensePredictor, TrainablePredictor};
pub use stage::{assemble_stage_inputs, boundary_plane, hand_planes, StageSpec, StageTarget};
pub use tensor::Tensor;
pub use train::{
    train_parallel_decoder, train_sequential_pipeline, train_stage, LoadedDataset, LossCurve,
    PriorPlanes, TrainConfig, TrainSample,
};
