//! A small CNN engine for phase-map inputs: 2×1 convolutions, dense layers,
//! sigmoid outputs, binary cross-entropy, dropout and Adam, with exact
//! hand-written backpropagation.

mod adam;
mod dropout;
mod io;
pub mod layers;
mod loss;
mod model;
mod scalar;
mod spec;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use dropout::{dropout, dropout_mask, Mode};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, relu_backward, relu_forward, sigmoid,
};
pub use loss::{bce_loss, BCE_EPS};
pub use model::Network;
pub use scalar::Scalar;
pub use spec::{LayerShape, ModelSpec};
pub use tensor::Tensor;
pub use train::{evaluate_loss, train, EpochLog, TrainConfig, TrainReport};
