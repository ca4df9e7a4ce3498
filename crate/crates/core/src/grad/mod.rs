//! Reverse-mode differentiation over dense matrices, plus Adam.

mod adam;
pub mod checkpoint;
mod graph;
mod tensor;

pub use adam::Adam;
pub use graph::{GammaDraw, Graph, ParamId, ParamStore, QuantileDraw, RngDraw, Value, MIN_GAMMA_SAMPLE};
pub use tensor::Tensor;
