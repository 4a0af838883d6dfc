//! Minimal reverse-mode automatic differentiation for training the generator.

mod adam;
mod conv;
mod generator;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use generator::{
    backward, forward_generator, Activation, ConvLayer, GeneratorArch, GeneratorGrads, GeneratorParams,
    GeneratorTape,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use tape::{GridAxis, Gradients, Tape, Var};
pub use tensor::Tensor;
