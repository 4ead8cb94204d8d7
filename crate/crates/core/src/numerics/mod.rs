//! Dense matrices, smooth reductions and the gradient tape.

pub mod gradcheck;
mod matrix;
mod smooth;
pub mod tape;

pub use matrix::Matrix;
pub use smooth::{boltzmann_max, matpow_sum, sigmoid, sigmoid_elementwise, smax, softmin};
pub use tape::{Gradients, Reduce, Tape, Var};
