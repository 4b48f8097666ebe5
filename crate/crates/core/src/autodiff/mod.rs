//! Reverse-mode automatic differentiation over dense `f64` tensors, plus
//! sparse × dense products for graph propagation.
//!
//! A [`Tape`] is rebuilt for every forward pass. Leaves are either
//! parameters (receive gradients) or constants (always zero gradient).
//! [`Tape::backward`] walks the recorded nodes in exact reverse order.

mod gradcheck;
mod sparse;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, finite_diff_check_many, relative_error, relative_error_with_floor, OBJECTIVE_FLOOR_SCALE, GradCheckReport, REL_ERROR_FLOOR};
pub use sparse::SparseMatrix;
pub use tape::{broadcast_shape, Gradients, Tape, Var};
pub use tensor::Tensor;
