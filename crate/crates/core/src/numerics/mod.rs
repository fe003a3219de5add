//! Dense tensor math, layer primitives with hand-written backward passes,
//! initialization, and the finite-difference gradient oracle.

mod conv;
mod dense;
mod gradcheck;
mod init;
mod ops;
mod tensor;

pub use conv::{Conv2DGrads, Conv2DLayer};
pub use dense::{Activation, DenseGrads, DenseLayer};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error, REL_ERR_FLOOR};
pub use init::he_uniform_init;
pub use ops::{
    l2_normalize, l2_normalize_rows, mean_square, relu, relu_backward, ReluOutput,
    NORMALIZE_EPS,
};
pub use tensor::{matmul, Tensor};

pub(crate) use tensor::{gemm, MatView};
