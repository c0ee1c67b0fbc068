//! Tensor-train tensors and operators.

mod dense;
mod kernel;
mod matrix;
mod product;
mod snapshot;
mod tensor;

pub use dense::{DenseTensor, DENSE_LIMIT};
pub use kernel::Kernel;
pub use matrix::{MatrixKernel, Prefilter, Structure, TTMatrix};
pub use product::{hadamard_rounded, matvec, MatvecMode};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_VERSION};
pub use tensor::{TTTensor, TruncationControl};

pub(crate) use product::{map_fibers, shifted_weighted_sum, structured_product, ShiftTerm};
pub(crate) use dense::increment as dense_increment;
pub(crate) use tensor::round_window;
