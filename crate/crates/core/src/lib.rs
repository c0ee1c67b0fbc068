//! Low-rank tensor-train algebra and a split-step semi-Lagrangian
//! Vlasov–Poisson solver built on it.

pub mod advection;
pub mod error;
pub mod field;
pub mod grid;
pub mod interpolation;
pub mod linalg;
pub mod reference;
pub mod simulation;
pub mod tt;

pub use error::{Error, Result};
pub use tt::{
    hadamard_rounded, matvec, DenseTensor, Kernel, MatrixKernel, MatvecMode, Prefilter, Structure, TTMatrix, TTTensor,
    TruncationControl,
};
