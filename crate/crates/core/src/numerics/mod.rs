//! Dense linear algebra, parameter storage with manual gradients,
//! optimizers and a finite-difference gradient checker.
//!
//! Everything computes in `f64`; artifacts round to `f32` only when
//! serialized.

mod gradcheck;
mod matrix;
mod optim;
mod params;
mod softmax;

pub use gradcheck::{
    grad_check, grad_check_filtered, relative_error, GradCheckEntry, GradCheckReport,
    REL_ERROR_FLOOR,
};
pub use matrix::{axpy, dot, squared_distance, DenseMatrix};
pub use optim::{optimizer_step, OptimizerConfig, OptimizerKind};
pub use params::{GradBuffer, ParamId, ParamStore};
pub use softmax::{log_add, log_softmax, log_sum_exp, softmax, softmax_xent};
