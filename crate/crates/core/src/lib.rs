#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN
pub mod error;
pub mod folding;
pub mod itebd;
pub mod mps;
pub mod oracles;
pub mod tensor;
pub mod transverse;
pub mod trotter;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
