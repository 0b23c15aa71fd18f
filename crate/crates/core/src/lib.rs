//! Exponential-sum approximations of rough Volterra kernels, exact L2 error
//! evaluation, and multifactor Euler schemes for stochastic Volterra
//! equations (rough Heston, rough Bergomi).
pub mod bergomi;
pub mod error;
pub mod kernel;
pub mod mc;
pub mod numerics;
pub mod quadrature;
pub mod schemes;

pub use error::{Error, Result};
