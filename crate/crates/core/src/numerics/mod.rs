//! Numerical building blocks shared by the kernel, quadrature and simulation
//! modules: special functions, a scalar minimizer, an adaptive quadrature
//! oracle, a clipped Cholesky factorization and Gaussian helpers.
//!
//! Everything here is a pure function of its inputs.

mod gaussian;
mod linalg;
mod optimize;
mod quad;
mod special;

pub use gaussian::{norm_cdf, norm_inv_cdf, norm_pdf};
pub use linalg::{psd_factorize, SquareMatrix};
pub use optimize::{minimize_scalar, Minimum, GOLDEN_MAX_ITER};
pub use quad::{integrate, QuadTolerance};
pub use special::{
    gamma_fn, ln_gamma, lower_incomplete_gamma, regularized_lower_gamma,
    upper_incomplete_gamma_scaled,
};

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
