//! Small dense linear algebra, scalar special functions, one-dimensional
//! quadrature and the deterministic random number generator.

mod cholesky;
mod matrix;
mod quad;
mod rng;
mod special;
mod svd;

pub use cholesky::cholesky;
pub use matrix::Matrix;
pub use quad::{adaptive_quad, gauss_hermite, GaussHermiteRule, QuadratureRule};
pub use rng::{standard_normal, Rng};
pub use special::{normal_cdf, normal_pdf, normal_quantile, LN_SQRT_2PI};
pub use svd::{pinv, pinv_balanced, singular_values, DEFAULT_PINV_TOL};
