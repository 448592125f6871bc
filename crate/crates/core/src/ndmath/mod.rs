//! Numerical core: dense matrices, factorizations, log-domain reductions,
//! seeded random streams and Gaussian sampling.

mod linalg;
mod matrix;
mod random;
mod special;

pub(crate) use linalg::logsumexp_unchecked;
pub use linalg::{
    chol_log_det, cholesky, logsumexp, mvn_log_density, nearest_correlation, solve_lower, symmetric_eigen,
    DEFAULT_EIG_FLOOR,
};
pub use matrix::Matrix;
pub(crate) use matrix::{gemm, MatView, MatViewMut, Op};
pub use random::{mix_seed, sample_mvn, Rng};
pub use special::{norm_cdf, norm_log_pdf, norm_quantile};
