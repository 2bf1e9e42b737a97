//! Numeric kernels shared by the models and the explanatory fit.

pub mod degree_fit;
pub mod ols;
pub mod sparse;
pub mod stats;
pub mod svd;

pub use degree_fit::{fit_degree_distribution, DegreeDistributionFit, DistributionModel};
pub use ols::{ols_fit, OlsFit};
pub use sparse::CsrMatrix;
pub use stats::{pearson, pearson_matrix, student_t_two_sided_p};
pub use svd::{truncated_svd, SvdOptions, TruncatedSvd};
