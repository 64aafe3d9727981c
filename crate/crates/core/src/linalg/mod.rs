//! Complex sparse linear algebra: CSR storage, sparse LU with fill-reducing
//! orderings, weighted inner products and operator norms, and a dense
//! reference implementation for cross-checks.
//!
//! Inner products are conjugate-linear in the second argument:
//! `inner(x, y) = Σ x_i conj(y_i)`, and the weighted form is
//! `weighted_inner(D, U, V) = ⟨D V, U⟩ = U^H D V`.

mod dense;
mod lu;
mod market;
mod norms;
mod ordering;
mod sparse;
pub mod vector;

pub use dense::{dense_hermitian_eigen, DenseOracle, DENSE_CEILING};
pub use lu::{Factorization, PIVOT_TOLERANCE};
pub use market::{read_matrix_market, write_matrix_market};
pub(crate) use norms::lanczos_norm;
pub use norms::{
    extreme_eigenvalues, operator_norm_between, operator_norm_weighted, weighted_inner,
    weighted_norm, FnOperator, LinearOperator, Metric, NormEstimate, NormMode,
};
pub use ordering::{minimum_degree, nested_dissection, Ordering};
pub use sparse::{CsrMatrix, TripletBuilder};
