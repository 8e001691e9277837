//! Dense and sparse containers plus the kernels the solver and baselines use.
//!
//! Nothing on the solver path forms an `L × L` or `M_i × M_i` dense matrix:
//! the sparse products stream the compressed rows once and the dense
//! factorizations only ever see thin `L × K` blocks. The dense
//! eigen-decomposition is reserved for the oracle and is capped.

mod decomp;
mod dense;
mod sparse;

pub use decomp::{
    econ_svd, polar_factor, random_orthonormal, spd_solve, spectral_norm, sym_eig_topk,
    sym_eig_topk_capped, EconSvd, SymEig, DEFAULT_DENSE_CAP,
};
pub use dense::DenseMatrix;
pub use sparse::{
    estimate_lipschitz, spmm, spmm_t, SparseMatrix, ViewCollection, ViewMatrix,
    LIPSCHITZ_INFLATION, LIPSCHITZ_MAX_ITERS, LIPSCHITZ_TOL,
};
