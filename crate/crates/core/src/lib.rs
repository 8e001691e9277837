//! Scalable MAX-VAR generalized canonical correlation analysis.
//!
//! Given views `X_1, …, X_I` (each `L × M_i`, sharing the `L` rows), find an
//! orthonormal `G` (`L × K`) and per-view maps `Q_i` minimizing
//! `Σ_i ½‖X_i Q_i − G‖_F² + g_i(Q_i)`. [`solver`] does this by alternating
//! proximal-gradient steps on `Q_i` with Procrustes steps on `G`, touching the
//! data only through sparse products. [`baselines`] holds the exact
//! eigen-decomposition solution and the MVLSA approximation for comparison.
//!
//! ```
//! use maxvar::{gen, solve, SolverConfig, SynthConfig, RegularizerSpec};
//!
//! let mut cfg = SynthConfig::fig3(1);
//! cfg.l = 60;
//! cfg.m = 10;
//! cfg.n = 5;
//! let data = gen(&cfg).unwrap();
//! let out = solve(&data.views, SolverConfig::new(3, vec![RegularizerSpec::ridge(0.1)])).unwrap();
//! assert!(out.state.g.orthonormality_defect() < 1e-10);
//! ```

pub mod baselines;
pub mod error;
pub mod io;
pub mod linalg;
pub mod regularizers;
pub mod solver;
pub mod synth;
pub mod wordsim;

pub use baselines::{
    eigen_maxvar, mvlsa, rate_fit, ridge_refit, subspace_distance, EigenOracleResult, MvlsaConfig, RateFit,
};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SparseMatrix, ViewCollection, ViewMatrix};
pub use regularizers::{prox, reg_value, RegularizerKind, RegularizerSpec};
pub use solver::{
    g_update, objective, q_inner_loop, solve, warm_start_from, z_potential, Init, IterateDiagnostics, SolveOutput,
    Solver, SolverConfig, SolverState, Theorem1Certificate,
};
pub use synth::{feature_metrics, gen, FeatureMetrics, OutlierSpec, SynthConfig, SynthDataset};
pub use wordsim::{cosine, evaluate, spearman, Embeddings, TaskReport};
