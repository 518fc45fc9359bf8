//! Clustering-aware graph learning.
//!
//! Given samples as the columns of a `d × n` matrix `X` and a normalized
//! pNN affinity `W`, [`solver::solve`] learns a nonnegative, zero-diagonal
//! similarity matrix `S` together with a membership factor `V ≥ 0` whose
//! row-wise argmax is the clustering. SymNMF and k-means baselines, the
//! usual external clustering indices and a rank-sum test are included.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the double-precision instantiation used by the
//! benchmark harness.

pub mod baselines;
pub mod dense;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod scalar;
pub mod solver;

pub use dense::Matrix;
pub use error::{Error, Result};
pub use graph::{
    build_affinity, build_pnn_graph, default_p, normalize_affinity, pairwise_sq_dist, GraphConfig,
    NormalizedAffinity, Normalization, RawAffinity, Weighting,
};
pub use metrics::{evaluate, MetricReport};
pub use scalar::Scalar;
pub use solver::{
    assign_clusters, solve, GramSplit, MembershipMatrix, SimilarityMatrix, Solution, SolveTrace,
    SolverConfig, Termination,
};

/// Raw features, one sample per column.
pub type DataMatrix<T> = Matrix<T>;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type DataMatrix64 = DataMatrix<f64>;
pub type Affinity64 = NormalizedAffinity<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type Solution64 = Solution<f64>;
pub type SolveTrace64 = SolveTrace<f64>;
