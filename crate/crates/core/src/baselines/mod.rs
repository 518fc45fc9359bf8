//! Reference clusterers: SymNMF on a fixed graph and Lloyd's k-means.

mod kmeans;
mod symnmf;

pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use symnmf::{symnmf_solve, symnmf_solve_from, SymNmfConfig, SymNmfSolution};
