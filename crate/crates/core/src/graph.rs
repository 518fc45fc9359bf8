//! pNN affinity graphs over raw samples and their symmetric normalization.
//!
//! Samples are the columns of a `d × n` data matrix. The raw graph `G`
//! links each sample to its `p` nearest neighbours (binary or self-tuning
//! RBF weights), is symmetrized by elementwise max and has a zero
//! diagonal. `W = D^{-1/2} G D^{-1/2}` is what the solvers consume.

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    Binary,
    #[default]
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Symmetric,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    /// Neighbours per sample.
    pub p: usize,
    pub weighting: Weighting,
    pub normalization: Normalization,
}

impl GraphConfig {
    /// RBF-weighted, symmetrically normalized graph with `p = default_p(n)`.
    pub fn for_samples(n: usize) -> Self {
        Self {
            p: default_p(n),
            weighting: Weighting::Rbf,
            normalization: Normalization::Symmetric,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 samples, got {n}")));
        }
        if self.p < 1 || self.p > n - 1 {
            return Err(Error::Config(format!(
                "neighbour count p={} outside [1, {}]",
                self.p,
                n - 1
            )));
        }
        Ok(())
    }
}

/// Symmetric pNN graph with nonnegative weights and zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAffinity<T>(Matrix<T>);

/// Degree-normalized affinity `W`: symmetric, nonnegative, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAffinity<T>(Matrix<T>);

fn check_affinity<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Input(format!(
            "affinity must be square, got {:?}",
            m.shape()
        )));
    }
    if !m.is_finite() {
        return Err(Error::Input("affinity has non-finite entries".into()));
    }
    if m.as_slice().iter().any(|&v| v < T::zero()) {
        return Err(Error::Input("affinity has negative entries".into()));
    }
    if m.diag().iter().any(|&v| v != T::zero()) {
        return Err(Error::Input("affinity diagonal must be zero".into()));
    }
    Ok(())
}

impl<T: Scalar> RawAffinity<T> {
    /// Wraps a nonnegative, zero-diagonal square matrix.
    pub fn new(g: Matrix<T>) -> Result<Self> {
        check_affinity(&g)?;
        Ok(Self(g))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix<T> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }
}

impl<T: Scalar> NormalizedAffinity<T> {
    /// Wraps a matrix that already satisfies the affinity invariants
    /// (symmetry checked to 1e-12 relative to the largest entry).
    pub fn new(w: Matrix<T>) -> Result<Self> {
        check_affinity(&w)?;
        let tol = T::lit(1e-12) * (T::one() + w.max_abs());
        if !w.is_symmetric(tol) {
            return Err(Error::Input("normalized affinity must be symmetric".into()));
        }
        Ok(Self(w))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix<T> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked_for_tests(w: Matrix<T>) -> Self {
        Self(w)
    }
}

/// `⌊log₂ n + 1⌋`, clamped to `[1, n − 1]`.
pub fn default_p(n: usize) -> usize {
    let bits = (usize::BITS - n.leading_zeros()) as usize;
    bits.clamp(1, n.saturating_sub(1).max(1))
}

/// Squared Euclidean distances between the columns of `x`.
pub fn pairwise_sq_dist<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let n = x.cols();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 samples, got {n}")));
    }
    let samples = x.transpose();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let a = samples.row(i);
        for j in i + 1..n {
            let d = a
                .iter()
                .zip(samples.row(j))
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum::<T>();
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

/// Indices of the `p` nearest other samples of each sample, nearest first.
/// Equal distances are ordered by sample index.
pub fn nearest_neighbors<T: Scalar>(sq_dist: &Matrix<T>, p: usize) -> Vec<Vec<usize>> {
    let n = sq_dist.rows();
    (0..n)
        .map(|i| {
            let row = sq_dist.row(i);
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
            idx.truncate(p);
            idx
        })
        .collect()
}

/// Per-sample RBF bandwidths: mean distance to the `p` nearest neighbours.
/// Zero bandwidths (duplicate points) fall back to the smallest positive
/// bandwidth, or to one when every bandwidth is zero.
fn local_bandwidths<T: Scalar>(sq_dist: &Matrix<T>, neighbors: &[Vec<usize>]) -> Vec<T> {
    let mut sigma: Vec<T> = neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let total: T = nb.iter().map(|&j| sq_dist[(i, j)].sqrt()).sum();
            total / T::from_count(nb.len())
        })
        .collect();
    let floor = sigma
        .iter()
        .copied()
        .filter(|&s| s > T::zero())
        .fold(None, |m: Option<T>, s| Some(m.map_or(s, |m| m.min(s))))
        .unwrap_or(T::one());
    for s in &mut sigma {
        if *s <= T::zero() {
            *s = floor;
        }
    }
    sigma
}

/// Builds the symmetrized pNN graph `G` of the columns of `x`.
pub fn build_pnn_graph<T: Scalar>(x: &Matrix<T>, cfg: &GraphConfig) -> Result<RawAffinity<T>> {
    cfg.validate(x.cols())?;
    let n = x.cols();
    let sq = pairwise_sq_dist(x)?;
    let neighbors = nearest_neighbors(&sq, cfg.p);
    let sigma = match cfg.weighting {
        Weighting::Rbf => local_bandwidths(&sq, &neighbors),
        Weighting::Binary => Vec::new(),
    };

    let mut g = Matrix::zeros(n, n);
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            g[(i, j)] = match cfg.weighting {
                Weighting::Binary => T::one(),
                Weighting::Rbf => (-sq[(i, j)] / (sigma[i] * sigma[j])).exp(),
            };
        }
    }
    for i in 0..n {
        g[(i, i)] = T::zero();
        for j in i + 1..n {
            let m = g[(i, j)].max(g[(j, i)]);
            g[(i, j)] = m;
            g[(j, i)] = m;
        }
    }
    RawAffinity::new(g)
}

/// `W = D^{-1/2} G D^{-1/2}`; zero-degree vertices keep all-zero rows.
pub fn normalize_affinity<T: Scalar>(g: &RawAffinity<T>) -> Result<NormalizedAffinity<T>> {
    let m = g.matrix();
    if !m.is_symmetric(T::lit(1e-9)) {
        return Err(Error::Input("affinity graph is not symmetric".into()));
    }
    let n = m.rows();
    let inv_sqrt_deg: Vec<T> = (0..n)
        .map(|i| {
            let d: T = m.row(i).iter().copied().sum();
            if d > T::zero() {
                T::one() / d.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    let w = Matrix::from_fn(n, n, |i, j| {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        m[(lo, hi)] * (inv_sqrt_deg[lo] * inv_sqrt_deg[hi])
    });
    NormalizedAffinity::new(w)
}

/// Graph construction followed by the configured normalization.
pub fn build_affinity<T: Scalar>(x: &Matrix<T>, cfg: &GraphConfig) -> Result<NormalizedAffinity<T>> {
    let g = build_pnn_graph(x, cfg)?;
    match cfg.normalization {
        Normalization::Symmetric => normalize_affinity(&g),
        Normalization::None => NormalizedAffinity::new(g.into_inner()),
    }
}
