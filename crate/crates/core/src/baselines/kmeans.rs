//! Lloyd's k-means with k-means++ seeding on the columns of a data matrix.
//!
//! Samples are visited in lexicographic order of their coordinates, so the
//! result depends only on the point set and the seed: permuting the input
//! columns permutes the returned labels the same way.

use std::cmp::Ordering;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub n_init: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 300,
            n_init: 1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub labels: Vec<usize>,
    pub inertia: T,
    /// Inertia after each Lloyd iteration of the best restart.
    pub history: Vec<T>,
    pub iterations: usize,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum()
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(u, v)| u.partial_cmp(v).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// k-means++: first centre uniform, the rest proportional to squared
/// distance from the nearest chosen centre.
fn seed_centroids<T: Scalar>(points: &Matrix<T>, k: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centroids.row(0)).as_f64())
        .collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            // Every point already coincides with a centre.
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            let d = sq_dist(points.row(i), centroids.row(c)).as_f64();
            if d < *best {
                *best = d;
            }
        }
    }
    centroids
}

fn assign<T: Scalar>(points: &Matrix<T>, centroids: &Matrix<T>, labels: &mut [usize]) -> bool {
    let mut changed = false;
    for (i, label) in labels.iter_mut().enumerate() {
        let p = points.row(i);
        let mut best = 0;
        let mut best_d = sq_dist(p, centroids.row(0));
        for c in 1..centroids.rows() {
            let d = sq_dist(p, centroids.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        if *label != best {
            *label = best;
            changed = true;
        }
    }
    changed
}

/// Recomputes centroids as cluster means. An empty cluster takes over the
/// point farthest from its current centroid. Returns whether any cluster
/// had to be reseeded.
fn update_centroids<T: Scalar>(points: &Matrix<T>, labels: &mut [usize], centroids: &mut Matrix<T>) -> bool {
    let k = centroids.rows();
    let mut reseeded = false;
    loop {
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::<T>::zeros(k, points.cols());
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            for (c, &count) in counts.iter().enumerate() {
                let inv = T::one() / T::from_count(count);
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
            return reseeded;
        };
        // Farthest point among clusters that can spare one.
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let mean: Vec<T> = sums.row(l).iter().map(|&s| s / T::from_count(counts[l])).collect();
            let d = sq_dist(points.row(i), &mean);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n guarantees a cluster with two points");
        labels[i] = empty;
        reseeded = true;
    }
}

fn inertia<T: Scalar>(points: &Matrix<T>, centroids: &Matrix<T>, labels: &[usize]) -> T {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .sum()
}

fn lloyd<T: Scalar>(points: &Matrix<T>, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> KMeansResult<T> {
    let n = points.rows();
    let mut centroids = seed_centroids(points, cfg.k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..cfg.max_iter.max(1) {
        iterations += 1;
        let changed = assign(points, &centroids, &mut labels);
        let reseeded = update_centroids(points, &mut labels, &mut centroids);
        history.push(inertia(points, &centroids, &labels));
        if !changed && !reseeded {
            break;
        }
    }
    KMeansResult {
        inertia: inertia(points, &centroids, &labels),
        labels,
        history,
        iterations,
    }
}

/// Clusters the columns of `x` (`d × n`) into `cfg.k` groups.
pub fn kmeans<T: Scalar>(x: &Matrix<T>, cfg: &KMeansConfig) -> Result<KMeansResult<T>> {
    let n = x.cols();
    if cfg.k < 1 || cfg.k > n {
        return Err(Error::Config(format!("k={} outside [1, {n}]", cfg.k)));
    }
    let samples = x.transpose();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(samples.row(a), samples.row(b)));
    let points = Matrix::from_fn(n, x.rows(), |i, j| samples[(order[i], j)]);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult<T>> = None;
    for _ in 0..cfg.n_init.max(1) {
        let run = lloyd(&points, cfg, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    let mut labels = vec![0; n];
    for (sorted_pos, &original) in order.iter().enumerate() {
        labels[original] = best.labels[sorted_pos];
    }
    best.labels = labels;
    Ok(best)
}
