//! Joint learning of a similarity graph `S` and a membership factor `V`.
//!
//! Minimizes
//!
//! ```text
//! α‖X − XS‖²_F + ‖S − VVᵀ‖²_F + β‖S − W‖²_F   s.t.  S ≥ 0, V ≥ 0, diag(S) = 0
//! ```
//!
//! by alternating multiplicative updates: a square-root rule for `S` that
//! splits `XᵀX` into its positive and negative parts, then a fourth-root
//! rule for `V`. Both rules are entrywise products with nonnegative
//! factors, so a zero diagonal stays zero and positive entries stay
//! positive. The objective is non-increasing under each half-step.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{axpy, Matrix};
use crate::error::{Error, Result};
use crate::graph::NormalizedAffinity;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Weight of the self-expression residual `‖X − XS‖²`.
    pub alpha: T,
    /// Weight of the prior-graph residual `‖S − W‖²`.
    pub beta: T,
    pub clusters: usize,
    pub tol: T,
    pub max_iter: usize,
    pub seed: u64,
    /// Added to every update denominator.
    pub denom_guard: T,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(alpha: T, beta: T, clusters: usize) -> Self {
        Self {
            alpha,
            beta,
            clusters,
            tol: T::lit(1e-4),
            max_iter: 1000,
            seed: 0,
            denom_guard: T::lit(1e-12),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha >= T::zero() && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= T::zero() && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.clusters < 2 || self.clusters > n {
            return Err(Error::Config(format!(
                "cluster count {} outside [2, {n}]",
                self.clusters
            )));
        }
        if self.tol.is_nan() || self.tol <= T::zero() {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.denom_guard.is_nan() || self.denom_guard <= T::zero() {
            return Err(Error::Config("denominator guard must be positive".into()));
        }
        Ok(())
    }
}

/// Elementwise positive and negative parts of the Gram matrix `XᵀX`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSplit<T> {
    pub pos: Matrix<T>,
    pub neg: Matrix<T>,
    x: Matrix<T>,
    /// Nonzero entries of `neg` per row, or of `pos` when `neg_sparser`
    /// is false.
    support: Vec<Vec<usize>>,
    neg_sparser: bool,
}

/// `pos = (|XᵀX| + XᵀX)/2`, `neg = (|XᵀX| − XᵀX)/2`.
pub fn gram_split<T: Scalar>(x: &Matrix<T>) -> GramSplit<T> {
    let gram = x.t_matmul(x).expect("XᵀX is always conformable");
    let half = T::lit(0.5);
    let pos = gram.map(|g| (g.abs() + g) * half);
    let neg = gram.map(|g| (g.abs() - g) * half);
    let nnz = |m: &Matrix<T>| m.as_slice().iter().filter(|&&v| v > T::zero()).count();
    let neg_sparser = nnz(&neg) <= nnz(&pos);
    let sparse = if neg_sparser { &neg } else { &pos };
    let support = (0..sparse.rows())
        .map(|i| (0..sparse.cols()).filter(|&k| sparse[(i, k)] > T::zero()).collect())
        .collect();
    GramSplit {
        pos,
        neg,
        x: x.clone(),
        support,
        neg_sparser,
    }
}

impl<T: Scalar> GramSplit<T> {
    pub fn n(&self) -> usize {
        self.pos.rows()
    }

    pub fn is_nonnegative_part_free(&self) -> bool {
        self.neg.as_slice().iter().all(|&v| v == T::zero())
    }

    /// `(pos · s, neg · s)`. The sparser part is multiplied entry by entry
    /// and the other follows from `XᵀX·s = pos·s − neg·s`, where `XᵀX·s`
    /// costs only `O(d n²)` as `Xᵀ(X s)`.
    pub fn products(&self, s: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
        let n = self.n();
        let sparse = if self.neg_sparser { &self.neg } else { &self.pos };
        let mut direct = Matrix::zeros(n, s.cols());
        for (i, cols) in self.support.iter().enumerate() {
            let row = sparse.row(i);
            let acc = direct.row_mut(i);
            let mut quads = cols.chunks_exact(4);
            for q in quads.by_ref() {
                let (a, b, c, d) = (row[q[0]], row[q[1]], row[q[2]], row[q[3]]);
                let (sa, sb, sc, sd) = (s.row(q[0]), s.row(q[1]), s.row(q[2]), s.row(q[3]));
                for ((((o, &u), &v), &w), &z) in acc.iter_mut().zip(sa).zip(sb).zip(sc).zip(sd) {
                    *o += a * u + b * v + c * w + d * z;
                }
            }
            for &k in quads.remainder() {
                axpy(acc, row[k], s.row(k));
            }
        }
        let ks = self
            .x
            .t_matmul(&self.x.matmul(s).expect("X·S"))
            .expect("Xᵀ·(XS)");
        // Rounding in the difference must not push a nonnegative product
        // below zero.
        let other = if self.neg_sparser {
            ks.zip_map(&direct, |k, d| (k + d).max(T::zero()))
        } else {
            direct.zip_map(&ks, |d, k| (d - k).max(T::zero()))
        }
        .expect("same shape");
        if self.neg_sparser {
            (other, direct)
        } else {
            (direct, other)
        }
    }
}

/// Learned similarity graph: nonnegative, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T>(Matrix<T>);

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn new(s: Matrix<T>) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::Input(format!("similarity must be square, got {:?}", s.shape())));
        }
        if !s.is_finite() || s.as_slice().iter().any(|&v| v < T::zero()) {
            return Err(Error::Input("similarity must be finite and nonnegative".into()));
        }
        if s.diag().iter().any(|&v| v != T::zero()) {
            return Err(Error::Input("similarity diagonal must be zero".into()));
        }
        Ok(Self(s))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix<T> {
        self.0
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> T {
        let n = self.0.rows();
        let mut m = T::infinity();
        for i in 0..n {
            for (j, &v) in self.0.row(i).iter().enumerate() {
                if i != j && v < m {
                    m = v;
                }
            }
        }
        m
    }
}

/// Cluster-membership factor `V` (`n × c`), strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix<T>(Matrix<T>);

impl<T: Scalar> MembershipMatrix<T> {
    pub fn new(v: Matrix<T>) -> Result<Self> {
        if !v.is_finite() || v.as_slice().iter().any(|&x| x <= T::zero()) {
            return Err(Error::Input("membership must be finite and strictly positive".into()));
        }
        Ok(Self(v))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix<T> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    MaxIter,
}

/// Per-iteration record of a solve.
///
/// `objective` holds the value at initialization followed by one value per
/// iteration; the delta vectors hold one entry per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace<T> {
    pub objective: Vec<T>,
    pub s_delta: Vec<T>,
    pub v_delta: Vec<T>,
    pub iterations: usize,
    pub terminated_by: Termination,
}

impl<T: Scalar> SolveTrace<T> {
    /// Largest relative increase `obj(t+1) − obj(t)` scaled by
    /// `1 + |obj(t)|`; non-positive for a monotone trace.
    pub fn worst_ascent(&self) -> T {
        self.objective
            .windows(2)
            .map(|w| (w[1] - w[0]) / (T::one() + w[0].abs()))
            .fold(T::neg_infinity(), T::max)
    }

    pub fn is_monotone(&self, slack: T) -> bool {
        self.objective.windows(2).all(|w| w[1] <= w[0] + slack * (T::one() + w[0].abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub similarity: SimilarityMatrix<T>,
    pub membership: MembershipMatrix<T>,
    pub trace: SolveTrace<T>,
}

impl<T: Scalar> Solution<T> {
    pub fn labels(&self) -> Vec<usize> {
        assign_clusters(&self.membership)
    }
}

/// Iterate handed to a solve observer after each full sweep.
pub struct IterationState<'a, T> {
    pub iteration: usize,
    pub similarity: &'a SimilarityMatrix<T>,
    pub membership: &'a MembershipMatrix<T>,
    pub objective: T,
}

fn check_shapes<T: Scalar>(
    x: &Matrix<T>,
    w: &NormalizedAffinity<T>,
    s: &SimilarityMatrix<T>,
    v: &MembershipMatrix<T>,
) -> Result<()> {
    let n = x.cols();
    let shape_err = |op, left, right| Err(Error::Shape { op, left, right });
    if w.matrix().shape() != (n, n) {
        return shape_err("affinity", x.shape(), w.matrix().shape());
    }
    if s.matrix().shape() != (n, n) {
        return shape_err("similarity", x.shape(), s.matrix().shape());
    }
    if v.matrix().rows() != n {
        return shape_err("membership", x.shape(), v.matrix().shape());
    }
    Ok(())
}

/// `α‖X − XS‖² + ‖S − VVᵀ‖² + β‖S − W‖²`.
pub fn objective_value<T: Scalar>(
    x: &Matrix<T>,
    w: &NormalizedAffinity<T>,
    s: &SimilarityMatrix<T>,
    v: &MembershipMatrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<T> {
    check_shapes(x, w, s, v)?;
    let s = s.matrix();
    let v = v.matrix();
    let self_expr = if cfg.alpha > T::zero() {
        x.sub(&x.matmul(s)?)?.frobenius_norm_sq()
    } else {
        T::zero()
    };
    let fit = s.sub(&v.matmul_t(v)?)?.frobenius_norm_sq();
    let prior = s.sub(w.matrix())?.frobenius_norm_sq();
    Ok(cfg.alpha * self_expr + fit + cfg.beta * prior)
}

/// Numerator and denominator of the `S` rule.
fn similarity_terms<T: Scalar>(
    s: &Matrix<T>,
    v: &Matrix<T>,
    split: &GramSplit<T>,
    w: &Matrix<T>,
    cfg: &SolverConfig<T>,
) -> (Matrix<T>, Matrix<T>) {
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let mut num = v.matmul_t(v).expect("V·Vᵀ");
    let mut den = s.scale(T::one() + beta);
    if alpha > T::zero() {
        let (ps, ns) = split.products(s);
        for (((nm, &p), &nsv), &wv) in num
            .as_mut_slice()
            .iter_mut()
            .zip(split.pos.as_slice())
            .zip(ns.as_slice())
            .zip(w.as_slice())
        {
            *nm += alpha * (p + nsv) + beta * wv;
        }
        for ((d, &psv), &ng) in den
            .as_mut_slice()
            .iter_mut()
            .zip(ps.as_slice())
            .zip(split.neg.as_slice())
        {
            *d += alpha * (psv + ng);
        }
    } else {
        for (nm, &wv) in num.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *nm += beta * wv;
        }
    }
    (num, den)
}

/// One square-root multiplicative step on `S` with `V` fixed.
pub fn update_similarity<T: Scalar>(
    s: &SimilarityMatrix<T>,
    v: &MembershipMatrix<T>,
    split: &GramSplit<T>,
    w: &NormalizedAffinity<T>,
    cfg: &SolverConfig<T>,
) -> SimilarityMatrix<T> {
    let s = s.matrix();
    let (num, den) = similarity_terms(s, v.matrix(), split, w.matrix(), cfg);
    let guard = cfg.denom_guard;
    let mut out = s.clone();
    for ((o, &nm), &d) in out.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
        *o *= (nm / (d + guard)).sqrt();
    }
    SimilarityMatrix(out)
}

/// Numerator `SV + SᵀV` and denominator `2VVᵀV` of the `V` rule.
fn membership_terms<T: Scalar>(s: &Matrix<T>, v: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let num = s.matmul(v).expect("S·V").add(&s.t_matmul(v).expect("Sᵀ·V")).expect("same shape");
    let vtv = v.t_matmul(v).expect("Vᵀ·V");
    let den = v.matmul(&vtv).expect("V·VᵀV").scale(T::lit(2.0));
    (num, den)
}

/// One fourth-root multiplicative step on `V` with `S` fixed.
///
/// Entries that would underflow to zero are held at the smallest positive
/// normal value so `V` stays strictly positive in floating point.
pub fn update_membership<T: Scalar>(
    s: &SimilarityMatrix<T>,
    v: &MembershipMatrix<T>,
    cfg: &SolverConfig<T>,
) -> MembershipMatrix<T> {
    let v = v.matrix();
    let (num, den) = membership_terms(s.matrix(), v);
    let guard = cfg.denom_guard;
    let floor = T::min_positive_value();
    let mut out = v.clone();
    for ((o, &nm), &d) in out.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
        *o = (*o * (nm / (d + guard)).sqrt().sqrt()).max(floor);
    }
    MembershipMatrix(out)
}

/// Row-wise argmax of `V`; ties go to the smallest column.
pub fn assign_clusters<T: Scalar>(v: &MembershipMatrix<T>) -> Vec<usize> {
    let v = v.matrix();
    (0..v.rows())
        .map(|i| {
            let row = v.row(i);
            let mut best = 0;
            for (k, &val) in row.iter().enumerate().skip(1) {
                if val > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Distance of the current factors from a fixed point of both rules:
/// the largest `|ratio − 1|` over off-diagonal `S` entries above `1e-6`
/// and over every `V` entry, where `ratio` is the bracketed quotient of the
/// corresponding update. The denominator guard only replaces zero
/// denominators here.
pub fn stationarity_residual<T: Scalar>(
    s: &SimilarityMatrix<T>,
    v: &MembershipMatrix<T>,
    split: &GramSplit<T>,
    w: &NormalizedAffinity<T>,
    cfg: &SolverConfig<T>,
) -> T {
    let sm = s.matrix();
    let vm = v.matrix();
    let guard = cfg.denom_guard;
    let threshold = T::lit(1e-6);
    let (num, den) = similarity_terms(sm, vm, split, w.matrix(), cfg);
    let n = sm.rows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j && sm[(i, j)] > threshold {
                let r = num[(i, j)] / positive_or(den[(i, j)], guard);
                worst = worst.max((r - T::one()).abs());
            }
        }
    }
    let (num, den) = membership_terms(sm, vm);
    for (&nm, &d) in num.as_slice().iter().zip(den.as_slice()) {
        worst = worst.max((nm / positive_or(d, guard) - T::one()).abs());
    }
    worst
}

fn positive_or<T: Scalar>(v: T, fallback: T) -> T {
    if v > T::zero() {
        v
    } else {
        fallback
    }
}

/// Random strictly positive starting point: `V` then the off-diagonal of
/// `S`, both i.i.d. uniform on `(0, 1)` from `seed`.
pub fn initialize<T: Scalar>(n: usize, clusters: usize, seed: u64) -> (SimilarityMatrix<T>, MembershipMatrix<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || T::lit(rng.sample::<f64, _>(Open01));
    let v = Matrix::from_fn(n, clusters, |_, _| draw());
    let s = Matrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { draw() });
    (SimilarityMatrix(s), MembershipMatrix(v))
}

/// Runs the alternating updates from a seeded random start.
pub fn solve<T: Scalar>(
    x: &Matrix<T>,
    w: &NormalizedAffinity<T>,
    cfg: &SolverConfig<T>,
) -> Result<Solution<T>> {
    solve_observed(x, w, cfg, |_| {})
}

/// [`solve`] with a callback invoked after every sweep.
pub fn solve_observed<T: Scalar>(
    x: &Matrix<T>,
    w: &NormalizedAffinity<T>,
    cfg: &SolverConfig<T>,
    mut observer: impl FnMut(&IterationState<'_, T>),
) -> Result<Solution<T>> {
    let n = x.cols();
    cfg.validate(n)?;
    if !x.is_finite() {
        return Err(Error::Input("data matrix has non-finite entries".into()));
    }
    let (s0, v0) = initialize(n, cfg.clusters, cfg.seed);
    solve_from(x, w, cfg, s0, v0, &mut observer)
}

/// Runs the alternating updates from a caller-supplied starting point.
pub fn solve_from<T: Scalar>(
    x: &Matrix<T>,
    w: &NormalizedAffinity<T>,
    cfg: &SolverConfig<T>,
    mut s: SimilarityMatrix<T>,
    mut v: MembershipMatrix<T>,
    observer: &mut impl FnMut(&IterationState<'_, T>),
) -> Result<Solution<T>> {
    cfg.validate(x.cols())?;
    check_shapes(x, w, &s, &v)?;
    if v.matrix().cols() != cfg.clusters {
        return Err(Error::Shape {
            op: "membership columns",
            left: (x.cols(), cfg.clusters),
            right: v.matrix().shape(),
        });
    }
    let split = gram_split(x);
    let mut trace = SolveTrace {
        objective: vec![objective_value(x, w, &s, &v, cfg)?],
        s_delta: Vec::new(),
        v_delta: Vec::new(),
        iterations: 0,
        terminated_by: Termination::MaxIter,
    };

    for iteration in 1..=cfg.max_iter {
        let s_next = update_similarity(&s, &v, &split, w, cfg);
        if !s_next.matrix().is_finite() {
            return Err(Error::Numerical { iteration, quantity: "similarity" });
        }
        let v_next = update_membership(&s_next, &v, cfg);
        if !v_next.matrix().is_finite() {
            return Err(Error::Numerical { iteration, quantity: "membership" });
        }
        let ds = s_next.matrix().max_abs_diff(s.matrix())?;
        let dv = v_next.matrix().max_abs_diff(v.matrix())?;
        s = s_next;
        v = v_next;

        let obj = objective_value(x, w, &s, &v, cfg)?;
        if !obj.is_finite() {
            return Err(Error::Numerical { iteration, quantity: "objective" });
        }
        trace.objective.push(obj);
        trace.s_delta.push(ds);
        trace.v_delta.push(dv);
        trace.iterations = iteration;
        observer(&IterationState {
            iteration,
            similarity: &s,
            membership: &v,
            objective: obj,
        });
        if ds < cfg.tol && dv < cfg.tol {
            trace.terminated_by = Termination::Tolerance;
            break;
        }
    }

    Ok(Solution {
        similarity: s,
        membership: v,
        trace,
    })
}
