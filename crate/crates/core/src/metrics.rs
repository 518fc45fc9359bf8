//! External clustering-quality indices and the Wilcoxon rank-sum test.
//!
//! Labels are arbitrary `usize` ids; only the induced partitions matter,
//! so every index is invariant under relabeling of either argument.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Cross-tabulation of predicted clusters (rows) against true classes
/// (columns). Rows and columns follow the sorted distinct label values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub pur: f64,
    pub ari: f64,
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "label length mismatch: predicted {} vs truth {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Input("empty labelling".into()));
    }
    Ok(())
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let ids = labels
        .iter()
        .map(|l| distinct.binary_search(l).expect("label present"))
        .collect();
    (ids, distinct.len())
}

pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<ContingencyTable> {
    check_lengths(pred, truth)?;
    let (p, rows) = dense_ids(pred);
    let (t, cols) = dense_ids(truth);
    let mut counts = vec![vec![0; cols]; rows];
    for (&i, &j) in p.iter().zip(&t) {
        counts[i][j] += 1;
    }
    Ok(ContingencyTable {
        counts,
        n: pred.len(),
    })
}

/// Maximum-weight assignment of rows to columns (Hungarian method,
/// O(m²·n) for an m×n profit matrix with m ≤ n after transposition).
/// Returns the total matched weight.
pub fn max_weight_matching(profit: &[Vec<i64>]) -> i64 {
    let rows = profit.len();
    let cols = profit.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    // Work on an m×n cost matrix with m ≤ n.
    let transpose = rows > cols;
    let (m, n) = if transpose { (cols, rows) } else { (rows, cols) };
    let max = profit.iter().flatten().copied().max().unwrap_or(0);
    let cost = |i: usize, j: usize| -> i64 {
        let p = if transpose { profit[j][i] } else { profit[i][j] };
        max - p
    };

    // Potentials and matching, 1-based with column 0 as the virtual root.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; m + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=m {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n)
        .filter(|&j| matched[j] != 0)
        .map(|j| {
            let i = matched[j] - 1;
            if transpose {
                profit[j - 1][i]
            } else {
                profit[i][j - 1]
            }
        })
        .sum()
}

/// Fraction of samples correctly labelled under the best one-to-one
/// cluster-to-class mapping.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let profit: Vec<Vec<i64>> = table
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as i64).collect())
        .collect();
    Ok(max_weight_matching(&profit) as f64 / table.n as f64)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the geometric mean of the entropies.
/// A single-block partition has zero entropy: the score is 1 when both
/// partitions are single-block and 0 otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let hp = entropy(&rows, n);
    let ht = entropy(&cols, n);
    if hp == 0.0 || ht == 0.0 {
        return Ok(if hp == 0.0 && ht == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// Share of samples belonging to the majority class of their cluster.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let hits: usize = table
        .counts
        .iter()
        .map(|r| r.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hits as f64 / table.n as f64)
}

fn pairs(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index. A zero denominator (both partitions trivial and
/// identical) scores 1.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    if table.n < 2 {
        return Err(Error::Input("adjusted Rand index needs at least 2 samples".into()));
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: f64 = table.row_sums().into_iter().map(pairs).sum();
    let b: f64 = table.col_sums().into_iter().map(pairs).sum();
    let expected = a * b / pairs(table.n);
    let max_index = 0.5 * (a + b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<MetricReport> {
    Ok(MetricReport {
        acc: accuracy(pred, truth)?,
        nmi: nmi(pred, truth)?,
        pur: purity(pred, truth)?,
        ari: ari(pred, truth)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumTest {
    /// Sum of the (tie-averaged) ranks of the first sample.
    pub statistic: f64,
    /// Two-sided p-value from the normal approximation.
    pub p_value: f64,
}

/// Wilcoxon rank-sum test with average ranks for ties, tie-corrected
/// variance and a continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("rank-sum test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("rank-sum test needs finite values".into()));
    }
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let total = pooled.len();
    let mut rank_sum = 0.0;
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < total {
        let mut end = start + 1;
        while end < total && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        let t = (end - start) as f64;
        let avg_rank = (start + end + 1) as f64 / 2.0;
        rank_sum += avg_rank * pooled[start..end].iter().filter(|p| p.1).count() as f64;
        tie_term += t * t * t - t;
        start = end;
    }

    let (n1, n2, nn) = (a.len() as f64, b.len() as f64, total as f64);
    let mean = n1 * (nn + 1.0) / 2.0;
    let variance = if nn > 1.0 {
        n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)))
    } else {
        0.0
    };
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let z = ((rank_sum - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(RankSumTest {
        statistic: rank_sum,
        p_value,
    })
}
