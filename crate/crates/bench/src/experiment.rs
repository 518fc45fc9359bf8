//! Seeded repeated trials, grid search over `(α, β)` and paired method
//! comparisons.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use cagraph::baselines::{kmeans, symnmf_solve, KMeansConfig, SymNmfConfig};
use cagraph::metrics::wilcoxon_rank_sum;
use cagraph::{
    assign_clusters, build_affinity, evaluate, solve, Affinity64, GraphConfig, MetricReport,
    SolverConfig64,
};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{HarnessError, Result};

/// `{0.01, 0.1, 1, 10, 100, 1000}`.
pub const DEFAULT_GRID: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Joint,
    SymNmf,
    KMeans,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Joint, Method::SymNmf, Method::KMeans];

    pub fn name(self) -> &'static str {
        match self {
            Method::Joint => "joint",
            Method::SymNmf => "symnmf",
            Method::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Acc,
    Nmi,
    Pur,
    Ari,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Acc, Metric::Nmi, Metric::Pur, Metric::Ari];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Acc => "acc",
            Metric::Nmi => "nmi",
            Metric::Pur => "pur",
            Metric::Ari => "ari",
        }
    }

    pub fn of(self, r: &MetricReport) -> f64 {
        match self {
            Metric::Acc => r.acc,
            Metric::Nmi => r.nmi,
            Metric::Pur => r.pur,
            Metric::Ari => r.ari,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec<'a> {
    pub dataset: &'a Dataset,
    pub methods: Vec<Method>,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Defaults to the number of ground-truth classes.
    pub clusters: Option<usize>,
    pub graph: GraphConfig,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> ExperimentSpec<'a> {
    /// All methods, the default grid, 20 trials, default graph and stopping
    /// rule.
    pub fn new(dataset: &'a Dataset) -> Self {
        Self {
            dataset,
            methods: Method::ALL.to_vec(),
            alpha_grid: DEFAULT_GRID.to_vec(),
            beta_grid: DEFAULT_GRID.to_vec(),
            trials: 20,
            base_seed: 0,
            clusters: None,
            graph: GraphConfig::for_samples(dataset.n()),
            tol: 1e-4,
            max_iter: 1000,
        }
    }

    pub fn with_methods(mut self, methods: &[Method]) -> Self {
        self.methods = methods.to_vec();
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_grid(mut self, alphas: &[f64], betas: &[f64]) -> Self {
        self.alpha_grid = alphas.to_vec();
        self.beta_grid = betas.to_vec();
        self
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        self.base_seed ^ k as u64
    }

    fn clusters(&self) -> Result<usize> {
        match (self.clusters, self.dataset.classes()) {
            (Some(c), _) | (None, Some(c)) => Ok(c),
            (None, None) => Err(HarnessError::Input(
                "cluster count required for a dataset without labels".into(),
            )),
        }
    }

    fn check(&self) -> Result<(&'a [usize], usize)> {
        let truth = self.dataset.truth().ok_or_else(|| {
            HarnessError::Input(format!("dataset {} has no ground truth", self.dataset.name))
        })?;
        if self.trials == 0 {
            return Err(HarnessError::Input("trials must be at least 1".into()));
        }
        let c = self.clusters()?;
        self.graph.validate(self.dataset.n())?;
        Ok((truth, c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: Method,
    pub trial: usize,
    pub trial_seed: u64,
    pub alpha: f64,
    pub beta: f64,
    /// `None` when the run failed; see `failure`.
    pub metrics: Option<MetricReport>,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub failure: Option<String>,
}

impl TrialResult {
    pub fn succeeded(&self) -> bool {
        self.metrics.is_some()
    }
}

/// Everything a trial needs, built once and shared read-only.
struct Context<'a> {
    spec: &'a ExperimentSpec<'a>,
    truth: &'a [usize],
    clusters: usize,
    w: Affinity64,
}

impl<'a> Context<'a> {
    fn new(spec: &'a ExperimentSpec<'a>) -> Result<Self> {
        let (truth, clusters) = spec.check()?;
        let w = build_affinity(&spec.dataset.x, &spec.graph)?;
        Ok(Self { spec, truth, clusters, w })
    }

    fn labels(&self, method: Method, alpha: f64, beta: f64, seed: u64) -> cagraph::Result<(Vec<usize>, usize)> {
        let spec = self.spec;
        match method {
            Method::Joint => {
                let cfg = SolverConfig64::new(alpha, beta, self.clusters)
                    .with_seed(seed)
                    .with_tol(spec.tol)
                    .with_max_iter(spec.max_iter);
                let sol = solve(&spec.dataset.x, &self.w, &cfg)?;
                Ok((sol.labels(), sol.trace.iterations))
            }
            Method::SymNmf => {
                let cfg = SymNmfConfig::new(self.clusters)
                    .with_seed(seed)
                    .with_tol(spec.tol)
                    .with_max_iter(spec.max_iter);
                let sol = symnmf_solve(&self.w, &cfg)?;
                Ok((assign_clusters(&sol.membership), sol.trace.iterations))
            }
            Method::KMeans => {
                let r = kmeans(&spec.dataset.x, &KMeansConfig::new(self.clusters).with_seed(seed))?;
                Ok((r.labels, r.iterations))
            }
        }
    }

    fn trial(&self, method: Method, alpha: f64, beta: f64, trial: usize) -> Result<TrialResult> {
        let trial_seed = self.spec.trial_seed(trial);
        let start = Instant::now();
        let outcome = self.labels(method, alpha, beta, trial_seed);
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let (metrics, iterations, failure) = match outcome {
            Ok((labels, it)) => (Some(evaluate(&labels, self.truth)?), it, None),
            Err(e @ cagraph::Error::Numerical { .. }) => (None, 0, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        Ok(TrialResult {
            method,
            trial,
            trial_seed,
            alpha,
            beta,
            metrics,
            iterations,
            wall_time_ms,
            failure,
        })
    }

    /// Runs every task, possibly in parallel, and returns results in task
    /// order.
    fn run(&self, tasks: &[(Method, f64, f64, usize)]) -> Result<Vec<TrialResult>> {
        tasks
            .par_iter()
            .map(|&(m, a, b, k)| self.trial(m, a, b, k))
            .collect()
    }
}

fn sorted_methods(methods: &[Method]) -> Vec<Method> {
    let mut m = methods.to_vec();
    m.sort_unstable();
    m.dedup();
    m
}

/// Runs `spec.trials` seeded trials of every method at `(alpha, beta)`.
/// The result is ordered by method, then trial index. A solver that fails
/// numerically yields a failed trial rather than an error.
pub fn run_trials(spec: &ExperimentSpec<'_>, alpha: f64, beta: f64) -> Result<Vec<TrialResult>> {
    let ctx = Context::new(spec)?;
    let tasks: Vec<_> = sorted_methods(&spec.methods)
        .into_iter()
        .flat_map(|m| (0..spec.trials).map(move |k| (m, alpha, beta, k)))
        .collect();
    ctx.run(&tasks)
}

/// Mean and sample standard deviation (`n − 1` denominator) over the
/// successful trials of one method at one `(α, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean: MetricReport,
    pub std: MetricReport,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn report_from(f: impl Fn(Metric) -> f64) -> MetricReport {
    MetricReport {
        acc: f(Metric::Acc),
        nmi: f(Metric::Nmi),
        pur: f(Metric::Pur),
        ari: f(Metric::Ari),
    }
}

/// Groups results by `(method, α, β)` in order of first appearance.
/// Groups in which every trial failed are omitted.
pub fn aggregate(results: &[TrialResult]) -> Vec<Summary> {
    let mut keys: Vec<(Method, f64, f64)> = Vec::new();
    for r in results {
        let key = (r.method, r.alpha, r.beta);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(method, alpha, beta)| {
            let group: Vec<&TrialResult> = results
                .iter()
                .filter(|r| (r.method, r.alpha, r.beta) == (method, alpha, beta))
                .collect();
            let ok: Vec<&MetricReport> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
            if ok.is_empty() {
                return None;
            }
            let stats = |m: Metric| mean_std(&ok.iter().map(|r| m.of(r)).collect::<Vec<_>>());
            Some(Summary {
                method,
                alpha,
                beta,
                trials: ok.len(),
                failed: group.len() - ok.len(),
                mean: report_from(|m| stats(m).0),
                std: report_from(|m| stats(m).1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub results: Vec<TrialResult>,
    /// `None` when any trial in the cell failed.
    pub summary: Option<Summary>,
}

impl GridCell {
    pub fn failed(&self) -> bool {
        self.summary.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_alpha: f64,
    pub best_beta: f64,
    /// Row-major over `alpha_grid × beta_grid`.
    pub cells: Vec<GridCell>,
}

impl GridOutcome {
    pub fn best(&self) -> &GridCell {
        self.cells
            .iter()
            .find(|c| c.alpha == self.best_alpha && c.beta == self.best_beta)
            .expect("best cell is part of the table")
    }
}

/// Evaluates the joint model on every `(α, β)` cell and picks the highest
/// mean ACC, breaking ties towards the smaller `(α, β)` pair. Cells with a
/// failed trial are excluded from the choice.
pub fn grid_search(spec: &ExperimentSpec<'_>) -> Result<GridOutcome> {
    if spec.alpha_grid.is_empty() || spec.beta_grid.is_empty() {
        return Err(HarnessError::Input("grid search needs non-empty grids".into()));
    }
    let ctx = Context::new(spec)?;
    let pairs: Vec<(f64, f64)> = spec
        .alpha_grid
        .iter()
        .flat_map(|&a| spec.beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let tasks: Vec<_> = pairs
        .iter()
        .flat_map(|&(a, b)| (0..spec.trials).map(move |k| (Method::Joint, a, b, k)))
        .collect();
    let mut all = ctx.run(&tasks)?.into_iter();
    let cells: Vec<GridCell> = pairs
        .into_iter()
        .map(|(alpha, beta)| {
            let results: Vec<TrialResult> = all.by_ref().take(spec.trials).collect();
            let summary = if results.iter().all(TrialResult::succeeded) {
                aggregate(&results).pop()
            } else {
                None
            };
            GridCell { alpha, beta, results, summary }
        })
        .collect();

    let mut best: Option<&GridCell> = None;
    for cell in cells.iter().filter(|c| !c.failed()) {
        let acc = cell.summary.as_ref().expect("not failed").mean.acc;
        let better = match best {
            None => true,
            Some(b) => {
                let b_acc = b.summary.as_ref().expect("not failed").mean.acc;
                acc > b_acc || (acc == b_acc && (cell.alpha, cell.beta) < (b.alpha, b.beta))
            }
        };
        if better {
            best = Some(cell);
        }
    }
    let best = best.ok_or_else(|| HarnessError::Input("every grid cell failed".into()))?;
    let (best_alpha, best_beta) = (best.alpha, best.beta);
    Ok(GridOutcome { best_alpha, best_beta, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Better,
    Worse,
    NoDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub verdict: Verdict,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Two-sided rank-sum test of `metric` between the successful trials in
/// `a` and `b`; significant at `p < 0.05`, direction from the means.
pub fn compare_methods(a: &[TrialResult], b: &[TrialResult], metric: Metric) -> Result<Comparison> {
    let values = |rs: &[TrialResult]| -> Vec<f64> {
        rs.iter().filter_map(|r| r.metrics.as_ref()).map(|m| metric.of(m)).collect()
    };
    let (va, vb) = (values(a), values(b));
    if va.is_empty() || vb.is_empty() {
        return Err(HarnessError::Input("comparison needs successful trials on both sides".into()));
    }
    let test = wilcoxon_rank_sum(&va, &vb)?;
    let (mean_a, mean_b) = (mean_std(&va).0, mean_std(&vb).0);
    let verdict = if test.p_value >= 0.05 || mean_a == mean_b {
        Verdict::NoDifference
    } else if mean_a > mean_b {
        Verdict::Better
    } else {
        Verdict::Worse
    };
    Ok(Comparison { verdict, p_value: test.p_value, mean_a, mean_b })
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::NoDifference => "no_difference",
        }
    }
}
