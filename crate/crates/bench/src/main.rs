use std::path::PathBuf;
use std::process::ExitCode;

use cagraph::baselines::{kmeans, symnmf_solve, KMeansConfig, SymNmfConfig};
use cagraph::{assign_clusters, build_affinity, default_p, evaluate, solve, GraphConfig, SolverConfig64, Weighting};
use cagraph_bench::experiment::aggregate;
use cagraph_bench::report::{records, render};
use cagraph_bench::{
    compare_methods, grid_search, load_csv, make_blobs, run_trials, to_csv, Dataset, ExperimentSpec,
    Format, HarnessError, LabelMode, Method, Metric, DEFAULT_GRID,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cagraph", version, about = "Clustering-aware graph learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset with one method and print the metric report
    Cluster(ClusterArgs),
    /// Grid search (alpha, beta) for the joint model and emit the table
    Grid(GridArgs),
    /// Repeated trials of several methods with significance verdicts
    Bench(BenchArgs),
    /// Write a Gaussian blobs dataset as CSV
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Binary,
    Rbf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// `last`, `none`, or a file with one label per line
    #[arg(long, default_value = "last")]
    labels: String,
    /// Skip one header line
    #[arg(long)]
    header: bool,
    /// Scale every feature to zero mean and unit variance
    #[arg(long)]
    standardize: bool,
    /// Defaults to the number of label classes
    #[arg(long)]
    clusters: Option<usize>,
    /// Neighbours per sample; defaults to the bit length of n
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_enum, default_value = "rbf")]
    weighting: WeightingArg,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    common: DataArgs,
    #[arg(long, default_value = "joint")]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: DataArgs,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "joint,symnmf,kmeans")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Samples in each cluster
    #[arg(long, value_delimiter = ',', default_value = "100,100,100")]
    per_cluster: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, HarnessError> {
        let mode = match self.labels.as_str() {
            "last" => LabelMode::LastColumn,
            "none" => LabelMode::None,
            path => LabelMode::SeparateFile(path.into()),
        };
        let ds = load_csv(&self.data, &mode, self.header)?;
        Ok(if self.standardize { ds.standardized() } else { ds })
    }

    fn graph(&self, n: usize) -> GraphConfig {
        let mut g = GraphConfig::for_samples(n);
        g.p = self.p.unwrap_or_else(|| default_p(n));
        g.weighting = match self.weighting {
            WeightingArg::Binary => Weighting::Binary,
            WeightingArg::Rbf => Weighting::Rbf,
        };
        g
    }

    fn format(&self) -> Format {
        match self.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }

    fn spec<'a>(&self, ds: &'a Dataset, trials: usize) -> ExperimentSpec<'a> {
        let mut spec = ExperimentSpec::new(ds).with_trials(trials).with_seed(self.seed);
        spec.clusters = self.clusters;
        spec.graph = self.graph(ds.n());
        spec.tol = self.tol;
        spec.max_iter = self.max_iter;
        spec
    }

    fn clusters(&self, ds: &Dataset) -> Result<usize, HarnessError> {
        self.clusters
            .or(ds.classes())
            .ok_or_else(|| HarnessError::Input("--clusters is required without labels".into()))
    }

    fn write(&self, text: &str) -> Result<(), HarnessError> {
        write_out(self.out.as_ref(), text)
    }
}

fn write_out(out: Option<&PathBuf>, text: &str) -> Result<(), HarnessError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cluster(args: &ClusterArgs) -> Result<(), HarnessError> {
    let c = &args.common;
    let ds = c.load()?;
    let k = c.clusters(&ds)?;
    let (labels, iterations) = match args.method {
        Method::KMeans => {
            let r = kmeans(&ds.x, &KMeansConfig::new(k).with_seed(c.seed))?;
            (r.labels, r.iterations)
        }
        method => {
            let w = build_affinity(&ds.x, &c.graph(ds.n()))?;
            if method == Method::Joint {
                let cfg = SolverConfig64::new(args.alpha, args.beta, k)
                    .with_seed(c.seed)
                    .with_tol(c.tol)
                    .with_max_iter(c.max_iter);
                let sol = solve(&ds.x, &w, &cfg)?;
                (sol.labels(), sol.trace.iterations)
            } else {
                let cfg = SymNmfConfig::new(k).with_seed(c.seed).with_tol(c.tol).with_max_iter(c.max_iter);
                let sol = symnmf_solve(&w, &cfg)?;
                (assign_clusters(&sol.membership), sol.trace.iterations)
            }
        }
    };
    println!("method={} n={} clusters={k} iterations={iterations}", args.method, ds.n());
    if let Some(truth) = ds.truth() {
        let m = evaluate(&labels, truth)?;
        println!("acc={:.6} nmi={:.6} pur={:.6} ari={:.6}", m.acc, m.nmi, m.pur, m.ari);
    }
    if let Some(path) = &c.out {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_out(Some(path), &text)?;
    } else if ds.truth().is_none() {
        let text: Vec<String> = labels.iter().map(usize::to_string).collect();
        println!("labels={}", text.join(","));
    }
    Ok(())
}

fn grid(args: &GridArgs) -> Result<(), HarnessError> {
    let c = &args.common;
    let ds = c.load()?;
    let alphas = args.alphas.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let betas = args.betas.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let spec = c.spec(&ds, args.trials).with_grid(&alphas, &betas);
    let outcome = grid_search(&spec)?;
    let summaries: Vec<_> = outcome.cells.iter().filter_map(|cell| cell.summary.clone()).collect();
    for cell in outcome.cells.iter().filter(|cell| cell.failed()) {
        eprintln!("cell alpha={} beta={} failed", cell.alpha, cell.beta);
    }
    let best = outcome.best().summary.as_ref().expect("best cell succeeded");
    eprintln!(
        "best alpha={} beta={} acc={:.6} nmi={:.6}",
        outcome.best_alpha, outcome.best_beta, best.mean.acc, best.mean.nmi
    );
    c.write(&render(&records(&ds.name, &summaries), c.format()))
}

fn bench(args: &BenchArgs) -> Result<(), HarnessError> {
    let c = &args.common;
    let ds = c.load()?;
    let spec = c.spec(&ds, args.trials).with_methods(&args.methods);
    let results = run_trials(&spec, args.alpha, args.beta)?;
    for r in results.iter().filter(|r| !r.succeeded()) {
        eprintln!("{} trial {} failed: {}", r.method, r.trial, r.failure.as_deref().unwrap_or(""));
    }
    c.write(&render(&records(&ds.name, &aggregate(&results)), c.format()))?;

    let of = |m: Method| results.iter().filter(|r| r.method == m).cloned().collect::<Vec<_>>();
    let mut methods = args.methods.clone();
    methods.sort_unstable();
    methods.dedup();
    if let Some((&head, rest)) = methods.split_first() {
        for &other in rest {
            let (a, b) = (of(head), of(other));
            if let Ok(cmp) = compare_methods(&a, &b, Metric::Acc) {
                let line = format!(
                    "{head} vs {other} (acc): {} p={:.6} means {:.6} vs {:.6}",
                    cmp.verdict.name(),
                    cmp.p_value,
                    cmp.mean_a,
                    cmp.mean_b
                );
                if c.out.is_some() {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), HarnessError> {
    let ds = make_blobs(&args.per_cluster, args.dim, args.scale, args.noise, args.seed)?;
    write_out(args.out.as_ref(), &to_csv(&ds))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Grid(a) => grid(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
