use cagraph::baselines::{kmeans, symnmf_solve, KMeansConfig, SymNmfConfig};
use cagraph::metrics::evaluate;
use cagraph::solver::{gram_split, solve_from, stationarity_residual};
use cagraph::{
    assign_clusters, build_affinity, solve, GraphConfig, Matrix, Matrix32, Matrix64, SolverConfig, SolverConfig64,
    Termination, Weighting,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three tight groups on a line, ten samples each, one sample per column.
fn three_groups(seed: u64) -> (Matrix64, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [[0.0, 0.0], [1.0, 0.2], [0.3, 1.0]];
    let truth: Vec<usize> = (0..30).map(|i| i / 10).collect();
    let x = Matrix::from_fn(2, 30, |r, c| centres[truth[c]][r] + rng.random_range(-0.05..0.05));
    (x, truth)
}

#[test]
fn every_method_recovers_separated_groups() {
    let (x, truth) = three_groups(1);
    let w = build_affinity(&x, &GraphConfig::for_samples(30)).unwrap();

    let joint = solve(&x, &w, &SolverConfig64::new(0.1, 1.0, 3).with_seed(3)).unwrap();
    assert_eq!(evaluate(&joint.labels(), &truth).unwrap().acc, 1.0);

    let sym = symnmf_solve(&w, &SymNmfConfig::new(3).with_seed(3)).unwrap();
    assert_eq!(evaluate(&assign_clusters(&sym.membership), &truth).unwrap().acc, 1.0);

    let km = kmeans(&x, &KMeansConfig::new(3).with_seed(3)).unwrap();
    assert_eq!(evaluate(&km.labels, &truth).unwrap().acc, 1.0);
}

#[test]
fn binary_graph_also_works() {
    let (x, truth) = three_groups(2);
    let cfg = GraphConfig {
        weighting: Weighting::Binary,
        ..GraphConfig::for_samples(30)
    };
    let w = build_affinity(&x, &cfg).unwrap();
    let sol = solve(&x, &w, &SolverConfig64::new(0.1, 1.0, 3).with_seed(0)).unwrap();
    assert_eq!(evaluate(&sol.labels(), &truth).unwrap().acc, 1.0);
}

#[test]
fn single_and_double_precision_agree() {
    let (x, _) = three_groups(4);
    let x32 = Matrix32::from_fn(2, 30, |r, c| x[(r, c)] as f32);
    let g = GraphConfig::for_samples(30);
    let a = solve(&x, &build_affinity(&x, &g).unwrap(), &SolverConfig::new(0.1, 1.0, 3).with_seed(5)).unwrap();
    let b = solve(&x32, &build_affinity(&x32, &g).unwrap(), &SolverConfig::new(0.1f32, 1.0, 3).with_seed(5)).unwrap();
    assert_eq!(a.labels(), b.labels());
    assert!(b.trace.is_monotone(1e-4));
}

#[test]
fn resuming_from_a_solution_continues_the_trace() {
    let (x, _) = three_groups(6);
    let w = build_affinity(&x, &GraphConfig::for_samples(30)).unwrap();
    let cfg = SolverConfig64::new(1.0, 1.0, 3).with_seed(1).with_max_iter(40);
    let first = solve(&x, &w, &cfg).unwrap();
    let last = *first.trace.objective.last().unwrap();
    let second = solve_from(&x, &w, &cfg, first.similarity, first.membership, &mut |_| {}).unwrap();
    assert_eq!(second.trace.objective[0], last);
    assert!(second.trace.objective.iter().all(|&o| o <= last + 1e-9 * (1.0 + last)));
}

#[test]
fn residual_drops_from_random_start() {
    let (x, _) = three_groups(7);
    let w = build_affinity(&x, &GraphConfig::for_samples(30)).unwrap();
    let cfg = SolverConfig64::new(0.1, 1.0, 3).with_seed(2).with_max_iter(1);
    let split = gram_split(&x);
    let (s0, v0) = cagraph::solver::initialize::<f64>(30, 3, 2);
    let start = stationarity_residual(&s0, &v0, &split, &w, &cfg);
    let sol = solve(&x, &w, &cfg.with_max_iter(2000)).unwrap();
    assert_eq!(sol.trace.terminated_by, Termination::Tolerance);
    let end = stationarity_residual(&sol.similarity, &sol.membership, &split, &w, &cfg);
    assert!(start > 0.1, "{start}");
    assert!(end < start, "{end} vs {start}");
}
