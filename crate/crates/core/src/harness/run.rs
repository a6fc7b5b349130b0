//! Cell-by-cell experiment execution.
//!
//! A cell is one (design, mu, n) combination. Replication `r` of a cell
//! draws from `derive_stream(cell_seed, r)`; per-replication results are
//! collected by index and reduced sequentially, so output does not depend on
//! the number of worker threads.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::estimators::{lrv_cluster, lrv_graph, lrv_sample_variance, lrv_second_moment, EstimatorKind};
use crate::graphs::graph_stats;
use crate::inference_tests::{cluster_t_test, known_bound_z_test, sign_test};
use crate::likelihood::{lr_diagnostics, mean_and_se};
use crate::sampler::derive_stream;

use super::config::{DesignSpec, ExperimentConfig, ExperimentKind, MuScale, SuiteConfig, TestKind};
use super::designs::CellDesign;
use super::report::{CellReport, ExperimentReport, Metric, Provenance};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces every master seed in the configuration.
    pub seed_override: Option<u64>,
    /// Worker threads; the global rayon pool when `None`.
    pub threads: Option<usize>,
}

/// Seed override from the `LRVLAB_SEED` environment variable.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var("LRVLAB_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| LabError::Config(format!("LRVLAB_SEED={s:?} is not a u64"))),
        Err(_) => Ok(None),
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of a cell's streams, a hash of the master seed and the cell coordinates.
pub fn cell_seed(master_seed: u64, experiment: &str, design_id: &str, n: usize, mu: f64) -> u64 {
    [fnv1a(experiment), fnv1a(design_id), n as u64, mu.to_bits()]
        .iter()
        .fold(splitmix(master_seed), |acc, &v| splitmix(acc ^ v))
}

pub fn config_hash(config: &SuiteConfig) -> String {
    let canonical = serde_json::to_string(config).expect("configs serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn provenance(config: &SuiteConfig) -> Provenance {
    Provenance {
        config_hash: config_hash(config),
        seed: config.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn effective(config: &SuiteConfig, seed_override: Option<u64>) -> SuiteConfig {
    let mut c = config.clone();
    if let Some(seed) = seed_override {
        c.master_seed = seed;
        for e in &mut c.experiments {
            e.master_seed = None;
        }
    }
    c
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every experiment of a suite, in order.
pub fn run_suite(config: &SuiteConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    let config = effective(config, opts.seed_override);
    config.validate()?;
    with_pool(opts.threads, || {
        let cells = config
            .experiments
            .iter()
            .flat_map(|e| experiment_cells(e, e.master_seed.unwrap_or(config.master_seed)))
            .collect();
        ExperimentReport {
            provenance: provenance(&config),
            cells,
        }
    })
}

/// Runs one experiment; it must carry its own `master_seed`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let Some(seed) = config.master_seed else {
        return Err(LabError::Config(format!("{}: master_seed is required", config.id)));
    };
    run_suite(
        &SuiteConfig {
            master_seed: seed,
            experiments: vec![config.clone()],
        },
        &RunOptions::default(),
    )
}

fn experiment_cells(exp: &ExperimentConfig, master_seed: u64) -> Vec<CellReport> {
    let mut cells = Vec::new();
    for design in &exp.designs {
        for &mu in &exp.mu_grid {
            for &n in &exp.n_grid {
                cells.push(run_cell(exp, design, mu, n, master_seed));
            }
        }
    }
    cells
}

fn run_cell(exp: &ExperimentConfig, spec: &DesignSpec, mu: f64, n: usize, master_seed: u64) -> CellReport {
    let design_id = if exp.mu_grid.len() > 1 {
        format!("{}@mu={}", spec.id, mu)
    } else {
        spec.id.clone()
    };
    let seed = cell_seed(master_seed, &exp.id, &spec.id, n, mu);
    let mut cell = CellReport {
        experiment: exp.id.clone(),
        design_id,
        n,
        mu,
        mu_bar: 0.0,
        n_star: 0,
        m: 0,
        h: 0.0,
        max_share: 0.0,
        reps: exp.replications,
        seed: master_seed,
        cell_seed: seed,
        metrics: Vec::new(),
        error: None,
    };
    let design = match CellDesign::build(&spec.data, n) {
        Ok(d) => d,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    let cs = design.structure();
    cell.n_star = cs.n_star();
    cell.m = cs.m();
    cell.h = cs.heterogeneity();
    cell.max_share = cs.max_cluster_share();
    let sigma_lr = design.sigma_lr();
    cell.mu_bar = match exp.mu_scale {
        MuScale::Raw => mu,
        MuScale::LrvRootN => mu * sigma_lr.sqrt() / (n as f64).sqrt(),
    };

    let mut metrics = vec![Metric::new("sigma_lr_true", sigma_lr, 0.0)];
    let result = match exp.kind {
        ExperimentKind::EstimatorConsistency => estimation_metrics(exp, &design, cell.mu_bar, seed),
        ExperimentKind::GraphEstimation => {
            let s = graph_stats(&design.graph());
            metrics.extend([
                Metric::new("d_max", s.d_max as f64, 0.0),
                Metric::new("d_avg", s.d_avg, 0.0),
                Metric::new("clique_number", s.clique_number as f64, 0.0),
                Metric::new("clique_exact", if s.clique_exact { 1.0 } else { 0.0 }, 0.0),
                Metric::new("sparsity_ratio", s.sparsity_ratio, 0.0),
            ]);
            estimation_metrics(exp, &design, cell.mu_bar, seed)
        }
        ExperimentKind::Contiguity => contiguity_metrics(exp, &design, seed),
        ExperimentKind::TestSizePower => test_metrics(exp, &design, cell.mu_bar, seed),
    };
    match result {
        Ok(m) => metrics.extend(m),
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    }
    if let Some(bad) = metrics.iter().find(|m| !m.value.is_finite() || !m.se.is_finite()) {
        cell.error = Some(format!("metric {} is not finite", bad.name));
        metrics.retain(|m| m.value.is_finite() && m.se.is_finite());
    }
    cell.metrics = metrics;
    cell
}

/// Runs `reps` replications in parallel, each returning `width` numbers,
/// and returns them as columns in replication order.
fn replicate<F>(
    design: &CellDesign,
    mu_bar: f64,
    reps: usize,
    seed: u64,
    width: usize,
    per_rep: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &mut crate::sampler::RandomStream, &mut Vec<f64>) -> Result<()> + Sync,
{
    let n = design.n();
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], Vec::new()),
            |(x, scratch), r| -> Result<Vec<f64>> {
                let mut stream = derive_stream(seed, r as u64);
                design.sample_into(mu_bar, &mut stream, x, scratch)?;
                let mut row = Vec::with_capacity(width);
                per_rep(x, &mut stream, &mut row)?;
                Ok(row)
            },
        )
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::with_capacity(reps); width];
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    Ok(cols)
}

fn mean_se(col: &[f64]) -> (f64, f64) {
    mean_and_se(col.iter().copied())
}

fn estimation_metrics(exp: &ExperimentConfig, design: &CellDesign, mu_bar: f64, seed: u64) -> Result<Vec<Metric>> {
    let estimators = exp.estimators_or_default();
    let truth = design.sigma_lr();
    let graph = estimators
        .contains(&EstimatorKind::Graph)
        .then(|| design.graph());
    let cs = if estimators.contains(&EstimatorKind::Cluster) {
        Some(design.block_structure()?.clone())
    } else {
        None
    };
    let cols = replicate(design, mu_bar, exp.replications, seed, estimators.len(), |x, _, row| {
        for kind in &estimators {
            let est = match kind {
                EstimatorKind::SampleVariance => lrv_sample_variance(x)?,
                EstimatorKind::Cluster => lrv_cluster(x, cs.as_ref().expect("cluster structure"))?,
                EstimatorKind::Graph => lrv_graph(x, graph.as_ref().expect("graph"))?,
                EstimatorKind::SecondMoment => lrv_second_moment(x)?,
            };
            row.push(est.value);
        }
        Ok(())
    })?;

    let mut out = Vec::new();
    for (kind, col) in estimators.iter().zip(&cols) {
        let name = kind.name();
        let (mean, se) = mean_se(col);
        let sq: Vec<f64> = col.iter().map(|v| (v - truth) * (v - truth)).collect();
        let (mse, se_mse) = mean_se(&sq);
        let rmse = mse.sqrt();
        let se_rmse = if rmse > 0.0 { se_mse / (2.0 * rmse) } else { 0.0 };
        let neg: Vec<f64> = col.iter().map(|&v| if v < 0.0 { 1.0 } else { 0.0 }).collect();
        let (neg_rate, neg_se) = mean_se(&neg);
        out.extend([
            Metric::new(format!("{name}_mean"), mean, se),
            Metric::new(format!("{name}_bias"), mean - truth, se),
            Metric::new(format!("{name}_rmse"), rmse, se_rmse),
            Metric::new(format!("{name}_negative_rate"), neg_rate, neg_se),
        ]);
    }
    Ok(out)
}

/// Asymptotic standard deviation of `sqrt(reps)` times the one-sample KS distance.
const KS_SD: f64 = 0.260_3;

fn contiguity_metrics(exp: &ExperimentConfig, design: &CellDesign, seed: u64) -> Result<Vec<Metric>> {
    let d = lr_diagnostics(design.model()?, exp.epsilon, exp.replications, seed)?;
    let mut out = vec![
        Metric::new("mean_lr", d.mean_lr, d.se_mean_lr),
        Metric::new("moment_1pe", d.moment_1pe, d.se_moment_1pe),
    ];
    if let Some(ks) = d.ks {
        out.push(Metric::new("ks", ks, KS_SD / (d.reps as f64).sqrt()));
    }
    Ok(out)
}

fn test_metrics(exp: &ExperimentConfig, design: &CellDesign, mu_bar: f64, seed: u64) -> Result<Vec<Metric>> {
    let tests = exp.tests_or_default();
    let bound = exp.known_bound.unwrap_or_else(|| design.sigma_lr());
    let cs = if tests.contains(&TestKind::ClusterT) {
        Some(design.block_structure()?.clone())
    } else {
        None
    };
    let alpha = exp.alpha;
    let cols = replicate(design, mu_bar, exp.replications, seed, 2 * tests.len(), |x, stream, row| {
        let u = stream.next_uniform();
        for t in &tests {
            let out = match t {
                TestKind::Sign => sign_test(x, alpha, u)?,
                TestKind::ClusterT => cluster_t_test(x, cs.as_ref().expect("cluster structure"), alpha)?,
                TestKind::KnownBoundZ => known_bound_z_test(x, bound, alpha)?,
            };
            row.push(if out.rejected { 1.0 } else { 0.0 });
            row.push(out.reject_probability);
        }
        Ok(())
    })?;
    let mut out = vec![Metric::new("mu_bar", mu_bar, 0.0)];
    for (t, pair) in tests.iter().zip(cols.chunks(2)) {
        let (rate, se) = mean_se(&pair[0]);
        let (prob, prob_se) = mean_se(&pair[1]);
        out.push(Metric::new(format!("{}_reject_rate", t.name()), rate, se));
        out.push(Metric::new(format!("{}_reject_prob", t.name()), prob, prob_se));
    }
    Ok(out)
}
