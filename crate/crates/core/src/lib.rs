//! Monte Carlo laboratory for long-run variance estimation and tests of the
//! mean under Gaussian cluster dependence.

pub mod cluster_model;
pub mod error;
pub mod estimators;
pub mod graphs;
pub mod harness;
pub mod likelihood;
pub mod sampler;
pub mod special;

pub use cluster_model::{
    block_model, build_structure, long_run_variance, permutation_average, spectral_block,
    BlockEquicorrModel, BlockSpectrum, ClusterStructure,
};
pub use error::{LabError, Result};
pub use estimators::{lrv_cluster, lrv_graph, lrv_sample_variance, lrv_second_moment, LrvEstimate};
pub use graphs::{generate_graph, graph_stats, DependencyGraph, GraphKind, GraphStats};
pub use inference_tests::{cluster_t_test, known_bound_z_test, sign_test, student_t_quantile, TestOutcome};
pub use likelihood::{limit_law_cdf, loglr_cluster, loglr_dense, loglr_equicorr, lr_diagnostics, LrDiagnostics};
pub use sampler::{derive_stream, sample, RandomStream};
