//! Experiment configuration (a single JSON document).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::estimators::EstimatorKind;

pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EstimatorConsistency,
    Contiguity,
    TestSizePower,
    GraphEstimation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Sign,
    ClusterT,
    KnownBoundZ,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Sign => "sign",
            TestKind::ClusterT => "cluster_t",
            TestKind::KnownBoundZ => "known_bound_z",
        }
    }
}

/// How `mu_grid` entries become the mean `mu_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuScale {
    /// `mu_bar = mu`.
    #[default]
    Raw,
    /// `mu_bar = mu * sigma_LR / sqrt(n)`.
    LrvRootN,
}

/// Cluster sizes as a function of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum SizePattern {
    /// Fixed sizes; `n` must equal their sum.
    Explicit { sizes: Vec<usize> },
    /// `n / 2` clusters of two (a trailing singleton when `n` is odd).
    Pairs,
    /// One cluster of `n`.
    Single,
    /// `[n / 2, n - n / 2]`.
    Halves,
    /// `clusters` clusters with sizes differing by at most one.
    Equal { clusters: usize },
    Singletons,
    /// One cluster of `ceil(fraction * n)` followed by singletons.
    Clique { fraction: f64 },
}

/// Within-cluster correlations as a function of the structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum DeltaScheme {
    Constant { delta: f64 },
    /// `delta_bar / n_star`.
    ScaledByNStar { delta_bar: f64 },
    /// `delta / n`.
    ScaledByN { delta: f64 },
    /// Per-cluster deltas giving every non-singleton cluster sum variance `sigma_sq`.
    CommonVariance { sigma_sq: f64 },
    Explicit { deltas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DesignData {
    /// Block-equicorrelation Gaussian design.
    Block { sizes: SizePattern, deltas: DeltaScheme },
    /// `X_i = sqrt(1 - deg(i) c) e_i + sqrt(c) sum_{edges at i} eta_e` on a
    /// union of `degree` random matchings; `c` is the covariance per edge.
    EdgeShock { degree: usize, edge_cov: f64, graph_seed: u64 },
    /// Centre `X_0 = theta / sqrt(n - 1) sum_{j > 0} X_j + sqrt(1 - theta^2) e`
    /// over iid standard normal leaves.
    Star { theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub id: String,
    #[serde(flatten)]
    pub data: DesignData,
}

fn default_mu_grid() -> Vec<f64> {
    vec![0.0]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    pub designs: Vec<DesignSpec>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_mu_grid")]
    pub mu_grid: Vec<f64>,
    #[serde(default)]
    pub mu_scale: MuScale,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Falls back to the suite seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// Tests for `test_size_power`; defaults to all three.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestKind>,
    /// Estimators for the estimation kinds; defaults depend on the kind.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorKind>,
    /// Bound `c` for the known-bound z-test; the design's true `sigma_LR^2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub master_seed: u64,
    pub experiments: Vec<ExperimentConfig>,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Config(msg.into()))
}

fn check_id(what: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if !ok {
        return config_err(format!("{what} id {id:?} must be nonempty [A-Za-z0-9_.-]"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_id("experiment", &self.id)?;
        if self.designs.is_empty() {
            return config_err(format!("{}: designs must be nonempty", self.id));
        }
        if self.n_grid.is_empty() || self.mu_grid.is_empty() {
            return config_err(format!("{}: n_grid and mu_grid must be nonempty", self.id));
        }
        if self.n_grid.contains(&0) {
            return config_err(format!("{}: n_grid entries must be positive", self.id));
        }
        if self.mu_grid.iter().any(|m| !m.is_finite()) {
            return config_err(format!("{}: mu_grid entries must be finite", self.id));
        }
        if self.replications < MIN_REPLICATIONS {
            return config_err(format!(
                "{}: replications must be at least {MIN_REPLICATIONS}, got {}",
                self.id, self.replications
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return config_err(format!("{}: alpha must lie in (0, 1/2)", self.id));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return config_err(format!("{}: epsilon must be positive", self.id));
        }
        if let Some(c) = self.known_bound {
            if !(c > 0.0) || !c.is_finite() {
                return config_err(format!("{}: known_bound must be positive", self.id));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for d in &self.designs {
            check_id("design", &d.id)?;
            if !seen.insert(d.id.as_str()) {
                return config_err(format!("{}: duplicate design id {:?}", self.id, d.id));
            }
            if self.kind == ExperimentKind::Contiguity && !matches!(d.data, DesignData::Block { .. }) {
                return config_err(format!("{}: contiguity needs block designs", self.id));
            }
        }
        Ok(())
    }

    pub fn tests_or_default(&self) -> Vec<TestKind> {
        if self.tests.is_empty() {
            vec![TestKind::Sign, TestKind::ClusterT, TestKind::KnownBoundZ]
        } else {
            self.tests.clone()
        }
    }

    pub fn estimators_or_default(&self) -> Vec<EstimatorKind> {
        if !self.estimators.is_empty() {
            return self.estimators.clone();
        }
        match self.kind {
            ExperimentKind::GraphEstimation => vec![EstimatorKind::SampleVariance, EstimatorKind::Graph],
            _ => vec![EstimatorKind::SampleVariance, EstimatorKind::Cluster],
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return config_err("suite has no experiments");
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.experiments {
            e.validate()?;
            if !seen.insert(e.id.as_str()) {
                return config_err(format!("duplicate experiment id {:?}", e.id));
            }
        }
        Ok(())
    }

    /// Parses either a suite (`{"master_seed", "experiments"}`) or a single
    /// experiment, which must then carry its own `master_seed`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        let suite = if value.get("experiments").is_some() {
            serde_json::from_value::<SuiteConfig>(value).map_err(|e| LabError::Config(e.to_string()))?
        } else {
            let exp: ExperimentConfig =
                serde_json::from_value(value).map_err(|e| LabError::Config(e.to_string()))?;
            let Some(seed) = exp.master_seed else {
                return config_err("a single-experiment config needs master_seed");
            };
            SuiteConfig {
                master_seed: seed,
                experiments: vec![exp],
            }
        };
        suite.validate()?;
        Ok(suite)
    }
}
