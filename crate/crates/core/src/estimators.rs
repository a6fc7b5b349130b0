//! Long-run variance estimators.
//!
//! Cluster and graph estimates can be negative; they are reported raw with
//! a flag rather than truncated.

use serde::{Deserialize, Serialize};

use crate::cluster_model::ClusterStructure;
use crate::error::{invalid, Result};
use crate::graphs::DependencyGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    SampleVariance,
    Cluster,
    Graph,
    SecondMoment,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::SampleVariance => "sample_variance",
            EstimatorKind::Cluster => "cluster",
            EstimatorKind::Graph => "graph",
            EstimatorKind::SecondMoment => "second_moment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub negative: bool,
}

impl LrvEstimate {
    fn new(value: f64, kind: EstimatorKind) -> Self {
        Self {
            value,
            kind,
            negative: value < 0.0,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `(1/n) sum (x_i - x_bar)^2`.
pub fn lrv_sample_variance(x: &[f64]) -> Result<LrvEstimate> {
    if x.len() < 2 {
        return invalid(format!("sample variance needs n >= 2, got {}", x.len()));
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(LrvEstimate::new(ss / x.len() as f64, EstimatorKind::SampleVariance))
}

/// `(1/n) sum_m (sum_{i in m} (x_i - x_bar))^2`, centred at the global mean.
pub fn lrv_cluster(x: &[f64], cs: &ClusterStructure) -> Result<LrvEstimate> {
    if x.len() != cs.n() {
        return invalid(format!("data length {} does not match n = {}", x.len(), cs.n()));
    }
    if x.is_empty() {
        return invalid("empty data");
    }
    let m = mean(x);
    let total: f64 = cs
        .ranges()
        .map(|r| {
            if r.len() == 1 {
                let d = x[r.start] - m;
                return d * d;
            }
            let s: f64 = x[r].iter().map(|v| v - m).sum();
            s * s
        })
        .sum();
    Ok(LrvEstimate::new(total / x.len() as f64, EstimatorKind::Cluster))
}

/// `(1/n) sum_i sum_{j in N(i) + i} (x_i - x_bar)(x_j - x_bar)`.
pub fn lrv_graph(x: &[f64], g: &DependencyGraph) -> Result<LrvEstimate> {
    if x.len() != g.n() {
        return invalid(format!("data length {} does not match {} nodes", x.len(), g.n()));
    }
    if x.is_empty() {
        return invalid("empty data");
    }
    let m = mean(x);
    let total: f64 = (0..x.len())
        .map(|i| {
            let di = x[i] - m;
            let nb: f64 = g.neighbors(i).iter().map(|&j| x[j] - m).sum();
            di * (di + nb)
        })
        .sum();
    Ok(LrvEstimate::new(total / x.len() as f64, EstimatorKind::Graph))
}

/// `(1/n) sum x_i^2`, for data with known zero mean.
pub fn lrv_second_moment(x: &[f64]) -> Result<LrvEstimate> {
    if x.is_empty() {
        return invalid("second moment needs n >= 1");
    }
    let ss: f64 = x.iter().map(|v| v * v).sum();
    Ok(LrvEstimate::new(ss / x.len() as f64, EstimatorKind::SecondMoment))
}
