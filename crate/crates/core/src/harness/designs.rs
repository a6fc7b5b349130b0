//! Designs instantiated at a sample size.

use crate::cluster_model::{
    block_model, build_structure, deltas_for_common_variance, BlockEquicorrModel, ClusterStructure,
};
use crate::error::{invalid, LabError, Result};
use crate::graphs::{cluster_graph, generate_graph, DependencyGraph, GraphKind};
use crate::sampler::{sample_into, RandomStream};

use super::config::{DeltaScheme, DesignData, SizePattern};

pub fn pattern_sizes(pattern: &SizePattern, n: usize) -> Result<Vec<usize>> {
    let sizes = match pattern {
        SizePattern::Explicit { sizes } => {
            let total: usize = sizes.iter().sum();
            if total != n {
                return invalid(format!("explicit sizes sum to {total}, cell has n = {n}"));
            }
            sizes.clone()
        }
        SizePattern::Pairs => {
            let mut s = vec![2; n / 2];
            if n % 2 == 1 {
                s.push(1);
            }
            s
        }
        SizePattern::Single => vec![n],
        SizePattern::Halves => {
            if n < 2 {
                return invalid("halves pattern needs n >= 2");
            }
            vec![n / 2, n - n / 2]
        }
        SizePattern::Equal { clusters } => {
            let m = *clusters;
            if m == 0 || m > n {
                return invalid(format!("cannot split n = {n} into {m} clusters"));
            }
            (0..m).map(|i| n / m + usize::from(i < n % m)).collect()
        }
        SizePattern::Singletons => vec![1; n],
        SizePattern::Clique { fraction } => {
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return invalid(format!("clique fraction must lie in (0, 1], got {fraction}"));
            }
            let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
            let mut s = vec![k];
            s.extend(std::iter::repeat_n(1, n - k));
            s
        }
    };
    Ok(sizes)
}

pub fn scheme_deltas(scheme: &DeltaScheme, cs: &ClusterStructure) -> Result<Vec<f64>> {
    let m = cs.m();
    let per_cluster = |d: f64| -> Vec<f64> {
        cs.sizes().iter().map(|&k| if k >= 2 { d } else { 0.0 }).collect()
    };
    match scheme {
        DeltaScheme::Constant { delta } => Ok(per_cluster(*delta)),
        DeltaScheme::ScaledByNStar { delta_bar } => {
            if cs.n_star() == 0 {
                return Ok(vec![0.0; m]);
            }
            Ok(per_cluster(delta_bar / cs.n_star() as f64))
        }
        DeltaScheme::ScaledByN { delta } => Ok(per_cluster(delta / cs.n() as f64)),
        DeltaScheme::CommonVariance { sigma_sq } => deltas_for_common_variance(cs, *sigma_sq),
        DeltaScheme::Explicit { deltas } => {
            if deltas.len() != m {
                return invalid(format!("{} explicit deltas for {m} clusters", deltas.len()));
            }
            Ok(deltas.clone())
        }
    }
}

/// A design at a fixed `n`, ready to sample.
#[derive(Debug, Clone)]
pub enum CellDesign {
    Block(BlockEquicorrModel),
    EdgeShock {
        graph: DependencyGraph,
        edge_cov: f64,
    },
    Star {
        n: usize,
        theta: f64,
    },
}

impl CellDesign {
    pub fn build(data: &DesignData, n: usize) -> Result<Self> {
        match data {
            DesignData::Block { sizes, deltas } => {
                let cs = build_structure(&pattern_sizes(sizes, n)?)?;
                let d = scheme_deltas(deltas, &cs)?;
                Ok(CellDesign::Block(block_model(&cs, &d, None)?))
            }
            DesignData::EdgeShock {
                degree,
                edge_cov,
                graph_seed,
            } => {
                let graph = generate_graph(&GraphKind::RandomMatchings {
                    n,
                    degree: *degree,
                    seed: *graph_seed,
                })?;
                let d_max = (0..n).map(|i| graph.degree(i)).max().unwrap_or(0);
                if !(*edge_cov >= 0.0) || d_max as f64 * edge_cov > 1.0 {
                    return invalid(format!(
                        "edge covariance {edge_cov} with maximum degree {d_max} leaves negative idiosyncratic variance"
                    ));
                }
                Ok(CellDesign::EdgeShock {
                    graph,
                    edge_cov: *edge_cov,
                })
            }
            DesignData::Star { theta } => {
                if n < 2 {
                    return invalid("star design needs n >= 2");
                }
                if !(theta.abs() <= 1.0) {
                    return invalid(format!("star loading must satisfy |theta| <= 1, got {theta}"));
                }
                Ok(CellDesign::Star { n, theta: *theta })
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CellDesign::Block(m) => m.n(),
            CellDesign::EdgeShock { graph, .. } => graph.n(),
            CellDesign::Star { n, .. } => *n,
        }
    }

    /// Finest partition within which all dependence lives: the clusters of a
    /// block model, otherwise the connected components of the graph (sizes only).
    pub fn structure(&self) -> ClusterStructure {
        match self {
            CellDesign::Block(m) => m.structure().clone(),
            _ => {
                let sizes: Vec<usize> = self.graph().components().iter().map(Vec::len).collect();
                build_structure(&sizes).expect("component sizes are positive")
            }
        }
    }

    /// Block models expose their clusters as consecutive index ranges.
    pub fn block_structure(&self) -> Result<&ClusterStructure> {
        match self {
            CellDesign::Block(m) => Ok(m.structure()),
            _ => invalid("a cluster structure over index ranges needs a block design"),
        }
    }

    pub fn graph(&self) -> DependencyGraph {
        match self {
            CellDesign::Block(m) => cluster_graph(m.structure()),
            CellDesign::EdgeShock { graph, .. } => graph.clone(),
            CellDesign::Star { n, .. } => {
                generate_graph(&GraphKind::Star { n: *n }).expect("n >= 2 checked at build")
            }
        }
    }

    /// `(1/n) 1' Sigma 1`.
    pub fn sigma_lr(&self) -> f64 {
        match self {
            CellDesign::Block(m) => m.long_run_variance(),
            CellDesign::EdgeShock { graph, edge_cov } => {
                1.0 + edge_cov * 2.0 * graph.edge_count() as f64 / graph.n() as f64
            }
            CellDesign::Star { n, theta } => {
                let n = *n as f64;
                1.0 + 2.0 * theta * (n - 1.0).sqrt() / n
            }
        }
    }

    pub fn model(&self) -> Result<&BlockEquicorrModel> {
        match self {
            CellDesign::Block(m) => Ok(m),
            _ => Err(LabError::InvalidInput("not a block design".into())),
        }
    }

    /// One draw with mean `mu_bar` into `out`. `scratch` holds edge shocks.
    pub fn sample_into(
        &self,
        mu_bar: f64,
        stream: &mut RandomStream,
        out: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<()> {
        match self {
            CellDesign::Block(m) => sample_into(m, mu_bar, stream, out),
            CellDesign::EdgeShock { graph, edge_cov } => {
                stream.fill_normals(out);
                scratch.resize(graph.edge_count(), 0.0);
                stream.fill_normals(scratch);
                let b = edge_cov.sqrt();
                for (i, v) in out.iter_mut().enumerate() {
                    *v *= (1.0 - graph.degree(i) as f64 * edge_cov).max(0.0).sqrt();
                }
                for ((i, j), eta) in graph.edges().zip(scratch.iter()) {
                    out[i] += b * eta;
                    out[j] += b * eta;
                }
                for v in out.iter_mut() {
                    *v += mu_bar;
                }
                Ok(())
            }
            CellDesign::Star { n, theta } => {
                stream.fill_normals(out);
                let leaves: f64 = out[1..].iter().sum();
                out[0] = theta / ((*n - 1) as f64).sqrt() * leaves + (1.0 - theta * theta).sqrt() * out[0];
                for v in out.iter_mut() {
                    *v += mu_bar;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns() {
        assert_eq!(pattern_sizes(&SizePattern::Pairs, 5).unwrap(), vec![2, 2, 1]);
        assert_eq!(pattern_sizes(&SizePattern::Halves, 5).unwrap(), vec![2, 3]);
        assert_eq!(
            pattern_sizes(&SizePattern::Equal { clusters: 4 }, 10).unwrap(),
            vec![3, 3, 2, 2]
        );
        assert_eq!(
            pattern_sizes(&SizePattern::Clique { fraction: 0.5 }, 5).unwrap(),
            vec![3, 1, 1]
        );
        assert!(pattern_sizes(&SizePattern::Explicit { sizes: vec![2, 2] }, 5).is_err());
    }

    #[test]
    fn schemes() {
        let cs = build_structure(&[4, 1, 5]).unwrap();
        assert_eq!(
            scheme_deltas(&DeltaScheme::ScaledByNStar { delta_bar: 0.9 }, &cs).unwrap(),
            vec![0.1, 0.0, 0.1]
        );
        assert_eq!(
            scheme_deltas(&DeltaScheme::ScaledByN { delta: 1.0 }, &cs).unwrap(),
            vec![0.1, 0.0, 0.1]
        );
        assert!(scheme_deltas(&DeltaScheme::Explicit { deltas: vec![0.1] }, &cs).is_err());
    }

    #[test]
    fn edge_shock_truth_and_structure() {
        let data = DesignData::EdgeShock {
            degree: 3,
            edge_cov: 0.2,
            graph_seed: 1,
        };
        let d = CellDesign::build(&data, 100).unwrap();
        let g = d.graph();
        let expected = 1.0 + 0.2 * (0..100).map(|i| g.degree(i)).sum::<usize>() as f64 / 100.0;
        assert!((d.sigma_lr() - expected).abs() < 1e-15);
        assert_eq!(d.structure().n(), 100);
        let bad = DesignData::EdgeShock {
            degree: 3,
            edge_cov: 0.5,
            graph_seed: 1,
        };
        assert!(CellDesign::build(&bad, 100).is_err());
    }

    #[test]
    fn star_truth() {
        let d = CellDesign::build(&DesignData::Star { theta: 0.5 }, 5).unwrap();
        assert!((d.sigma_lr() - (1.0 + 2.0 * 0.5 * 2.0 / 5.0)).abs() < 1e-15);
        assert_eq!(d.structure().sizes(), &[5]);
    }
}
