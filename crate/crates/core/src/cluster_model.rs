//! Cluster structures and block-equicorrelation covariance models.
//!
//! Clusters occupy consecutive index ranges. A model assigns one parameter
//! `delta_m` to each cluster and defines
//! `Sigma = I + blockdiag(delta_m (1 1' - I))`. Everything on the production
//! path is closed form and O(n); dense matrices are only materialized for
//! validation, capped at [`DENSE_CAP`] rows.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

/// Largest dimension for which dense matrices are built.
pub const DENSE_CAP: usize = 2048;

/// Ordered cluster sizes of `{0, .., n-1}`; cluster `m` covers
/// `starts[m] .. starts[m] + sizes[m]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ClusterStructure {
    sizes: Vec<usize>,
    starts: Vec<usize>,
    n: usize,
    n_star: usize,
}

impl TryFrom<Vec<usize>> for ClusterStructure {
    type Error = LabError;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        build_structure(&sizes)
    }
}

impl From<ClusterStructure> for Vec<usize> {
    fn from(cs: ClusterStructure) -> Self {
        cs.sizes
    }
}

/// Validates `sizes` and computes `n`, `n_star` and cluster offsets.
pub fn build_structure(sizes: &[usize]) -> Result<ClusterStructure> {
    if sizes.is_empty() {
        return invalid("cluster structure needs at least one cluster");
    }
    if let Some(m) = sizes.iter().position(|&s| s == 0) {
        return invalid(format!("cluster {m} has size 0"));
    }
    let mut starts = Vec::with_capacity(sizes.len());
    let mut n = 0usize;
    for &s in sizes {
        starts.push(n);
        n += s;
    }
    let n_star = sizes.iter().filter(|&&s| s >= 2).sum();
    Ok(ClusterStructure {
        sizes: sizes.to_vec(),
        starts,
        n,
        n_star,
    })
}

impl ClusterStructure {
    /// `n` singleton clusters.
    pub fn singletons(n: usize) -> Result<Self> {
        build_structure(&vec![1; n])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observations in non-singleton clusters.
    pub fn n_star(&self) -> usize {
        self.n_star
    }

    /// Number of clusters.
    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    /// Index range of cluster `m`.
    pub fn range(&self, m: usize) -> std::ops::Range<usize> {
        self.starts[m]..self.starts[m] + self.sizes[m]
    }

    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.m()).map(move |m| self.range(m))
    }

    /// Cluster containing observation `i`.
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        if i >= self.n {
            return None;
        }
        Some(self.starts.partition_point(|&s| s <= i) - 1)
    }

    /// `h = sum over clusters of size >= 2 of (n_m / n_star)^2`, and 0 when
    /// every cluster is a singleton.
    pub fn heterogeneity(&self) -> f64 {
        if self.n_star == 0 {
            return 0.0;
        }
        let ns = self.n_star as f64;
        self.sizes
            .iter()
            .filter(|&&s| s >= 2)
            .map(|&s| {
                let r = s as f64 / ns;
                r * r
            })
            .sum()
    }

    /// Largest cluster share `max_m n_m / n`.
    pub fn max_cluster_share(&self) -> f64 {
        let max = self.sizes.iter().copied().max().unwrap_or(0);
        max as f64 / self.n as f64
    }
}

/// Largest cluster share `max_m n_m / n`.
pub fn max_cluster_share(cs: &ClusterStructure) -> f64 {
    cs.max_cluster_share()
}

/// Adapter from arbitrary cluster labels to the consecutive-range layout.
///
/// Clusters are ordered by first appearance of their label; within a
/// cluster, observations keep their original relative order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub structure: ClusterStructure,
    /// `order[k]` is the original index of the `k`-th observation in cluster order.
    pub order: Vec<usize>,
}

impl ClusterAssignment {
    pub fn from_labels<L: Eq + std::hash::Hash + Clone>(labels: &[L]) -> Result<Self> {
        use std::collections::HashMap;
        let mut slot: HashMap<L, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let m = *slot.entry(l.clone()).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[m].push(i);
        }
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        let structure = build_structure(&sizes)?;
        let order = members.into_iter().flatten().collect();
        Ok(Self { structure, order })
    }

    /// Reorders `x` (original layout) into cluster order.
    pub fn permute<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.order.len() {
            return invalid(format!(
                "length {} does not match assignment of {} observations",
                x.len(),
                self.order.len()
            ));
        }
        Ok(self.order.iter().map(|&i| x[i]).collect())
    }
}

/// Block-equicorrelation covariance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockModelRepr", into = "BlockModelRepr")]
pub struct BlockEquicorrModel {
    structure: ClusterStructure,
    deltas: Vec<f64>,
    c_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct BlockModelRepr {
    sizes: Vec<usize>,
    deltas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_bound: Option<f64>,
}

impl TryFrom<BlockModelRepr> for BlockEquicorrModel {
    type Error = LabError;

    fn try_from(r: BlockModelRepr) -> Result<Self> {
        let cs = build_structure(&r.sizes)?;
        block_model(&cs, &r.deltas, r.c_bound)
    }
}

impl From<BlockEquicorrModel> for BlockModelRepr {
    fn from(m: BlockEquicorrModel) -> Self {
        BlockModelRepr {
            sizes: m.structure.sizes,
            deltas: m.deltas,
            c_bound: m.c_bound,
        }
    }
}

/// Checks that a `k x k` block with parameter `delta` is positive definite.
pub(crate) fn check_block(cluster: usize, k: usize, delta: f64) -> Result<()> {
    let fail = |reason: &str| {
        Err(LabError::ModelInvalid {
            cluster,
            size: k,
            delta,
            reason: reason.to_string(),
        })
    };
    if !delta.is_finite() {
        return fail("delta is not finite");
    }
    if k < 2 {
        return Ok(());
    }
    if 1.0 - delta <= 0.0 {
        return fail("base eigenvalue 1 - delta is not positive");
    }
    if 1.0 + (k as f64 - 1.0) * delta <= 0.0 {
        return fail("top eigenvalue 1 + (k - 1) delta is not positive");
    }
    Ok(())
}

/// Builds and validates a block model; deltas of singleton clusters are set to 0.
pub fn block_model(
    cs: &ClusterStructure,
    deltas: &[f64],
    c_bound: Option<f64>,
) -> Result<BlockEquicorrModel> {
    if deltas.len() != cs.m() {
        return invalid(format!(
            "expected {} deltas, got {}",
            cs.m(),
            deltas.len()
        ));
    }
    if let Some(c) = c_bound {
        if !(c >= 0.0) {
            return invalid(format!("eigenvalue budget must be nonnegative, got {c}"));
        }
    }
    let mut normalized = Vec::with_capacity(deltas.len());
    for (m, (&k, &d)) in cs.sizes().iter().zip(deltas).enumerate() {
        if k == 1 {
            normalized.push(0.0);
            continue;
        }
        check_block(m, k, d)?;
        if let Some(c) = c_bound {
            // eigenvalues of the block of Delta are (k-1) delta and -delta
            let top = (k as f64 - 1.0) * d;
            for value in [top, -d] {
                if value.abs() > c {
                    return Err(LabError::BudgetExceeded {
                        cluster: m,
                        value,
                        bound: c,
                    });
                }
            }
        }
        normalized.push(d);
    }
    Ok(BlockEquicorrModel {
        structure: cs.clone(),
        deltas: normalized,
        c_bound,
    })
}

impl BlockEquicorrModel {
    /// Model with every delta equal to zero (identity covariance).
    pub fn identity(cs: &ClusterStructure) -> Self {
        Self {
            structure: cs.clone(),
            deltas: vec![0.0; cs.m()],
            c_bound: None,
        }
    }

    pub fn structure(&self) -> &ClusterStructure {
        &self.structure
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn c_bound(&self) -> Option<f64> {
        self.c_bound
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    /// Iterator of `(index range, delta)` per cluster.
    pub fn blocks(&self) -> impl Iterator<Item = (std::ops::Range<usize>, f64)> + '_ {
        self.structure.ranges().zip(self.deltas.iter().copied())
    }

    pub fn spectrum(&self) -> BlockSpectrum {
        BlockSpectrum {
            blocks: self
                .structure
                .sizes()
                .iter()
                .zip(&self.deltas)
                .map(|(&k, &d)| BlockEigen::new(k, d))
                .collect(),
        }
    }

    pub fn long_run_variance(&self) -> f64 {
        long_run_variance(self)
    }

    /// Dense covariance matrix; errors above `cap` rows.
    pub fn dense_covariance(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n > cap {
            return invalid(format!("dense covariance of size {n} exceeds cap {cap}"));
        }
        let mut sigma = DMatrix::identity(n, n);
        for (r, d) in self.blocks() {
            for i in r.clone() {
                for j in r.clone() {
                    if i != j {
                        sigma[(i, j)] = d;
                    }
                }
            }
        }
        Ok(sigma)
    }
}

/// Closed-form eigen-structure of one equicorrelation block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEigen {
    pub size: usize,
    pub delta: f64,
    /// `1 + (k - 1) delta`, multiplicity 1, eigenvector `k^{-1/2} 1`.
    pub top: f64,
    /// `1 - delta`, multiplicity `k - 1`, eigenvectors the Helmert contrasts.
    pub base: f64,
}

impl BlockEigen {
    fn new(size: usize, delta: f64) -> Self {
        let delta = if size == 1 { 0.0 } else { delta };
        Self {
            size,
            delta,
            top: 1.0 + (size as f64 - 1.0) * delta,
            base: 1.0 - delta,
        }
    }

    pub fn base_multiplicity(&self) -> usize {
        self.size - 1
    }

    pub fn log_det(&self) -> f64 {
        self.top.ln() + self.base_multiplicity() as f64 * self.base.ln()
    }
}

/// Spectrum of a block model, one entry per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpectrum {
    pub blocks: Vec<BlockEigen>,
}

impl BlockSpectrum {
    /// All eigenvalues with multiplicity, in basis order (per block: top, then
    /// the `k - 1` base values).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(b.top);
            out.extend(std::iter::repeat_n(b.base, b.base_multiplicity()));
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        self.blocks.iter().map(BlockEigen::log_det).sum()
    }

    /// Block-diagonal orthogonal matrix of eigenvectors matching
    /// [`eigenvalues`](Self::eigenvalues): each block is a Helmert basis.
    pub fn eigenvectors(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n: usize = self.blocks.iter().map(|b| b.size).sum();
        if n > cap {
            return invalid(format!("dense basis of size {n} exceeds cap {cap}"));
        }
        let mut basis = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let h = helmert_basis(b.size);
            basis.view_mut((off, off), (b.size, b.size)).copy_from(&h);
            off += b.size;
        }
        Ok(basis)
    }
}

/// Spectrum of a single `k x k` block `I + delta (1 1' - I)`.
pub fn spectral_block(k: usize, delta: f64) -> Result<BlockSpectrum> {
    if k == 0 {
        return invalid("block size must be at least 1");
    }
    check_block(0, k, delta)?;
    Ok(BlockSpectrum {
        blocks: vec![BlockEigen::new(k, delta)],
    })
}

/// Helmert basis of dimension `k`: column 0 is `k^{-1/2} 1`, column `j >= 1`
/// has `1/sqrt(j(j+1))` in rows `0..j`, `-j/sqrt(j(j+1))` in row `j`, and
/// zeros below.
pub fn helmert_basis(k: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(k, k);
    let first = 1.0 / (k as f64).sqrt();
    for i in 0..k {
        h[(i, 0)] = first;
    }
    for j in 1..k {
        let jf = j as f64;
        let norm = (jf * (jf + 1.0)).sqrt();
        for i in 0..j {
            h[(i, j)] = 1.0 / norm;
        }
        h[(j, j)] = -jf / norm;
    }
    h
}

/// `(1/n) 1' Sigma 1 = sum_m (n_m / n)(1 + (n_m - 1) delta_m)`.
pub fn long_run_variance(model: &BlockEquicorrModel) -> f64 {
    let n = model.n() as f64;
    model
        .structure
        .sizes()
        .iter()
        .zip(&model.deltas)
        .map(|(&k, &d)| {
            let k = k as f64;
            k / n * (1.0 + (k - 1.0) * d)
        })
        .sum()
}

/// Per-cluster average of the off-diagonal entries of a block-diagonal `Delta`.
///
/// This is the block that results from averaging `pi Delta pi'` over all
/// permutations that preserve the clusters; `1' Delta_m 1` is unchanged.
pub fn permutation_average(delta_dense: &DMatrix<f64>, cs: &ClusterStructure) -> Result<Vec<f64>> {
    let n = cs.n();
    if delta_dense.nrows() != n || delta_dense.ncols() != n {
        return invalid(format!(
            "matrix is {}x{}, structure has n = {n}",
            delta_dense.nrows(),
            delta_dense.ncols()
        ));
    }
    for i in 0..n {
        let mi = cs.cluster_of(i).expect("index in range");
        let r = cs.range(mi);
        for j in 0..n {
            let v = delta_dense[(i, j)];
            if !r.contains(&j) && v != 0.0 {
                return Err(LabError::StructureMismatch(format!(
                    "entry ({i}, {j}) = {v} lies outside the cluster blocks"
                )));
            }
        }
    }
    Ok(cs
        .ranges()
        .map(|r| {
            let k = r.len();
            if k < 2 {
                return 0.0;
            }
            let mut total = 0.0;
            for i in r.clone() {
                for j in r.clone() {
                    if i != j {
                        total += delta_dense[(i, j)];
                    }
                }
            }
            total / (k * (k - 1)) as f64
        })
        .collect())
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of a symmetric matrix.
pub fn eigen_bounds(delta_dense: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = delta_dense.nrows();
    if n != delta_dense.ncols() {
        return invalid("matrix is not square");
    }
    if n == 0 {
        return invalid("matrix is empty");
    }
    if n > DENSE_CAP {
        return invalid(format!("dimension {n} exceeds dense cap {DENSE_CAP}"));
    }
    let scale = delta_dense.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (delta_dense[(i, j)] - delta_dense[(j, i)]).abs() > 1e-12 * scale {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let eig = SymmetricEigen::new(delta_dense.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    Ok((lo, hi))
}

/// Deltas that make `Var(n_m^{-1/2} sum_{i in m} X_i) = sigma_sq` in every
/// cluster: `delta_m = (sigma_sq - 1) / (n_m - 1)`.
pub fn deltas_for_common_variance(cs: &ClusterStructure, sigma_sq: f64) -> Result<Vec<f64>> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return invalid(format!("sigma_sq must be positive, got {sigma_sq}"));
    }
    if let Some(m) = cs.sizes().iter().position(|&k| k < 2) {
        return invalid(format!(
            "cluster {m} is a singleton; its normalized-sum variance is fixed at 1"
        ));
    }
    let deltas: Vec<f64> = cs
        .sizes()
        .iter()
        .map(|&k| (sigma_sq - 1.0) / (k as f64 - 1.0))
        .collect();
    for (m, (&k, &d)) in cs.sizes().iter().zip(&deltas).enumerate() {
        check_block(m, k, d)?;
    }
    Ok(deltas)
}

/// Dense `Delta` of a block model (zero diagonal).
pub fn dense_delta(model: &BlockEquicorrModel, cap: usize) -> Result<DMatrix<f64>> {
    let mut s = model.dense_covariance(cap)?;
    for i in 0..s.nrows() {
        s[(i, i)] = 0.0;
    }
    Ok(s)
}

/// `1' A 1 / n` for a dense square matrix.
pub fn dense_mean_quadratic(a: &DMatrix<f64>) -> f64 {
    let ones = DVector::from_element(a.nrows(), 1.0);
    ones.dot(&(a * &ones)) / a.nrows() as f64
}
