//! Exact Gaussian log-likelihood ratios and contiguity diagnostics.
//!
//! The equicorrelation formula is evaluated through the projection onto
//! `k^{-1/2} 1` and its orthogonal complement, so only `sum x` and
//! `sum (x - x_bar)^2` per block are needed. The dense path exists to
//! cross-check it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster_model::{block_model, check_block, BlockEquicorrModel, ClusterStructure, DENSE_CAP};
use crate::error::{invalid, LabError, Result};
use crate::sampler::{dense_cholesky, derive_stream};
use crate::special::{chi2_1_cdf, ks_one_sample};

/// Agreement required between the two dense evaluation paths, relative to
/// `max(1, |value|)`.
pub const DENSE_PATH_TOLERANCE: f64 = 1e-8;

/// `log dN(mu_bar 1, Sigma(delta)) / dN(0, I)` at `x`, with
/// `Sigma(delta) = I + delta (1 1' - I)`.
pub fn loglr_equicorr(x: &[f64], mu_bar: f64, delta: f64) -> Result<f64> {
    let k = x.len();
    if k == 0 {
        return invalid("empty data");
    }
    check_block(0, k, delta)?;
    Ok(equicorr_terms(x, mu_bar, delta))
}

fn equicorr_terms(x: &[f64], mu_bar: f64, delta: f64) -> f64 {
    let k = x.len() as f64;
    let sum: f64 = x.iter().sum();
    let mean = sum / k;
    // first rotated coordinate and squared norm of the rest
    let z1 = sum / k.sqrt();
    let rest: f64 = if x.len() > 1 {
        x.iter().map(|v| (v - mean) * (v - mean)).sum()
    } else {
        0.0
    };
    let lambda1 = (k - 1.0) * delta;
    let top = 1.0 + lambda1;
    let mut value = -0.5 * lambda1.ln_1p() + lambda1 * z1 * z1 / (2.0 * top);
    if delta != 0.0 {
        value += -0.5 * (k - 1.0) * (-delta).ln_1p() - delta / (2.0 * (1.0 - delta)) * rest;
    }
    if mu_bar != 0.0 {
        value += k.sqrt() * mu_bar * z1 / top - k * mu_bar * mu_bar / (2.0 * top);
    }
    value
}

/// Block-model log-LR against `N(0, I)`: the sum of per-block equicorrelation terms.
pub fn loglr_block_model(x: &[f64], model: &BlockEquicorrModel, mu_bar: f64) -> Result<f64> {
    if x.len() != model.n() {
        return invalid(format!("data length {} does not match n = {}", x.len(), model.n()));
    }
    Ok(model
        .blocks()
        .map(|(r, d)| equicorr_terms(&x[r], mu_bar, d))
        .sum())
}

/// Block-model log-LR from a structure and per-cluster deltas.
pub fn loglr_cluster(x: &[f64], cs: &ClusterStructure, deltas: &[f64], mu_bar: f64) -> Result<f64> {
    let model = block_model(cs, deltas, None)?;
    loglr_block_model(x, &model, mu_bar)
}

/// Two Gaussian laws on `R^n` given densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGaussianPair {
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub mu1: DVector<f64>,
    pub sigma1: DMatrix<f64>,
}

impl DenseGaussianPair {
    pub fn new(
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
        mu1: DVector<f64>,
        sigma1: DMatrix<f64>,
    ) -> Result<Self> {
        let n = mu0.len();
        if mu1.len() != n || sigma0.shape() != (n, n) || sigma1.shape() != (n, n) {
            return invalid("dimensions of means and covariances disagree");
        }
        if n > DENSE_CAP {
            return invalid(format!("dimension {n} exceeds dense cap {DENSE_CAP}"));
        }
        Ok(Self { mu0, sigma0, mu1, sigma1 })
    }

    /// `N(0, I)` against `N(mu_bar 1, Sigma)` of a block model.
    pub fn from_block_model(model: &BlockEquicorrModel, mu_bar: f64) -> Result<Self> {
        let n = model.n();
        Self::new(
            DVector::zeros(n),
            DMatrix::identity(n, n),
            DVector::from_element(n, mu_bar),
            model.dense_covariance(DENSE_CAP)?,
        )
    }

    pub fn n(&self) -> usize {
        self.mu0.len()
    }
}

/// Both evaluations of a dense log-LR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseLogLr {
    /// Difference of log densities through Cholesky factors.
    pub direct: f64,
    /// Rotated-coordinates formula; `None` when some relative eigenvalue
    /// `lambda_i` has `|lambda_i| >= 1`.
    pub spectral: Option<f64>,
}

impl DenseLogLr {
    pub fn value(&self) -> f64 {
        self.direct
    }
}

/// `log dN(mu1, Sigma1) / dN(mu0, Sigma0)` at `x`, by both dense paths.
///
/// Errors with [`LabError::PathDisagreement`] if the paths differ by more
/// than [`DENSE_PATH_TOLERANCE`].
pub fn loglr_dense(x: &[f64], pair: &DenseGaussianPair) -> Result<DenseLogLr> {
    let n = pair.n();
    if x.len() != n {
        return invalid(format!("data length {} does not match dimension {n}", x.len()));
    }
    let x = DVector::from_column_slice(x);
    let direct = log_density(&x, &pair.mu1, &pair.sigma1)? - log_density(&x, &pair.mu0, &pair.sigma0)?;
    let spectral = spectral_loglr(&x, pair)?;
    if let Some(s) = spectral {
        if (s - direct).abs() > DENSE_PATH_TOLERANCE * direct.abs().max(1.0) {
            return Err(LabError::PathDisagreement { direct, spectral: s });
        }
    }
    Ok(DenseLogLr { direct, spectral })
}

/// Log density without the `-(n/2) log 2 pi` constant.
fn log_density(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    let l = dense_cholesky(mu.len(), sigma)?;
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let r = x - mu;
    let w = l
        .solve_lower_triangular(&r)
        .ok_or_else(|| LabError::Factorization("singular Cholesky factor".into()))?;
    Ok(-0.5 * log_det - 0.5 * w.norm_squared())
}

/// Rotated-coordinates path. With `Sigma0 = U S U'`,
/// `A = U'(Sigma1 - Sigma0)U` and `S^{-1/2} A S^{-1/2} = B Lambda B'`,
/// set `Z = B' S^{-1/2} U'(x - mu0)`, `m = B' S^{-1/2} U'(mu1 - mu0)` and
/// `q_i = sqrt(1 + lambda_i)`; then the log-LR is
/// `-sum log q_i + (1/2) sum (Z_i(q_i + 1) - m_i)(Z_i(q_i - 1) + m_i) / q_i^2`.
fn spectral_loglr(x: &DVector<f64>, pair: &DenseGaussianPair) -> Result<Option<f64>> {
    let eig0 = SymmetricEigen::new(pair.sigma0.clone());
    if eig0.eigenvalues.iter().any(|&s| s <= 0.0) {
        return Err(LabError::Factorization("Sigma0 is not positive definite".into()));
    }
    let u = &eig0.eigenvectors;
    let inv_sqrt = DMatrix::from_diagonal(&eig0.eigenvalues.map(|s| 1.0 / s.sqrt()));
    let a = u.transpose() * (&pair.sigma1 - &pair.sigma0) * u;
    let mut k = &inv_sqrt * a * &inv_sqrt;
    k = (&k + k.transpose()) * 0.5;
    let eig = SymmetricEigen::new(k);
    if eig.eigenvalues.iter().any(|l| l.abs() >= 1.0) {
        return Ok(None);
    }
    let rot = eig.eigenvectors.transpose() * &inv_sqrt * u.transpose();
    let z = &rot * (x - &pair.mu0);
    let m = &rot * (&pair.mu1 - &pair.mu0);
    let mut value = 0.0;
    for i in 0..z.len() {
        let q = (1.0 + eig.eigenvalues[i]).sqrt();
        value -= q.ln();
        value += 0.5 * (z[i] * (q + 1.0) - m[i]) * (z[i] * (q - 1.0) + m[i]) / (q * q);
    }
    Ok(Some(value))
}

/// Law of `W = -log sqrt(1 + delta) + delta Z^2 / (2(1 + delta))`,
/// `Z ~ N(0, 1)`: the limit of the log-LR in the local-to-independence
/// common-shock design with `n delta_n -> delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    delta: f64,
}

impl LimitLaw {
    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta == 0.0 || delta <= -1.0 {
            return invalid(format!("limit law needs delta > -1, delta != 0; got {delta}"));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `-log sqrt(1 + delta)`: lower end of the support for `delta > 0`,
    /// upper end for `delta < 0`.
    pub fn support_bound(&self) -> f64 {
        -0.5 * self.delta.ln_1p()
    }

    pub fn cdf(&self, w: f64) -> f64 {
        let b = self.support_bound();
        let t = 2.0 * (1.0 + self.delta) * (w - b) / self.delta;
        if self.delta > 0.0 {
            if w <= b {
                0.0
            } else {
                chi2_1_cdf(t)
            }
        } else if w >= b {
            1.0
        } else {
            1.0 - chi2_1_cdf(t)
        }
    }

    /// Value of `W` at a given `Z`.
    pub fn transform(&self, z: f64) -> f64 {
        self.support_bound() + self.delta * z * z / (2.0 * (1.0 + self.delta))
    }
}

pub fn limit_law_cdf(delta: f64, w: f64) -> Result<f64> {
    Ok(LimitLaw::new(delta)?.cdf(w))
}

/// Monte Carlo summary of the likelihood ratio under `N(0, I)`.
///
/// Serializes with the field names `mean_lr`, `se_mean_lr`, `moment_1pe`,
/// `se_moment_1pe`, `ks`, `n`, `reps`, `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrDiagnostics {
    pub mean_lr: f64,
    pub se_mean_lr: f64,
    /// Mean of `LR^(1 + epsilon)`.
    pub moment_1pe: f64,
    pub se_moment_1pe: f64,
    /// KS distance to [`LimitLaw`] with `delta = n delta_1`, for single-cluster models.
    pub ks: Option<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
}

pub const MIN_DIAGNOSTIC_REPS: usize = 1000;

/// Simulates `reps` draws from `N(0, I)` (replication `r` uses
/// `derive_stream(seed, r)`) and summarizes `LR = dN(0, Sigma)/dN(0, I)`.
pub fn lr_diagnostics(
    model: &BlockEquicorrModel,
    epsilon: f64,
    reps: usize,
    seed: u64,
) -> Result<LrDiagnostics> {
    if reps < MIN_DIAGNOSTIC_REPS {
        return invalid(format!("need at least {MIN_DIAGNOSTIC_REPS} replications, got {reps}"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let n = model.n();
    let loglr: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, r| {
                let mut stream = derive_stream(seed, r as u64);
                stream.fill_normals(buf);
                loglr_block_model(buf, model, 0.0).expect("buffer sized to model")
            },
        )
        .collect();

    let (mean_lr, se_mean_lr) = mean_and_se(loglr.iter().map(|l| l.exp()));
    let (moment_1pe, se_moment_1pe) = mean_and_se(loglr.iter().map(|l| ((1.0 + epsilon) * l).exp()));

    let cs = model.structure();
    let ks = if cs.m() == 1 && n >= 2 && model.deltas()[0] != 0.0 {
        let law = LimitLaw::new(n as f64 * model.deltas()[0])?;
        let mut sample = loglr;
        Some(ks_one_sample(&mut sample, |w| law.cdf(w)))
    } else {
        None
    };

    Ok(LrDiagnostics {
        mean_lr,
        se_mean_lr,
        moment_1pe,
        se_moment_1pe,
        ks,
        n,
        reps,
        seed,
    })
}

/// Sample mean and its standard error, summed in iteration order.
pub(crate) fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / count;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let sd = if count > 1.0 { (ss / (count - 1.0)).sqrt() } else { 0.0 };
    (mean, sd / count.sqrt())
}
