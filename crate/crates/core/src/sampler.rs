//! Reproducible random streams and exact Gaussian samplers.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::cluster_model::{check_block, BlockEquicorrModel, DENSE_CAP};
use crate::error::{invalid, LabError, Result};
use crate::special::normal_quantile;

/// Counter-based stream of uniforms and standard normals.
///
/// The stream is ChaCha8 keyed by `master_seed` with stream id
/// `replication_id`; the `k`-th 64-bit word is a pure function of
/// `(master_seed, replication_id, k)`. Each uniform consumes one word and
/// each normal is the AS241 inverse CDF of one uniform.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    replication_id: u64,
    rng: ChaCha8Rng,
}

/// Stream for replication `replication_id` under `master_seed`.
pub fn derive_stream(master_seed: u64, replication_id: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication_id);
    RandomStream {
        master_seed,
        replication_id,
        rng,
    }
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

impl RandomStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replication_id(&self) -> u64 {
        self.replication_id
    }

    /// Index of the next draw.
    pub fn position(&self) -> u64 {
        (self.rng.get_word_pos() / 2) as u64
    }

    /// Repositions the stream so that the next draw is draw number `index`.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(index as u128 * 2);
    }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_M53
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(self.next_uniform())
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_normal();
        }
    }
}

/// One draw from `N(mu_bar 1, Sigma)` for a block model, written into `out`.
///
/// Within a block of size `k` with parameter `delta`, iid normals `g` with
/// mean `g_bar` are mapped to
/// `mu_bar + sqrt(1 - delta)(g_i - g_bar) + sqrt(1 + (k - 1) delta) g_bar`,
/// which has unit variance and within-block covariance `delta`.
pub fn sample_into(
    model: &BlockEquicorrModel,
    mu_bar: f64,
    stream: &mut RandomStream,
    out: &mut [f64],
) -> Result<()> {
    if out.len() != model.n() {
        return invalid(format!(
            "output buffer has length {}, model has n = {}",
            out.len(),
            model.n()
        ));
    }
    for (m, (range, delta)) in model.blocks().enumerate() {
        let k = range.len();
        check_block(m, k, delta)?;
        let block = &mut out[range];
        stream.fill_normals(block);
        if delta == 0.0 {
            for v in block.iter_mut() {
                *v += mu_bar;
            }
            continue;
        }
        let g_bar = block.iter().sum::<f64>() / k as f64;
        let within = (1.0 - delta).sqrt();
        let common = (1.0 + (k as f64 - 1.0) * delta).sqrt() * g_bar;
        for v in block.iter_mut() {
            *v = mu_bar + within * (*v - g_bar) + common;
        }
    }
    Ok(())
}

/// One draw from `N(mu_bar 1, Sigma)` for a block model.
pub fn sample(model: &BlockEquicorrModel, mu_bar: f64, stream: &mut RandomStream) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.n()];
    sample_into(model, mu_bar, stream, &mut out)?;
    Ok(out)
}

/// Dense Cholesky sampler, `mean + L g`. Oracle path only.
pub fn sample_dense(mean: &[f64], sigma: &DMatrix<f64>, stream: &mut RandomStream) -> Result<Vec<f64>> {
    let chol = dense_cholesky(mean.len(), sigma)?;
    Ok(sample_with_factor(mean, &chol, stream))
}

/// Lower Cholesky factor after dimension and symmetry checks.
pub fn dense_cholesky(n: usize, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() != n || sigma.ncols() != n {
        return invalid(format!(
            "covariance is {}x{}, mean has length {n}",
            sigma.nrows(),
            sigma.ncols()
        ));
    }
    if n > DENSE_CAP {
        return invalid(format!("dimension {n} exceeds dense cap {DENSE_CAP}"));
    }
    nalgebra::Cholesky::new(sigma.clone())
        .map(|c| c.l())
        .ok_or_else(|| LabError::Factorization("covariance is not positive definite".into()))
}

/// `mean + L g` for a precomputed lower factor `L`.
pub fn sample_with_factor(mean: &[f64], factor: &DMatrix<f64>, stream: &mut RandomStream) -> Vec<f64> {
    let mut g = DVector::zeros(mean.len());
    stream.fill_normals(g.as_mut_slice());
    let x = factor * g;
    mean.iter().zip(x.iter()).map(|(m, v)| m + v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster_model::{block_model, build_structure};

    #[test]
    fn same_identifiers_same_sequence() {
        let mut a = derive_stream(42, 0);
        let mut b = derive_stream(42, 0);
        for _ in 0..1000 {
            assert_eq!(a.next_normal().to_bits(), b.next_normal().to_bits());
        }
    }

    #[test]
    fn seek_reproduces_draws() {
        let mut a = derive_stream(9, 3);
        let draws: Vec<f64> = (0..50).map(|_| a.next_normal()).collect();
        assert_eq!(a.position(), 50);
        let mut b = derive_stream(9, 3);
        b.seek(37);
        assert_eq!(b.next_normal().to_bits(), draws[37].to_bits());
    }

    #[test]
    fn uniforms_are_open_interval() {
        let mut s = derive_stream(1, 1);
        for _ in 0..10_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn zero_delta_is_shifted_noise() {
        let cs = build_structure(&[3, 1, 4]).unwrap();
        let model = block_model(&cs, &[0.0, 0.0, 0.0], None).unwrap();
        let x = sample(&model, 2.5, &mut derive_stream(5, 0)).unwrap();
        let mut s = derive_stream(5, 0);
        for v in x {
            assert_eq!(v, 2.5 + s.next_normal());
        }
    }

    #[test]
    fn buffer_length_is_checked() {
        let model = BlockEquicorrModel::identity(&build_structure(&[2, 2]).unwrap());
        let mut buf = vec![0.0; 3];
        assert!(sample_into(&model, 0.0, &mut derive_stream(0, 0), &mut buf).is_err());
    }

    #[test]
    fn dense_rejects_non_spd() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sample_dense(&[0.0, 0.0], &sigma, &mut derive_stream(0, 0)),
            Err(LabError::Factorization(_))
        ));
    }
}
