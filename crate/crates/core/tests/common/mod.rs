//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-17) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Log-gamma by shifting to x >= 10 and applying Stirling's series.
pub fn ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

pub fn t_pdf(df: f64, t: f64) -> f64 {
    let c = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln();
    (c - 0.5 * (df + 1.0) * (1.0 + t * t / df).ln()).exp()
}

/// `P(T <= t)` for `t >= 0` by quadrature of the density, using the
/// substitution `t = tan(theta)` to tame the Cauchy tail.
pub fn t_cdf_quadrature(df: f64, t: f64) -> f64 {
    assert!(t >= 0.0);
    let g = |th: f64| {
        let c = th.cos();
        t_pdf(df, th.tan()) / (c * c)
    };
    0.5 + simpson(&g, 0.0, t.atan(), 1e-15)
}

/// Upper quantile (`p > 1/2`) by bisection on the quadrature CDF.
pub fn t_quantile_quadrature(df: f64, p: f64) -> f64 {
    assert!(p > 0.5);
    let (mut lo, mut hi) = (0.0, 1.0);
    while t_cdf_quadrature(df, hi) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_quadrature(df, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Number of eigenvalues of symmetric `a` below `x`, by Sylvester's law of
/// inertia on the LDL' pivots of `a - x I`.
pub fn count_below(a: &DMatrix<f64>, x: f64) -> usize {
    let n = a.nrows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= x;
    }
    let mut neg = 0;
    for k in 0..n {
        let mut p = m[k][k];
        if p == 0.0 {
            p = -1e-300;
        }
        if p < 0.0 {
            neg += 1;
        }
        for i in (k + 1)..n {
            let f = m[i][k] / p;
            for j in (k + 1)..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    neg
}

/// All eigenvalues of a symmetric matrix, ascending, by inertia bisection.
pub fn eigenvalues_bisection(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let bound = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            // smallest x with at least k + 1 eigenvalues below it
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-14 * bound {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Orthonormal basis with first column `k^{-1/2} 1`, built from scratch.
pub fn helmert(k: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        h[(i, 0)] = 1.0 / (k as f64).sqrt();
    }
    for j in 1..k {
        let norm = ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            h[(i, j)] = 1.0 / norm;
        }
        h[(j, j)] = -(j as f64) / norm;
    }
    h
}

/// Equicorrelation log-LR through an explicit rotation `z = B' x`:
/// `sum_i [-log sqrt(1 + l_i) + l_i z_i^2 / (2(1 + l_i))]` plus the mean
/// terms, which only involve `z_1`.
pub fn loglr_equicorr_rotation(x: &[f64], mu_bar: f64, delta: f64) -> f64 {
    let k = x.len();
    let z = helmert(k).transpose() * DVector::from_column_slice(x);
    let kf = k as f64;
    let mut value = 0.0;
    for i in 0..k {
        let l = if i == 0 { (kf - 1.0) * delta } else { -delta };
        value += -0.5 * (1.0 + l).ln() + l * z[i] * z[i] / (2.0 * (1.0 + l));
    }
    let top = 1.0 + (kf - 1.0) * delta;
    let m1 = kf.sqrt() * mu_bar;
    value + m1 * z[0] / top - m1 * m1 / (2.0 * top)
}

/// Random cluster sizes with total at most `n_max`, sizes in `1..=max_size`.
pub fn random_sizes(r: &mut StdRng, n_max: usize, max_size: usize) -> Vec<usize> {
    let m = r.random_range(1..=n_max.min(8));
    let mut sizes = Vec::new();
    let mut total = 0;
    for _ in 0..m {
        let k = r.random_range(1..=max_size);
        if total + k > n_max {
            break;
        }
        sizes.push(k);
        total += k;
    }
    if sizes.is_empty() {
        sizes.push(1);
    }
    sizes
}

/// A valid delta for a block of size `k`, drawn strictly inside `(-1/(k-1), 1)`.
pub fn random_delta(r: &mut StdRng, k: usize) -> f64 {
    if k == 1 {
        return 0.0;
    }
    let lo = -1.0 / (k as f64 - 1.0);
    let u: f64 = r.random_range(0.02..0.98);
    lo + u * (1.0 - lo)
}

/// Random symmetric matrix with standard normal-ish entries.
pub fn random_symmetric(r: &mut StdRng, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = r.random_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Random SPD matrix `Q diag(s) Q'` with spectrum in `[lo, hi]`.
pub fn random_spd(r: &mut StdRng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_symmetric(r, n).symmetric_eigen().eigenvectors;
    let s = DVector::from_fn(n, |_, _| r.random_range(lo..hi));
    &q * DMatrix::from_diagonal(&s) * q.transpose()
}

/// Symmetric square root of an SPD matrix.
pub fn spd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt)) * e.eigenvectors.transpose()
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}
