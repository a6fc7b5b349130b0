//! Distribution functions used by the tests and diagnostics.
//!
//! The normal and chi-square(1) CDFs go through the error function
//! (`libm`, the musl implementation, accurate to about one ulp). The normal quantile is
//! Wichura's AS241 (PPND16), which uses only `ln`, `sqrt` and rational
//! arithmetic and is therefore bit-stable across platforms. The Student-t
//! quantile inverts the incomplete-beta CDF by bracketing and bisection
//! followed by Newton polishing.

#![allow(clippy::excessive_precision)]

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use libm::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// CDF of the chi-square law with one degree of freedom.
pub fn chi2_1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf((0.5 * x).sqrt())
    }
}

#[inline]
fn poly(coef: &[f64; 8], r: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Standard normal quantile (AS241, PPND16). Returns `-inf`/`inf` at 0 and 1.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Student-t density with `df` degrees of freedom.
pub fn student_t_pdf(df: f64, t: f64) -> f64 {
    let ln = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * PI).ln()
        - 0.5 * (df + 1.0) * (t * t / df).ln_1p();
    ln.exp()
}

/// Upper tail `P(T > t)` for `t >= 0`.
fn student_t_upper(df: f64, t: f64) -> f64 {
    let t2 = t * t;
    if t2 < df {
        // small |t|: use the complementary incomplete-beta form to keep precision
        0.5 - 0.5 * beta_reg(0.5, 0.5 * df, t2 / (df + t2))
    } else {
        0.5 * beta_reg(0.5 * df, 0.5, df / (df + t2))
    }
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(df: f64, t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t >= 0.0 {
        1.0 - student_t_upper(df, t)
    } else {
        student_t_upper(df, -t)
    }
}

/// `p`-quantile of Student's t with `df >= 1` degrees of freedom.
///
/// Closed forms are used for `df = 1` (Cauchy) and `df = 2`; otherwise the
/// upper tail is inverted numerically to an absolute accuracy well below
/// 1e-8 for `p` in `[1e-12, 1 - 1e-12]`.
pub fn student_t_quantile(df: u32, p: f64) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    match df {
        1 => return (PI * (p - 0.5)).tan(),
        2 => return (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt(),
        _ => {}
    }
    if p < 0.5 {
        return -upper_tail_inverse(df as f64, p);
    }
    upper_tail_inverse(df as f64, 1.0 - p)
}

/// Solves `P(T > t) = tail` for `t > 0`, `tail < 1/2`.
fn upper_tail_inverse(df: f64, tail: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while student_t_upper(df, hi) > tail {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_upper(df, mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    // Newton polish: d/dt P(T > t) = -pdf(t)
    for _ in 0..3 {
        let f = student_t_upper(df, t) - tail;
        let d = student_t_pdf(df, t);
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        let next = t + step;
        if !(next > lo * 0.5 && next.is_finite()) {
            break;
        }
        t = next;
        if step.abs() <= 1e-16 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov distance between the empirical law of
/// `sample` and a continuous CDF. `sample` is sorted in place.
pub fn ks_one_sample(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let m = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / m - f;
            let below = f - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov test. Returns `(distance, p_value)` with
/// the asymptotic p-value (Stephens' small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    (d, p)
}
