//! Log-gamma, polygamma and incomplete-gamma functions on the positive axis.

use std::sync::OnceLock;

use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1)) for k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

const ASYMPTOTIC_FROM: f64 = 8.0;
const TAYLOR_RADIUS: f64 = 0.2;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires a positive finite argument, got {x}")))
    }
}

/// Coefficients of ln Γ(1 + e) = Σ c_k e^k around e = 0.
fn ln_gamma_taylor_coefficients() -> &'static [f64; 32] {
    static COEFFS: OnceLock<[f64; 32]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        const ZETA: [f64; 8] = [
            1.644_934_066_848_226_4,
            1.202_056_903_159_594_3,
            1.082_323_233_711_138_2,
            1.036_927_755_143_37,
            1.017_343_061_984_449_1,
            1.008_349_277_381_922_8,
            1.004_077_356_197_944_3,
            1.002_008_392_826_082_2,
        ];
        let mut c = [0.0; 32];
        c[1] = -EULER_GAMMA;
        for (k, slot) in c.iter_mut().enumerate().skip(2) {
            let zeta = if k < 10 {
                ZETA[k - 2]
            } else {
                1.0 + (2..64).map(|n| (n as f64).powi(-(k as i32))).sum::<f64>()
            };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *slot = sign * zeta / k as f64;
        }
        c
    })
}

fn ln_gamma_near_one(e: f64) -> f64 {
    let c = ln_gamma_taylor_coefficients();
    c.iter().rev().fold(0.0, |acc, &ck| acc * e + ck)
}

fn stirling(y: f64) -> f64 {
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = STIRLING.iter().rev().fold(0.0, |acc, &ck| acc * inv2 + ck) * inv;
    (y - 0.5) * y.ln() - y + HALF_LN_2PI + series
}

/// ln Γ(x) without the domain check. `x` must be positive.
pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if (x - 1.0).abs() < TAYLOR_RADIUS {
        return ln_gamma_near_one(x - 1.0);
    }
    if (x - 2.0).abs() < TAYLOR_RADIUS {
        let e = x - 2.0;
        return ln_gamma_near_one(e) + e.ln_1p();
    }
    if x >= ASYMPTOTIC_FROM {
        return stirling(x);
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < ASYMPTOTIC_FROM {
        prod *= y;
        y += 1.0;
    }
    stirling(y) - prod.ln()
}

/// Natural log of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive("ln_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // -Σ B_{2k} / (2k x^{2k})
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - tail
}

/// Digamma ψ(x) = d/dx ln Γ(x) for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(x: f64) -> f64 {
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Σ B_{2k} / x^{2k+1}
    let tail = inv
        * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))));
    shift + inv + 0.5 * inv2 + tail
}

/// Trigamma ψ′(x) for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive("trigamma", x)?;
    Ok(trigamma_unchecked(x))
}

/// ln(e^a + e^b), with −∞ as the identity element.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln(1 − e^{−d}) for `d ≥ 0`.
pub fn ln_one_minus_exp_neg(d: f64) -> f64 {
    if d > std::f64::consts::LN_2 {
        (-(-d).exp()).ln_1p()
    } else {
        (-(-d).exp_m1()).ln()
    }
}

/// Stable ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// Logistic function, the derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

/// ln of x^a e^{-x} / Γ(a), the common prefactor of P and Q.
fn incomplete_prefactor_ln(a: f64, x: f64) -> f64 {
    a * x.ln() - x - ln_gamma_unchecked(a)
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * incomplete_prefactor_ln(a, x).exp()
}

fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= 2.0 * f64::EPSILON {
            break;
        }
    }
    incomplete_prefactor_ln(a, x).exp() * h
}

/// Regularized lower incomplete gamma P(a, x), the unit-rate Gamma(a) CDF.
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64> {
    check_positive("regularized_gamma_p shape", a)?;
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("regularized_gamma_p requires x >= 0, got {x}")));
    }
    Ok(gamma_p_unchecked(a, x))
}

pub(crate) fn gamma_p_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn regularized_gamma_q(a: f64, x: f64) -> Result<f64> {
    check_positive("regularized_gamma_q shape", a)?;
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("regularized_gamma_q requires x >= 0, got {x}")));
    }
    Ok(gamma_q_unchecked(a, x))
}

pub(crate) fn gamma_q_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_continued_fraction(a, x)
    }
}
