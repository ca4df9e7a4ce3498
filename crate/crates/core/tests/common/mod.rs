//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the crate's own numerics.
#![allow(dead_code)]

use statrs::function::gamma::{digamma, ln_gamma};

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 8.0 * f64::EPSILON * (left.abs() + right.abs()) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // Pre-split so that narrow peaks are not missed by the first estimate.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 30)
        })
        .sum()
}

/// Adaptive Simpson with tolerance relative to a first coarse estimate.
pub fn simpson_rel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64) -> f64 {
    let coarse = simpson(f, a, b, f64::INFINITY);
    simpson(f, a, b, rel * coarse.abs())
}

pub fn gamma_ln_pdf(shape: f64, rate: f64, z: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * z.ln() - rate * z - ln_gamma(shape)
}

/// Log-space interval holding all but ~1e−15 of a Gamma(shape, rate) mass.
pub fn gamma_log_support(shape: f64, rate: f64) -> (f64, f64) {
    let lo = ((1e-15f64).ln() + ln_gamma(shape + 1.0)) / shape - rate.ln();
    let sd = shape.sqrt() / rate;
    let hi = (shape / rate + 60.0 * sd + 60.0 / rate).ln();
    (lo, hi)
}

/// KL(q ‖ p) by quadrature of q ln(q/p) over u = ln z.
pub fn kl_quadrature(aq: f64, bq: f64, ap: f64, bp: f64) -> f64 {
    let (lo_q, hi_q) = gamma_log_support(aq, bq);
    let f = |u: f64| {
        let z = u.exp();
        let lq = gamma_ln_pdf(aq, bq, z);
        let lp = gamma_ln_pdf(ap, bp, z);
        (lq + u).exp() * (lq - lp)
    };
    simpson(&f, lo_q, hi_q, 1e-13)
}

/// Closed-form Gamma KL evaluated with statrs special functions.
pub fn kl_closed_form(aq: f64, bq: f64, ap: f64, bp: f64) -> f64 {
    (aq - ap) * digamma(aq) - ln_gamma(aq) + ln_gamma(ap) + ap * (bq / bp).ln() + aq * (bp - bq) / bq
}

/// Individual-level Pareto/NBD likelihood (product form, no log-sum-exp).
pub fn pnbd_individual_likelihood(lambda: f64, mu: f64, x: u32, t_x: f64, t: f64) -> f64 {
    let x = x as f64;
    let s = lambda + mu;
    lambda.powf(x) * mu / s * (-s * t_x).exp() + lambda.powf(x + 1.0) / s * (-s * t).exp()
}

/// Individual Pareto/NBD × Gamma-Gamma log-likelihood: the spend mean of
/// `x` repeat purchases is Gamma(p·x, ν·x).
pub fn classical_individual_ll(lambda: f64, mu: f64, nu: f64, p: f64, x: u32, t_x: f64, t: f64, z_bar: f64) -> f64 {
    let mut ll = pnbd_individual_likelihood(lambda, mu, x, t_x, t).ln();
    if x > 0 {
        let xf = x as f64;
        ll += gamma_ln_pdf(p * xf, nu * xf, z_bar);
    }
    ll
}

/// Marginal Pareto/NBD likelihood: the individual likelihood integrated
/// against Gamma(r, α) × Gamma(s, β) by nested log-space quadrature.
pub fn pnbd_marginal_quadrature(r: f64, alpha: f64, s: f64, beta: f64, x: u32, t_x: f64, t: f64) -> f64 {
    let (lo_l, hi_l) = gamma_log_support(r, alpha);
    let (lo_m, hi_m) = gamma_log_support(s, beta);
    let inner = |ul: f64| {
        let lambda = ul.exp();
        let wl = (gamma_ln_pdf(r, alpha, lambda) + ul).exp();
        let g = |um: f64| {
            let mu = um.exp();
            (gamma_ln_pdf(s, beta, mu) + um).exp() * pnbd_individual_likelihood(lambda, mu, x, t_x, t)
        };
        wl * simpson_rel(&g, lo_m, hi_m, 1e-11)
    };
    simpson_rel(&inner, lo_l, hi_l, 1e-11)
}

/// Gamma-Gamma marginal density of z̄ given x ≥ 1 by quadrature over ν.
pub fn gg_marginal_quadrature(p: f64, q: f64, gamma: f64, x: u32, z_bar: f64) -> f64 {
    let (lo, hi) = gamma_log_support(q, gamma);
    let xf = x as f64;
    let f = |u: f64| {
        let nu = u.exp();
        (gamma_ln_pdf(q, gamma, nu) + u + gamma_ln_pdf(p * xf, nu * xf, z_bar)).exp()
    };
    simpson_rel(&f, lo, hi, 1e-11)
}

/// Two-sided Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Direct alternating series of 2F1(a, b; c; z), summed with compensated
/// addition; only meaningful for |z| < 1.
pub fn hyp2f1_direct(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let (mut sum, mut comp, mut term) = (1.0f64, 0.0f64, 1.0f64);
    for k in 0..200_000 {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
