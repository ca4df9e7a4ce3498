//! Classical Pareto/NBD: heterogeneity-integrated likelihood, fitting and
//! individual-level expectations.

use rayon::prelude::*;

use super::params::{Fit, ParetoNbdParams};
use super::simplex::{nelder_mead, SimplexOptions, SimplexResult};
use crate::ingest::CustomerSummary;
use crate::numerics::{integrate, ln_gamma, ln_gauss_2f1, ln_one_minus_exp_neg, log_sum_exp};
use crate::{Error, Result};

/// Pieces shared by the likelihood and P(alive): `ln_pre + term1` is the
/// alive-at-T branch, `ln_pre + ln(s/(r+s+x)) + ln A0` the died-in-(t_x, T] branch.
struct Branches {
    alive: f64,
    died: f64,
}

/// Above this 2F1 argument the series needs too many terms and the
/// death-time integral is evaluated by quadrature instead.
const SERIES_MAX_Z: f64 = 0.5;

fn ln_death_integral(r: f64, alpha: f64, s: f64, beta: f64, x: f64, t_x: f64, t: f64) -> Result<f64> {
    // ∫_{t_x}^{T} (α+τ)^{−(r+x)} (β+τ)^{−(s+1)} dτ, scaled by its value at t_x
    let (m, k) = (r + x, s + 1.0);
    let (a0, b0) = (alpha + t_x, beta + t_x);
    let peak = -m * a0.ln() - k * b0.ln();
    let relative = |tau: f64| {
        let d = tau - t_x;
        (-m * (d / a0).ln_1p() - k * (d / b0).ln_1p()).exp()
    };
    let v = integrate(relative, t_x, t, 1e-13)?;
    Ok(peak + v.ln())
}

fn branches(p: &ParetoNbdParams, x: f64, t_x: f64, t: f64) -> Result<Branches> {
    let ParetoNbdParams { r, alpha, s, beta } = *p;
    let ln_pre = ln_gamma(r + x)? - ln_gamma(r)? + r * alpha.ln() + s * beta.ln();
    let term1 = -(r + x) * (alpha + t).ln() - s * (beta + t).ln();
    if t <= t_x {
        return Ok(Branches { alive: ln_pre + term1, died: f64::NEG_INFINITY });
    }
    let a = r + s + x;
    let z_at = |time: f64| if alpha >= beta { (alpha - beta) / (alpha + time) } else { (beta - alpha) / (beta + time) };
    if z_at(t_x) > SERIES_MAX_Z {
        let died = ln_pre + s.ln() + ln_death_integral(r, alpha, s, beta, x, t_x, t)?;
        return Ok(Branches { alive: ln_pre + term1, died });
    }
    let ln_a = |time: f64| -> Result<f64> {
        if alpha >= beta {
            let den = alpha + time;
            Ok(ln_gauss_2f1(a, s + 1.0, a + 1.0, (alpha - beta) / den)? - a * den.ln())
        } else {
            let den = beta + time;
            Ok(ln_gauss_2f1(a, r + x, a + 1.0, (beta - alpha) / den)? - a * den.ln())
        }
    };
    let (la_tx, la_t) = (ln_a(t_x)?, ln_a(t)?);
    let gap = la_tx - la_t;
    let ln_a0 = if gap > 0.0 { la_tx + ln_one_minus_exp_neg(gap) } else { f64::NEG_INFINITY };
    Ok(Branches { alive: ln_pre + term1, died: ln_pre + (s / a).ln() + ln_a0 })
}

/// Marginal log-likelihood of one customer.
pub fn pnbd_customer_log_likelihood(p: &ParetoNbdParams, s: &CustomerSummary) -> Result<f64> {
    let b = branches(p, s.x as f64, s.t_x, s.t)?;
    Ok(log_sum_exp(b.alive, b.died))
}

fn per_customer(p: &ParetoNbdParams, summaries: &[CustomerSummary]) -> Vec<Result<f64>> {
    summaries
        .par_iter()
        .enumerate()
        .map(|(i, s)| match pnbd_customer_log_likelihood(p, s) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(Error::Numerical { customer: format!("#{i} {}", s.customer_id), message: format!("Pareto/NBD log-likelihood is {v}") }),
            Err(e) => Err(Error::Numerical { customer: format!("#{i} {}", s.customer_id), message: e.to_string() }),
        })
        .collect()
}

/// Sum of marginal log-likelihoods. Customers are evaluated in parallel and
/// summed in input order.
pub fn pnbd_log_likelihood(p: &ParetoNbdParams, summaries: &[CustomerSummary]) -> Result<f64> {
    p.validate()?;
    let mut total = 0.0;
    for v in per_customer(p, summaries) {
        total += v?;
    }
    Ok(total)
}

/// P(alive at T | x, t_x, T).
pub fn pnbd_p_alive(p: &ParetoNbdParams, s: &CustomerSummary) -> Result<f64> {
    let b = branches(p, s.x as f64, s.t_x, s.t)?;
    Ok((b.alive - log_sum_exp(b.alive, b.died)).exp().clamp(0.0, 1.0))
}

/// Expected transactions in `(T, T + t]` given the customer's history.
pub fn pnbd_expected_transactions(p: &ParetoNbdParams, s: &CustomerSummary, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("horizon must be non-negative, got {t}")));
    }
    let x = s.x as f64;
    let ln_y = ((p.beta + s.t) / (p.beta + s.t + t)).ln();
    // (1 − y^{s−1})/(s−1), continuous through s = 1
    let e = p.s - 1.0;
    let ratio = if e.abs() * ln_y.abs() < 1e-300 { -ln_y } else { -(e * ln_y).exp_m1() / e };
    let rate_part = (p.r + x) * (p.beta + s.t) / (p.alpha + s.t);
    Ok(pnbd_p_alive(p, s)? * rate_part * ratio)
}

pub(crate) fn check_fit_input(summaries: &[CustomerSummary], what: &str) -> Result<()> {
    if summaries.len() < 2 {
        return Err(Error::DegenerateData(format!("{what} fit needs at least 2 customers")));
    }
    if summaries.iter().all(|s| s.x == 0) {
        return Err(Error::DegenerateData(format!("{what} fit needs at least one repeat purchaser")));
    }
    Ok(())
}

/// Copy of the summaries sorted by `(x, t_x, T, z̄)`. Fits run on this
/// order so that floating-point sums, and hence the optimum, do not depend
/// on how the input was ordered.
pub(crate) fn canonical_order(summaries: &[CustomerSummary]) -> Vec<CustomerSummary> {
    let mut sorted = summaries.to_vec();
    sorted.sort_by(|a, b| {
        a.x.cmp(&b.x)
            .then(a.t_x.total_cmp(&b.t_x))
            .then(a.t.total_cmp(&b.t))
            .then(a.z_bar.total_cmp(&b.z_bar))
    });
    sorted
}

/// Default starting point: unit shapes, alpha at the mean inter-purchase time
/// of repeaters and beta at the mean observation length.
pub fn pnbd_initial_guess(summaries: &[CustomerSummary]) -> ParetoNbdParams {
    let repeaters: Vec<_> = summaries.iter().filter(|s| s.x > 0).collect();
    let ipt = repeaters.iter().map(|s| s.t_x / s.x as f64).sum::<f64>() / repeaters.len().max(1) as f64;
    let t_bar = summaries.iter().map(|s| s.t).sum::<f64>() / summaries.len() as f64;
    ParetoNbdParams { r: 1.0, alpha: ipt.max(1e-3), s: 1.0, beta: t_bar.max(1e-3) }
}

/// Maximum-likelihood fit by simplex search on log-parameters.
pub fn fit_pnbd(summaries: &[CustomerSummary], init: Option<ParetoNbdParams>) -> Result<Fit<ParetoNbdParams>> {
    check_fit_input(summaries, "Pareto/NBD")?;
    let sorted = canonical_order(summaries);
    let summaries = sorted.as_slice();
    let start = init.unwrap_or_else(|| pnbd_initial_guess(summaries));
    start.validate()?;
    let n = summaries.len() as f64;
    let objective = |v: &[f64]| {
        if v.iter().any(|c| c.abs() > 30.0) {
            return f64::INFINITY;
        }
        pnbd_log_likelihood(&ParetoNbdParams::from_log(v), summaries).map(|ll| -ll / n).unwrap_or(f64::INFINITY)
    };
    let best = minimize_with_restarts(objective, start.to_log())?;
    let params = ParetoNbdParams::from_log(&best.point);
    Ok(Fit {
        params,
        log_likelihood: pnbd_log_likelihood(&params, summaries)?,
        converged: best.converged,
        evaluations: best.evaluations,
    })
}

/// Simplex search restarted from its own optimum until a restart stops
/// improving, sharing one evaluation budget.
pub(crate) fn minimize_with_restarts(mut objective: impl FnMut(&[f64]) -> f64, start: Vec<f64>) -> Result<SimplexResult> {
    let budget = SimplexOptions::default().max_evaluations;
    let mut best = nelder_mead(&mut objective, &start, SimplexOptions::default());
    if !best.value.is_finite() {
        return Err(Error::Convergence("objective is not finite anywhere on the simplex".into()));
    }
    let mut used = best.evaluations;
    for _ in 0..3 {
        if !best.converged || used >= budget {
            break;
        }
        let opts = SimplexOptions { max_evaluations: budget - used, initial_step: 0.05, ..Default::default() };
        let r = nelder_mead(&mut objective, &best.point, opts);
        used += r.evaluations;
        let improved = best.value - r.value > 1e-12 * best.value.abs().max(1.0);
        if r.value <= best.value {
            best = r;
        }
        if !improved {
            break;
        }
    }
    best.evaluations = used;
    Ok(best)
}
