//! Gamma-Gamma spend model.

use rayon::prelude::*;

use super::params::{Fit, GgParams};
use super::pnbd::{canonical_order, check_fit_input, minimize_with_restarts};
use crate::ingest::CustomerSummary;
use crate::numerics::ln_gamma;
use crate::{Error, Result};

/// Marginal log-density of `z_bar` given `x ≥ 1` repeat transactions.
pub fn gg_customer_log_likelihood(g: &GgParams, s: &CustomerSummary) -> Result<f64> {
    if s.x == 0 {
        return Err(Error::Domain("the spend density needs at least one repeat transaction".into()));
    }
    let GgParams { p, q, gamma } = *g;
    let (x, z) = (s.x as f64, s.z_bar);
    let px = p * x;
    Ok(ln_gamma(px + q)? - ln_gamma(px)? - ln_gamma(q)? + q * gamma.ln() + (px - 1.0) * z.ln() + px * x.ln()
        - (px + q) * (gamma + x * z).ln())
}

/// Sum over repeat purchasers; zero-repeaters are skipped.
pub fn gg_log_likelihood(g: &GgParams, summaries: &[CustomerSummary]) -> Result<f64> {
    g.validate()?;
    let parts: Vec<Result<f64>> = summaries
        .par_iter()
        .enumerate()
        .filter(|(_, s)| s.x > 0)
        .map(|(i, s)| match gg_customer_log_likelihood(g, s) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(Error::Numerical { customer: format!("#{i} {}", s.customer_id), message: format!("Gamma-Gamma log-likelihood is {v}") }),
            Err(e) => Err(Error::Numerical { customer: format!("#{i} {}", s.customer_id), message: e.to_string() }),
        })
        .collect();
    let mut total = 0.0;
    for v in parts {
        total += v?;
    }
    Ok(total)
}

/// Start at unit shapes with `gamma` at the mean repeat-customer `z_bar`,
/// which puts the implied mean spend on the data's scale.
pub fn gg_initial_guess(summaries: &[CustomerSummary]) -> GgParams {
    let zs: Vec<f64> = summaries.iter().filter(|s| s.x > 0).map(|s| s.z_bar).collect();
    let mean = zs.iter().sum::<f64>() / zs.len().max(1) as f64;
    GgParams { p: 1.0, q: 1.0, gamma: if mean > 0.0 { mean } else { 1.0 } }
}

/// Maximum-likelihood fit over repeat purchasers.
pub fn fit_gg(summaries: &[CustomerSummary], init: Option<GgParams>) -> Result<Fit<GgParams>> {
    check_fit_input(summaries, "Gamma-Gamma")?;
    let sorted = canonical_order(summaries);
    let summaries = sorted.as_slice();
    let start = init.unwrap_or_else(|| gg_initial_guess(summaries));
    start.validate()?;
    let n = summaries.iter().filter(|s| s.x > 0).count() as f64;
    let objective = |v: &[f64]| {
        if v.iter().any(|c| c.abs() > 30.0) {
            return f64::INFINITY;
        }
        gg_log_likelihood(&GgParams::from_log(v), summaries).map(|ll| -ll / n).unwrap_or(f64::INFINITY)
    };
    let best = minimize_with_restarts(objective, start.to_log())?;
    let params = GgParams::from_log(&best.point);
    Ok(Fit {
        params,
        log_likelihood: gg_log_likelihood(&params, summaries)?,
        converged: best.converged,
        evaluations: best.evaluations,
    })
}

/// Posterior mean spend per transaction, `p(γ + x z̄)/(px + q − 1)`.
pub fn gg_expected_spend(g: &GgParams, s: &CustomerSummary) -> Result<f64> {
    let x = s.x as f64;
    let den = g.p * x + g.q - 1.0;
    if den <= 0.0 {
        return Err(Error::Domain(format!("expected spend is infinite since px + q ≤ 1 (p={}, q={}, x={x})", g.p, g.q)));
    }
    Ok(g.p * (g.gamma + x * s.z_bar) / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_spend_weights_move_toward_z_bar() {
        let g = GgParams::new(6.25, 3.74, 15.44).unwrap();
        let prior_mean = g.p * g.gamma / (g.q - 1.0);
        let mut last_gap = f64::INFINITY;
        for x in [1, 5, 50, 5000] {
            let s = CustomerSummary::new("c", x, 1.0, 2.0, 100.0).unwrap();
            let e = gg_expected_spend(&g, &s).unwrap();
            assert!(e > 100.0f64.min(prior_mean) && e < 100.0f64.max(prior_mean));
            let gap = (e - 100.0).abs();
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 0.1);
    }

    #[test]
    fn zero_repeaters_do_not_enter() {
        let g = GgParams::new(2.0, 3.0, 4.0).unwrap();
        let rep = CustomerSummary::new("a", 2, 1.0, 2.0, 7.0).unwrap();
        let zero = CustomerSummary::new("b", 0, 0.0, 2.0, 9.0).unwrap();
        let both = gg_log_likelihood(&g, &[rep.clone(), zero.clone()]).unwrap();
        assert_eq!(both, gg_log_likelihood(&g, &[rep]).unwrap());
        assert!(gg_customer_log_likelihood(&g, &zero).is_err());
    }
}
