//! Conditional likelihood of the RFM summary given decoded rates, and the
//! Gamma KL divergence.

use serde::{Deserialize, Serialize};

use crate::ingest::CustomerSummary;
use crate::numerics::{digamma, ln_gamma, log_sum_exp, GammaParams};
use crate::{Error, Result};

/// Decoder outputs for one latent draw: purchase rate Λ, dropout rate M and
/// spend rate N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedRates {
    pub lambda: f64,
    pub m: f64,
    pub n: f64,
}

/// Pareto/NBD part: `ln[Λ^x M/(Λ+M) e^{−(Λ+M)t_x} + Λ^{x+1}/(Λ+M) e^{−(Λ+M)T}]`.
pub fn pnbd_conditional_log_likelihood(lambda: f64, m: f64, x: f64, t_x: f64, t: f64) -> f64 {
    let total = lambda + m;
    let ln_total = total.ln();
    let ln_lambda = lambda.ln();
    let died = x * ln_lambda + m.ln() - ln_total - total * t_x;
    let alive = (x + 1.0) * ln_lambda - ln_total - total * t;
    log_sum_exp(died, alive)
}

/// Spend factor `px ln(Nx) − ln Γ(px) + (px−1) ln z̄ − N x z̄`, defined for `x ≥ 1`.
pub fn spend_log_likelihood(n: f64, p_spend: f64, x: f64, z_bar: f64) -> Result<f64> {
    let px = p_spend * x;
    Ok(px * (n * x).ln() - ln_gamma(px)? + (px - 1.0) * z_bar.ln() - n * x * z_bar)
}

/// Log conditional likelihood of one customer's summary. The spend factor
/// enters only for repeat purchasers.
pub fn conditional_log_likelihood(rates: &DecodedRates, p_spend: f64, s: &CustomerSummary) -> Result<f64> {
    let numerical = |message: String| Error::Numerical { customer: s.customer_id.clone(), message };
    if !(rates.lambda > 0.0 && rates.m > 0.0 && rates.n > 0.0) {
        return Err(numerical(format!("rates must be positive: {rates:?}")));
    }
    let x = s.x as f64;
    let mut ll = pnbd_conditional_log_likelihood(rates.lambda, rates.m, x, s.t_x, s.t);
    if s.x > 0 {
        ll += spend_log_likelihood(rates.n, p_spend, x, s.z_bar).map_err(|e| numerical(e.to_string()))?;
    }
    if !ll.is_finite() {
        return Err(numerical(format!("conditional log-likelihood is {ll}")));
    }
    Ok(ll)
}

/// KL(q ‖ p) between Gamma distributions in shape/rate form.
pub fn kl_gamma(q: &GammaParams, p: &GammaParams) -> f64 {
    let (aq, bq, ap, bp) = (q.shape, q.rate, p.shape, p.rate);
    let psi = digamma(aq).expect("validated shape");
    let lg_q = ln_gamma(aq).expect("validated shape");
    let lg_p = ln_gamma(ap).expect("validated shape");
    (aq - ap) * psi - lg_q + lg_p + ap * (bq.ln() - bp.ln()) + aq * (bp - bq) / bq
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_repeater_reference_value() {
        let s = CustomerSummary::new("a", 0, 0.0, 1.0, 3.0).unwrap();
        let ll = conditional_log_likelihood(&DecodedRates { lambda: 1.0, m: 1.0, n: 1.0 }, 2.0, &s).unwrap();
        assert!((ll.exp() - 0.567667641618306345947).abs() < 1e-15);
    }

    #[test]
    fn time_rescaling_adds_x_ln_c() {
        let s = CustomerSummary::new("a", 4, 6.0, 20.0, 3.0).unwrap();
        let c = 3.7;
        let scaled = CustomerSummary::new("a", 4, 6.0 / c, 20.0 / c, 3.0).unwrap();
        let r = DecodedRates { lambda: 0.4, m: 0.05, n: 2.0 };
        let rc = DecodedRates { lambda: 0.4 * c, m: 0.05 * c, n: 2.0 };
        let a = conditional_log_likelihood(&r, 2.0, &s).unwrap();
        let b = conditional_log_likelihood(&rc, 2.0, &scaled).unwrap();
        assert!((b - a - 4.0 * c.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_reference_values() {
        let g = |a, b| GammaParams::new(a, b).unwrap();
        assert_eq!(kl_gamma(&g(3.3, 0.7), &g(3.3, 0.7)), 0.0);
        assert!((kl_gamma(&g(2.0, 1.0), &g(1.0, 1.0)) - 0.4227843350984671393935).abs() < 1e-14);
    }

    #[test]
    fn non_positive_rates_rejected() {
        let s = CustomerSummary::new("who", 1, 1.0, 2.0, 3.0).unwrap();
        let e = conditional_log_likelihood(&DecodedRates { lambda: 0.0, m: 1.0, n: 1.0 }, 1.0, &s).unwrap_err();
        assert!(matches!(e, Error::Numerical { ref customer, .. } if customer == "who"));
    }
}
