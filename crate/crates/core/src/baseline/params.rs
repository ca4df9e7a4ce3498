use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gamma heterogeneity of the purchase rate (r, alpha) and dropout rate (s, beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoNbdParams {
    pub r: f64,
    pub alpha: f64,
    pub s: f64,
    pub beta: f64,
}

impl ParetoNbdParams {
    pub fn new(r: f64, alpha: f64, s: f64, beta: f64) -> Result<Self> {
        let p = Self { r, alpha, s, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.r, self.alpha, self.s, self.beta].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!("Pareto/NBD parameters must be positive: {self:?}")))
        }
    }

    pub(crate) fn to_log(self) -> Vec<f64> {
        vec![self.r.ln(), self.alpha.ln(), self.s.ln(), self.beta.ln()]
    }

    pub(crate) fn from_log(v: &[f64]) -> Self {
        Self { r: v[0].exp(), alpha: v[1].exp(), s: v[2].exp(), beta: v[3].exp() }
    }
}

/// Gamma-Gamma spend model: per-transaction shape `p`, spend-rate heterogeneity (q, gamma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgParams {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
}

impl GgParams {
    pub fn new(p: f64, q: f64, gamma: f64) -> Result<Self> {
        let g = Self { p, q, gamma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.p, self.q, self.gamma].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!("Gamma-Gamma parameters must be positive: {self:?}")))
        }
    }

    pub(crate) fn to_log(self) -> Vec<f64> {
        vec![self.p.ln(), self.q.ln(), self.gamma.ln()]
    }

    pub(crate) fn from_log(v: &[f64]) -> Self {
        Self { p: v[0].exp(), q: v[1].exp(), gamma: v[2].exp() }
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit<P> {
    pub params: P,
    pub log_likelihood: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Flat parameter document with keys
/// `r, alpha, s, beta, p, q, gamma, log_likelihood, converged`.
///
/// `log_likelihood` is the sum of both models' maximized values and
/// `converged` holds only if both fits converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub r: f64,
    pub alpha: f64,
    pub s: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub log_likelihood: f64,
    pub converged: bool,
}

impl BaselineParams {
    pub fn from_fits(pnbd: &Fit<ParetoNbdParams>, gg: &Fit<GgParams>) -> Self {
        let (a, b) = (pnbd.params, gg.params);
        Self {
            r: a.r,
            alpha: a.alpha,
            s: a.s,
            beta: a.beta,
            p: b.p,
            q: b.q,
            gamma: b.gamma,
            log_likelihood: pnbd.log_likelihood + gg.log_likelihood,
            converged: pnbd.converged && gg.converged,
        }
    }

    pub fn pnbd(&self) -> Result<ParetoNbdParams> {
        ParetoNbdParams::new(self.r, self.alpha, self.s, self.beta)
    }

    pub fn gg(&self) -> Result<GgParams> {
        GgParams::new(self.p, self.q, self.gamma)
    }
}
