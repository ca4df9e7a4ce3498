//! Exact draws of (λ, μ, ν) from the classical posterior of one customer.

use rand::Rng;
use rand_distr::Open01;

use super::params::{GgParams, ParetoNbdParams};
use super::pnbd::pnbd_p_alive;
use crate::ingest::CustomerSummary;
use crate::numerics::{sample_gamma, GammaParams};
use crate::Result;

/// Two-component posterior: alive at T, or dead at some τ ∈ (t_x, T] with
/// density ∝ (α+τ)^{−(r+x)} (β+τ)^{−(s+1)}.
#[derive(Debug, Clone)]
pub struct ClassicalPosterior {
    p_alive: f64,
    pnbd: ParetoNbdParams,
    x: f64,
    t_x: f64,
    t: f64,
    nu: GammaParams,
}

impl ClassicalPosterior {
    pub fn new(pnbd: &ParetoNbdParams, gg: &GgParams, s: &CustomerSummary) -> Result<Self> {
        let x = s.x as f64;
        Ok(Self {
            p_alive: pnbd_p_alive(pnbd, s)?,
            pnbd: *pnbd,
            x,
            t_x: s.t_x,
            t: s.t,
            nu: GammaParams::new(gg.p * x + gg.q, gg.gamma + x * s.z_bar)?,
        })
    }

    pub fn p_alive(&self) -> f64 {
        self.p_alive
    }

    fn death_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let ParetoNbdParams { r, alpha, s, beta } = self.pnbd;
        let ln_f = |tau: f64| -(r + self.x) * (alpha + tau).ln() - (s + 1.0) * (beta + tau).ln();
        let peak = ln_f(self.t_x);
        loop {
            let u: f64 = rng.sample(Open01);
            let tau = self.t_x + u * (self.t - self.t_x);
            let v: f64 = rng.sample(Open01);
            if v.ln() <= ln_f(tau) - peak {
                return tau;
            }
        }
    }

    /// One `(λ, μ, ν)` draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64, f64)> {
        let ParetoNbdParams { r, alpha, s, beta } = self.pnbd;
        let u: f64 = rng.random();
        let (lam, mu) = if u < self.p_alive || self.t <= self.t_x {
            (GammaParams::new(r + self.x, alpha + self.t)?, GammaParams::new(s, beta + self.t)?)
        } else {
            let tau = self.death_time(rng);
            (GammaParams::new(r + self.x, alpha + tau)?, GammaParams::new(s + 1.0, beta + tau)?)
        };
        Ok((sample_gamma(lam, rng), sample_gamma(mu, rng), sample_gamma(self.nu, rng)))
    }
}
