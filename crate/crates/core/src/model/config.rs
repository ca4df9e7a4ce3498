use serde::{Deserialize, Serialize};

use crate::baseline::{GgParams, ParetoNbdParams};
use crate::numerics::GammaParams;
use crate::{Error, Result};

/// Fixed Gamma priors on (λ, μ, ν) and the spend shape `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub lambda_prior: GammaParams,
    pub mu_prior: GammaParams,
    pub nu_prior: GammaParams,
    pub p_spend: f64,
}

impl PriorParams {
    pub fn new(lambda_prior: GammaParams, mu_prior: GammaParams, nu_prior: GammaParams, p_spend: f64) -> Result<Self> {
        for g in [lambda_prior, mu_prior, nu_prior] {
            GammaParams::new(g.shape, g.rate)?;
        }
        if !(p_spend > 0.0 && p_spend.is_finite()) {
            return Err(Error::Domain(format!("spend shape must be positive, got {p_spend}")));
        }
        Ok(Self { lambda_prior, mu_prior, nu_prior, p_spend })
    }

    /// Priors taken from fitted classical models: (r, α), (s, β), (q, γ) and p.
    pub fn from_baseline(pnbd: &ParetoNbdParams, gg: &GgParams) -> Result<Self> {
        Self::new(
            GammaParams::new(pnbd.r, pnbd.alpha)?,
            GammaParams::new(pnbd.s, pnbd.beta)?,
            GammaParams::new(gg.q, gg.gamma)?,
            gg.p,
        )
    }

    pub fn components(&self) -> [GammaParams; 3] {
        [self.lambda_prior, self.mu_prior, self.nu_prior]
    }

    pub fn means(&self) -> [f64; 3] {
        self.components().map(|g| g.mean())
    }
}

/// Network shape and optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub mc_samples: usize,
    pub patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub normalize_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder_widths: vec![64, 32],
            decoder_widths: vec![32, 64],
            latent_dim: 3,
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 1000,
            mc_samples: 10,
            patience: 100,
            seed: 50,
            validation_fraction: 0.1,
            normalize_inputs: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.latent_dim != 3 {
            return bad("latent dimension must be 3 (λ, μ, ν)");
        }
        if self.encoder_widths.is_empty() || self.decoder_widths.is_empty() {
            return bad("encoder and decoder need at least one hidden layer");
        }
        if self.encoder_widths.iter().chain(&self.decoder_widths).any(|&w| w == 0) {
            return bad("hidden widths must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be a non-negative number");
        }
        if self.batch_size == 0 || self.mc_samples == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, MC samples, epochs and patience must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad("validation fraction must lie in (0, 0.5)");
        }
        Ok(())
    }
}
