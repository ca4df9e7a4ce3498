use crate::baseline::{ClassicalPosterior, GgParams, ParetoNbdParams};
use crate::ingest::CustomerSummary;
use crate::model::{sample_posterior, Clvae, DecodedRates, GammaTriple};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Produces per-draw process rates for a customer. Each entry of `rngs`
/// belongs to one draw and must be the only randomness that draw uses.
pub trait RateSource: Sync {
    fn p_spend(&self) -> f64;

    fn customers(&self) -> usize;

    fn rates(&self, customer: usize, rngs: &mut [SimRng]) -> Result<Vec<DecodedRates>>;
}

/// Encoder posterior draws pushed through the decoder.
pub struct ClvaeRates<'a> {
    model: &'a Clvae,
    posteriors: Vec<GammaTriple>,
}

impl<'a> ClvaeRates<'a> {
    pub fn new(model: &'a Clvae, summaries: &[CustomerSummary]) -> Result<Self> {
        let rows: Vec<&CustomerSummary> = summaries.iter().collect();
        let posteriors = if rows.is_empty() { Vec::new() } else { model.encode(&rows)? };
        Ok(Self { model, posteriors })
    }

    pub fn posteriors(&self) -> &[GammaTriple] {
        &self.posteriors
    }
}

impl RateSource for ClvaeRates<'_> {
    fn p_spend(&self) -> f64 {
        self.model.prior().p_spend
    }

    fn customers(&self) -> usize {
        self.posteriors.len()
    }

    fn rates(&self, customer: usize, rngs: &mut [SimRng]) -> Result<Vec<DecodedRates>> {
        let post = &self.posteriors[customer];
        let latents: Vec<[f64; 3]> = rngs.iter_mut().map(|rng| sample_posterior(post, 1, rng)[0]).collect();
        self.model.decode(&latents)
    }
}

/// The same rates for every draw of a customer.
pub struct FixedRates {
    rates: Vec<DecodedRates>,
    p_spend: f64,
}

impl FixedRates {
    pub fn new(rates: Vec<DecodedRates>, p_spend: f64) -> Result<Self> {
        if !(p_spend > 0.0 && p_spend.is_finite()) {
            return Err(Error::Domain(format!("spend shape must be positive, got {p_spend}")));
        }
        if let Some(r) = rates.iter().find(|r| !(r.lambda > 0.0 && r.m > 0.0 && r.n > 0.0)) {
            return Err(Error::Domain(format!("rates must be positive: {r:?}")));
        }
        Ok(Self { rates, p_spend })
    }
}

impl RateSource for FixedRates {
    fn p_spend(&self) -> f64 {
        self.p_spend
    }

    fn customers(&self) -> usize {
        self.rates.len()
    }

    fn rates(&self, customer: usize, rngs: &mut [SimRng]) -> Result<Vec<DecodedRates>> {
        Ok(vec![self.rates[customer]; rngs.len()])
    }
}

/// Latents drawn from the classical Pareto/NBD + Gamma-Gamma posterior and
/// used directly as rates (no decoder).
pub struct ClassicalPosteriorRates {
    posteriors: Vec<ClassicalPosterior>,
    p_spend: f64,
}

impl ClassicalPosteriorRates {
    pub fn new(pnbd: &ParetoNbdParams, gg: &GgParams, summaries: &[CustomerSummary]) -> Result<Self> {
        let posteriors = summaries.iter().map(|s| ClassicalPosterior::new(pnbd, gg, s)).collect::<Result<_>>()?;
        Ok(Self { posteriors, p_spend: gg.p })
    }
}

impl RateSource for ClassicalPosteriorRates {
    fn p_spend(&self) -> f64 {
        self.p_spend
    }

    fn customers(&self) -> usize {
        self.posteriors.len()
    }

    fn rates(&self, customer: usize, rngs: &mut [SimRng]) -> Result<Vec<DecodedRates>> {
        let floor = crate::grad::MIN_GAMMA_SAMPLE;
        rngs.iter_mut()
            .map(|rng| {
                let (lambda, m, n) = self.posteriors[customer].sample(rng)?;
                Ok(DecodedRates { lambda: lambda.max(floor), m: m.max(floor), n: n.max(floor) })
            })
            .collect()
    }
}
