use chrono::{Months, NaiveDate};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{GgParams, ParetoNbdParams};
use crate::ingest::{Transaction, TransactionLog};
use crate::numerics::{sample_gamma, GammaParams};
use crate::rng::{stream, substream};
use crate::{Error, Result, DAYS_PER_WEEK};

/// Mixing distribution of the purchase rate λ across customers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaMixing {
    /// Gamma(r, α) from the Pareto/NBD parameters.
    Gamma,
    /// `weight`·Gamma(first) + (1 − weight)·Gamma(second).
    Mixture { weight: f64, first: GammaParams, second: GammaParams },
}

/// When customers make their first purchase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Acquisition {
    /// Uniform over the first `months` calendar months after the origin.
    UniformMonths { months: u32 },
    /// Everyone starts at time 0.
    AtOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub pnbd: ParetoNbdParams,
    pub gg: GgParams,
    pub customers: usize,
    /// Length of the whole log in weeks.
    pub window_weeks: f64,
    pub acquisition: Acquisition,
    pub lambda_mixing: LambdaMixing,
    /// Floor times to whole days and merge same-day purchases, as a parsed
    /// log would.
    pub whole_days: bool,
    pub origin: NaiveDate,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pnbd: ParetoNbdParams { r: 0.55, alpha: 10.6, s: 0.61, beta: 11.7 },
            gg: GgParams { p: 6.25, q: 3.74, gamma: 15.44 },
            customers: 2000,
            window_weeks: 312.0,
            acquisition: Acquisition::UniformMonths { months: 24 },
            lambda_mixing: LambdaMixing::Gamma,
            whole_days: true,
            origin: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
            seed: 50,
        }
    }
}

/// Latent truth of one synthetic customer. Times are in weeks since the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub customer_id: String,
    pub first_purchase: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    /// First purchase plus the exponential lifetime.
    pub death: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub log: TransactionLog,
    pub truth: Vec<SyntheticTruth>,
}

fn exp_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

/// Zero-padded so that lexical and numeric order agree.
pub fn synthetic_customer_id(i: usize) -> String {
    format!("c{i:07}")
}

/// Draws customers from the Pareto/NBD + Gamma-Gamma generative story.
/// Each customer uses its own random stream, so customer `i` does not
/// depend on how many others are generated.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.pnbd.validate()?;
    spec.gg.validate()?;
    if spec.customers == 0 {
        return Err(Error::Config("at least one synthetic customer is required".into()));
    }
    if !(spec.window_weeks > 0.0 && spec.window_weeks.is_finite()) {
        return Err(Error::Config("synthetic window must be positive".into()));
    }
    let window = spec.window_weeks * DAYS_PER_WEEK;
    let acquisition_days = match spec.acquisition {
        Acquisition::AtOrigin => 0.0,
        Acquisition::UniformMonths { months } => {
            let end = spec
                .origin
                .checked_add_months(Months::new(months))
                .ok_or_else(|| Error::Config("acquisition window overflows the calendar".into()))?;
            (end - spec.origin).num_days() as f64
        }
    };
    if acquisition_days >= window {
        return Err(Error::Config("acquisition period must end before the window".into()));
    }
    let lambda_mix = match spec.lambda_mixing {
        LambdaMixing::Gamma => None,
        LambdaMixing::Mixture { weight, first, second } => {
            if !(0.0..=1.0).contains(&weight) {
                return Err(Error::Config(format!("mixture weight {weight} outside [0, 1]")));
            }
            Some((weight, GammaParams::new(first.shape, first.rate)?, GammaParams::new(second.shape, second.rate)?))
        }
    };
    let lambda_prior = GammaParams::new(spec.pnbd.r, spec.pnbd.alpha)?;
    let mu_prior = GammaParams::new(spec.pnbd.s, spec.pnbd.beta)?;
    let nu_prior = GammaParams::new(spec.gg.q, spec.gg.gamma)?;

    let per_customer: Vec<(SyntheticTruth, Vec<Transaction>)> = (0..spec.customers)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(spec.seed, stream::SYNTHETIC, i as u64);
            let id = synthetic_customer_id(i);
            let lambda = match lambda_mix {
                None => sample_gamma(lambda_prior, &mut rng),
                Some((w, a, b)) => {
                    let pick: f64 = rng.random();
                    sample_gamma(if pick < w { a } else { b }, &mut rng)
                }
            };
            let mu = sample_gamma(mu_prior, &mut rng);
            let nu = sample_gamma(nu_prior, &mut rng);
            let first = if acquisition_days > 0.0 { rng.random::<f64>() * acquisition_days } else { 0.0 };
            let death = first + exp_draw(mu, &mut rng) * DAYS_PER_WEEK;
            let spend = GammaParams::new(spec.gg.p, nu)?;
            let end = death.min(window);
            let mut txns = Vec::new();
            let mut t = first;
            loop {
                let amount = sample_gamma(spend, &mut rng);
                let time = if spec.whole_days { t.floor() } else { t };
                match txns.last_mut() {
                    Some(Transaction { time: last, amount: a, .. }) if *last == time => *a += amount,
                    _ => txns.push(Transaction { customer_id: id.clone(), time, amount }),
                }
                t += exp_draw(lambda, &mut rng) * DAYS_PER_WEEK;
                if t > end {
                    break;
                }
            }
            let truth = SyntheticTruth {
                customer_id: id,
                first_purchase: first / DAYS_PER_WEEK,
                lambda,
                mu,
                nu,
                death: death / DAYS_PER_WEEK,
            };
            Ok((truth, txns))
        })
        .collect::<Result<_>>()?;
    let mut truth = Vec::with_capacity(spec.customers);
    let mut txns = Vec::new();
    for (t, list) in per_customer {
        truth.push(t);
        txns.extend(list);
    }
    let log = TransactionLog::new(txns, spec.origin)?.with_observed_until(window)?;
    Ok(SyntheticData { log, truth })
}
