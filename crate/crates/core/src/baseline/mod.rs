//! Classical Pareto/NBD and Gamma-Gamma models fitted by maximum likelihood.

mod cohort;
mod gg;
mod params;
mod pnbd;
mod posterior;
pub mod simplex;

pub use cohort::{fit_pair, fit_per_cohort, CohortFit, CohortFits, ModelPairFit};
pub use gg::{fit_gg, gg_customer_log_likelihood, gg_expected_spend, gg_initial_guess, gg_log_likelihood};
pub use params::{BaselineParams, Fit, GgParams, ParetoNbdParams};
pub use pnbd::{
    fit_pnbd, pnbd_customer_log_likelihood, pnbd_expected_transactions, pnbd_initial_guess, pnbd_log_likelihood,
    pnbd_p_alive,
};
pub use posterior::ClassicalPosterior;

use crate::ingest::CustomerSummary;
use crate::Result;

/// Revenue forecast in `(T, T + t]`: expected transactions times expected
/// spend per transaction.
pub fn expected_revenue(pnbd: &ParetoNbdParams, gg: &GgParams, s: &CustomerSummary, t: f64) -> Result<f64> {
    Ok(pnbd_expected_transactions(pnbd, s, t)? * gg_expected_spend(gg, s)?)
}
