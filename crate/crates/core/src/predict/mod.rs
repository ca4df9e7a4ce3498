//! Monte Carlo simulation of customer futures after the calibration end.
//!
//! For every customer and draw: sample latent rates, decide whether the
//! customer is still alive at `T`, simulate a remaining lifetime and the
//! purchases inside it, then draw cumulative spend per horizon.

mod report;
mod simulate;
mod sources;

pub use report::{expected_revenue_report, quantile, write_draws_csv, write_prediction_csv, RevenueReport};
pub use simulate::{
    p_alive_individual, simulate_futures, simulate_history, simulate_with, CustomerDraws, PredictionResult, SimConfig,
    SimulatedHistory,
};
pub use sources::{ClassicalPosteriorRates, ClvaeRates, FixedRates, RateSource};
