//! Transaction logs, RFM summaries, cohort dummies and holdout revenue.

mod cohort;
mod io;
mod log;
mod summary;

pub use cohort::{build_cohort_covariates, CohortCovariates, CohortSpec};
pub use io::{read_holdout_csv, read_summaries_csv, write_holdout_csv, write_summaries_csv, write_transaction_log_csv};
pub use log::{parse_transaction_log, ColumnMapping, Transaction, TransactionLog};
pub(crate) use summary::validate_horizons;
pub use summary::{
    holdout_revenue, summarize_rfm, summarize_rfm_with, CustomerSummary, HoldoutRevenue, SpendBasis,
};
