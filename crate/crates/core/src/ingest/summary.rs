use serde::{Deserialize, Serialize};

use super::log::TransactionLog;
use crate::{Error, Result, DAYS_PER_WEEK};

/// RFM statistics of one customer in weeks and currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerSummary {
    pub customer_id: String,
    /// Repeat transactions in the calibration window.
    pub x: u32,
    /// Time of the last calibration transaction, from the first.
    pub t_x: f64,
    /// Calibration window length, from the first transaction.
    #[serde(rename = "T")]
    pub t: f64,
    pub z_bar: f64,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

impl CustomerSummary {
    pub fn new(customer_id: impl Into<String>, x: u32, t_x: f64, t: f64, z_bar: f64) -> Result<Self> {
        let s = Self { customer_id: customer_id.into(), x, t_x, t, z_bar, covariates: Vec::new() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.customer_id;
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Validation(format!("customer {id}: T must be positive, got {}", self.t)));
        }
        if !(self.t_x >= 0.0 && self.t_x <= self.t) {
            return Err(Error::Validation(format!("customer {id}: t_x={} outside [0, T={}]", self.t_x, self.t)));
        }
        if self.x == 0 && self.t_x != 0.0 {
            return Err(Error::Validation(format!("customer {id}: x = 0 requires t_x = 0")));
        }
        if !(self.z_bar > 0.0 && self.z_bar.is_finite()) {
            return Err(Error::Validation(format!("customer {id}: z_bar must be positive, got {}", self.z_bar)));
        }
        if self.covariates.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("customer {id}: non-finite covariate")));
        }
        Ok(())
    }
}

/// Which calibration transactions enter the spend average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpendBasis {
    /// Every calibration transaction including the first.
    #[default]
    AllTransactions,
    /// Repeat transactions only; zero-repeaters fall back to their first amount.
    RepeatOnly,
}

/// Summaries under the default spend basis.
pub fn summarize_rfm(log: &TransactionLog, calibration_end: f64) -> Result<Vec<CustomerSummary>> {
    summarize_rfm_with(log, calibration_end, SpendBasis::AllTransactions)
}

/// One summary per customer whose first purchase precedes `calibration_end`
/// (days), in customer-id order.
pub fn summarize_rfm_with(log: &TransactionLog, calibration_end: f64, basis: SpendBasis) -> Result<Vec<CustomerSummary>> {
    if !(calibration_end > 0.0) {
        return Err(Error::Window(format!("calibration end {calibration_end} does not follow the dataset start")));
    }
    let mut out = Vec::new();
    for (id, txns) in log.customers() {
        let first = txns[0].time;
        if first >= calibration_end {
            continue;
        }
        let cal: Vec<_> = txns.iter().take_while(|t| t.time <= calibration_end).collect();
        let x = (cal.len() - 1) as u32;
        let last = cal[cal.len() - 1].time;
        let spends: Vec<f64> = match basis {
            SpendBasis::RepeatOnly if x > 0 => cal[1..].iter().map(|t| t.amount).collect(),
            _ => cal.iter().map(|t| t.amount).collect(),
        };
        let z_bar = spends.iter().sum::<f64>() / spends.len() as f64;
        let summary = CustomerSummary {
            customer_id: id.to_string(),
            x,
            t_x: (last - first) / DAYS_PER_WEEK,
            t: (calibration_end - first) / DAYS_PER_WEEK,
            z_bar,
            covariates: Vec::new(),
        };
        summary.validate()?;
        out.push(summary);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("no customer purchased before day {calibration_end}")));
    }
    Ok(out)
}

/// Cumulative realized revenue after the calibration end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutRevenue {
    pub customer_ids: Vec<String>,
    /// Horizons in weeks.
    pub horizons: Vec<f64>,
    /// `values[i][k]`: revenue of customer `i` within horizon `k`.
    pub values: Vec<Vec<f64>>,
}

impl HoldoutRevenue {
    pub fn horizon_column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }
}

pub(crate) fn validate_horizons(horizons: &[f64]) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::Config("at least one horizon is required".into()));
    }
    if horizons[0] <= 0.0 || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons.iter().any(|h| !h.is_finite()) {
        return Err(Error::Config(format!("horizons must be positive and strictly increasing, got {horizons:?}")));
    }
    Ok(())
}

/// Revenue in `(calibration_end, calibration_end + 7·h]` for every customer
/// acquired before `calibration_end`.
pub fn holdout_revenue(log: &TransactionLog, calibration_end: f64, horizons: &[f64]) -> Result<HoldoutRevenue> {
    validate_horizons(horizons)?;
    let reach = calibration_end + DAYS_PER_WEEK * horizons[horizons.len() - 1];
    if log.observed_until() < reach {
        return Err(Error::Coverage(format!(
            "log observed until day {} but horizon reaches day {reach}",
            log.observed_until()
        )));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (id, txns) in log.customers() {
        if txns[0].time >= calibration_end {
            continue;
        }
        let mut row = vec![0.0; horizons.len()];
        for t in txns.iter().filter(|t| t.time > calibration_end) {
            for (k, h) in horizons.iter().enumerate() {
                if t.time <= calibration_end + DAYS_PER_WEEK * h {
                    row[k] += t.amount;
                }
            }
        }
        ids.push(id.to_string());
        values.push(row);
    }
    Ok(HoldoutRevenue { customer_ids: ids, horizons: horizons.to_vec(), values })
}
