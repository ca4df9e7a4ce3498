use std::collections::HashMap;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::log::TransactionLog;
use super::summary::CustomerSummary;
use crate::{Error, Result};

/// Calendar binning of first-purchase dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    /// Bin width in calendar months.
    pub granularity_months: u32,
    pub n_bins: usize,
    /// First month of bin 0; defaults to the month of the log origin.
    #[serde(default)]
    pub start: Option<NaiveDate>,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self { granularity_months: 1, n_bins: 24, start: None }
    }
}

/// Acquisition-cohort label per customer, in customer-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCovariates {
    pub customer_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub n_bins: usize,
}

impl CohortCovariates {
    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_bins];
        v[self.labels[i]] = 1.0;
        v
    }

    /// Customers per bin.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_bins];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    /// One-hot vectors aligned with `summaries` by customer id.
    pub fn vectors_for(&self, summaries: &[CustomerSummary]) -> Result<Vec<Vec<f64>>> {
        let index: HashMap<&str, usize> =
            self.customer_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        summaries
            .iter()
            .map(|s| {
                index.get(s.customer_id.as_str()).map(|&i| self.one_hot(i)).ok_or_else(|| Error::Assignment {
                    customer: s.customer_id.clone(),
                    message: "no cohort label".into(),
                })
            })
            .collect()
    }

    /// Label per summary, aligned by customer id.
    pub fn labels_for(&self, summaries: &[CustomerSummary]) -> Result<Vec<usize>> {
        Ok(self.vectors_for(summaries)?.iter().map(|v| v.iter().position(|&e| e == 1.0).unwrap_or(0)).collect())
    }
}

fn month_index(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}

/// Assigns every customer to the calendar bin of their first purchase.
pub fn build_cohort_covariates(log: &TransactionLog, spec: &CohortSpec) -> Result<CohortCovariates> {
    if spec.n_bins == 0 || spec.granularity_months == 0 {
        return Err(Error::Config("cohort spec needs at least one bin of positive width".into()));
    }
    let start = month_index(spec.start.unwrap_or(log.origin()));
    let width = spec.granularity_months as i64;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (id, txns) in log.customers() {
        let first = log
            .origin()
            .checked_add_days(Days::new(txns[0].time.floor() as u64))
            .ok_or_else(|| Error::Assignment { customer: id.into(), message: "first purchase date overflows".into() })?;
        let offset = month_index(first) - start;
        let bin = offset.div_euclid(width);
        if offset < 0 || bin >= spec.n_bins as i64 {
            return Err(Error::Assignment {
                customer: id.into(),
                message: format!("first purchase on {first} falls outside the {}-bin cohort window", spec.n_bins),
            });
        }
        ids.push(id.to_string());
        labels.push(bin as usize);
    }
    Ok(CohortCovariates { customer_ids: ids, labels, n_bins: spec.n_bins })
}
