use std::io::Write;

use serde::{Deserialize, Serialize};

use super::simulate::PredictionResult;
use crate::{Error, Result};

/// Linear-interpolation quantile (type 7) of unsorted `values`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile of no values".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile level {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Expected cumulative revenue per customer and horizon, with optional
/// quantiles of the predictive distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub horizons: Vec<f64>,
    pub customer_ids: Vec<String>,
    pub expected: Vec<Vec<f64>>,
    pub quantiles: Vec<f64>,
    /// `quantile_values[i][k][j]`: level `quantiles[j]` for customer `i` at horizon `k`.
    pub quantile_values: Vec<Vec<Vec<f64>>>,
    /// Sum over customers per horizon.
    pub totals: Vec<f64>,
}

pub fn expected_revenue_report(result: &PredictionResult, quantiles: &[f64]) -> Result<RevenueReport> {
    let kh = result.horizons.len();
    let quantile_values = if quantiles.is_empty() {
        vec![Vec::new(); result.customer_ids.len()]
    } else {
        let retained = result
            .retained
            .as_ref()
            .ok_or_else(|| Error::Config("quantiles need retained draws".into()))?;
        retained
            .iter()
            .map(|d| {
                (0..kh)
                    .map(|k| {
                        let col = d.revenue_at(k, kh);
                        quantiles.iter().map(|&q| quantile(&col, q)).collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
    };
    let totals = (0..kh).map(|k| result.expected_revenue.iter().map(|row| row[k]).sum()).collect();
    Ok(RevenueReport {
        horizons: result.horizons.clone(),
        customer_ids: result.customer_ids.clone(),
        expected: result.expected_revenue.clone(),
        quantiles: quantiles.to_vec(),
        quantile_values,
        totals,
    })
}

impl RevenueReport {
    /// `customer_id, revenue_<h>…, revenue_<h>_q<level>…`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["customer_id".to_string()];
        header.extend(self.horizons.iter().map(|h| format!("revenue_{h}")));
        for h in &self.horizons {
            header.extend(self.quantiles.iter().map(|q| format!("revenue_{h}_q{q}")));
        }
        w.write_record(&header).map_err(csv_err)?;
        for (i, id) in self.customer_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.expected[i].iter().map(f64::to_string));
            for qs in &self.quantile_values[i] {
                row.extend(qs.iter().map(f64::to_string));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// `customer_id, p_alive`, then `expected_transactions_<h>, expected_revenue_<h>` per horizon.
pub fn write_prediction_csv<W: Write>(result: &PredictionResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["customer_id".to_string(), "p_alive".to_string()];
    for h in &result.horizons {
        header.push(format!("expected_transactions_{h}"));
        header.push(format!("expected_revenue_{h}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in result.customer_ids.iter().enumerate() {
        let mut row = vec![id.clone(), result.p_alive[i].to_string()];
        for k in 0..result.horizons.len() {
            row.push(result.expected_transactions[i][k].to_string());
            row.push(result.expected_revenue[i][k].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `customer_id, draw, horizon, transactions, revenue`, one row per draw and horizon.
pub fn write_draws_csv<W: Write>(result: &PredictionResult, out: W) -> Result<()> {
    let retained = result.retained.as_ref().ok_or_else(|| Error::Config("no retained draws to write".into()))?;
    let kh = result.horizons.len();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["customer_id", "draw", "horizon", "transactions", "revenue"]).map_err(csv_err)?;
    for (id, d) in result.customer_ids.iter().zip(retained) {
        for l in 0..result.draws {
            for (k, h) in result.horizons.iter().enumerate() {
                let j = l * kh + k;
                w.write_record([
                    id.clone(),
                    l.to_string(),
                    h.to_string(),
                    d.transactions[j].to_string(),
                    d.revenue[j].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
