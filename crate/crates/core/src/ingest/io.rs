//! Delimited-text readers and writers with fixed column orders.
//!
//! Floats are written in shortest round-trip form, so reading a written file
//! returns bit-identical values.

use std::io::{Read, Write};

use chrono::Days;

use super::log::TransactionLog;
use super::summary::{CustomerSummary, HoldoutRevenue};
use crate::{Error, Result};

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Columns `customer_id, x, t_x, T, z_bar, cov_1 .. cov_p`.
pub fn write_summaries_csv<W: Write>(summaries: &[CustomerSummary], out: W) -> Result<()> {
    let p = summaries.first().map(|s| s.covariates.len()).unwrap_or(0);
    if summaries.iter().any(|s| s.covariates.len() != p) {
        return Err(Error::Shape("summaries carry covariate vectors of different lengths".into()));
    }
    let mut w = writer(out);
    let mut header: Vec<String> = ["customer_id", "x", "t_x", "T", "z_bar"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|k| format!("cov_{k}")));
    w.write_record(&header)?;
    for s in summaries {
        let mut row = vec![s.customer_id.clone(), s.x.to_string(), s.t_x.to_string(), s.t.to_string(), s.z_bar.to_string()];
        row.extend(s.covariates.iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    flush(w)
}

fn number<T: std::str::FromStr>(raw: &str, line: u64, what: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse { line, message: format!("bad {what} value {raw:?}") })
}

pub fn read_summaries_csv<R: Read>(input: R) -> Result<Vec<CustomerSummary>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = r.headers()?.clone();
    let expected = ["customer_id", "x", "t_x", "T", "z_bar"];
    if headers.len() < 5 || headers.iter().take(5).ne(expected.iter().copied()) {
        return Err(Error::Parse { line: 1, message: format!("summary header must start with {}", expected.join(",")) });
    }
    for (k, h) in headers.iter().skip(5).enumerate() {
        if h != format!("cov_{}", k + 1) {
            return Err(Error::Parse { line: 1, message: format!("unexpected column {h:?}") });
        }
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let s = CustomerSummary {
            customer_id: rec[0].to_string(),
            x: number(&rec[1], line, "x")?,
            t_x: number(&rec[2], line, "t_x")?,
            t: number(&rec[3], line, "T")?,
            z_bar: number(&rec[4], line, "z_bar")?,
            covariates: (5..rec.len()).map(|i| number(&rec[i], line, "covariate")).collect::<Result<_>>()?,
        };
        s.validate().map_err(|e| Error::Parse { line, message: e.to_string() })?;
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("summary file has no rows".into()));
    }
    Ok(out)
}

/// Columns `customer_id, revenue_<h1>, revenue_<h2>, ...` with horizons in weeks.
pub fn write_holdout_csv<W: Write>(holdout: &HoldoutRevenue, out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["customer_id".to_string()];
    header.extend(holdout.horizons.iter().map(|h| format!("revenue_{h}")));
    w.write_record(&header)?;
    for (id, row) in holdout.customer_ids.iter().zip(&holdout.values) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    flush(w)
}

pub fn read_holdout_csv<R: Read>(input: R) -> Result<HoldoutRevenue> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("customer_id") {
        return Err(Error::Parse { line: 1, message: "holdout header must start with customer_id".into() });
    }
    let horizons = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("revenue_")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse { line: 1, message: format!("bad horizon column {h:?}") })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        ids.push(rec[0].to_string());
        values.push((1..rec.len()).map(|i| number(&rec[i], line, "revenue")).collect::<Result<Vec<f64>>>()?);
    }
    Ok(HoldoutRevenue { customer_ids: ids, horizons, values })
}

/// Columns `customer_id, date, amount`; times are floored to calendar days.
pub fn write_transaction_log_csv<W: Write>(log: &TransactionLog, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["customer_id", "date", "amount"])?;
    for t in log.transactions() {
        let date = log
            .origin()
            .checked_add_days(Days::new(t.time.floor() as u64))
            .ok_or_else(|| Error::Validation(format!("transaction time {} overflows the calendar", t.time)))?;
        w.write_record([t.customer_id.as_str(), &date.format("%Y-%m-%d").to_string(), &t.amount.to_string()])?;
    }
    flush(w)
}
