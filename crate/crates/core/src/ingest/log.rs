use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One dated purchase. `time` is in days since the log origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub customer_id: String,
    pub time: f64,
    pub amount: f64,
}

/// Purchases sorted by `(customer_id, time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionLog {
    transactions: Vec<Transaction>,
    origin: NaiveDate,
    observed_until: f64,
}

impl TransactionLog {
    /// Builds a log, sorting the records and merging purchases of one
    /// customer at the same time. `origin` is the calendar date of time 0;
    /// the observation end defaults to the last transaction time.
    pub fn new(mut transactions: Vec<Transaction>, origin: NaiveDate) -> Result<Self> {
        if transactions.is_empty() {
            return Err(Error::EmptyInput("transaction log has no records".into()));
        }
        for t in &transactions {
            if !(t.time >= 0.0 && t.time.is_finite()) {
                return Err(Error::Validation(format!("customer {}: invalid time {}", t.customer_id, t.time)));
            }
            if !(t.amount >= 0.0 && t.amount.is_finite()) {
                return Err(Error::Validation(format!("customer {}: invalid amount {}", t.customer_id, t.amount)));
            }
        }
        transactions.sort_by(|a, b| {
            a.customer_id.cmp(&b.customer_id).then(a.time.total_cmp(&b.time)).then(a.amount.total_cmp(&b.amount))
        });
        transactions.dedup_by(|later, kept| {
            let same = later.customer_id == kept.customer_id && later.time == kept.time;
            if same {
                kept.amount += later.amount;
            }
            same
        });
        let observed_until = transactions.iter().map(|t| t.time).fold(0.0, f64::max);
        Ok(Self { transactions, origin, observed_until })
    }

    /// Declares the log complete up to `days` (at least the last transaction).
    pub fn with_observed_until(mut self, days: f64) -> Result<Self> {
        let last = self.transactions.iter().map(|t| t.time).fold(0.0, f64::max);
        if !(days >= last) {
            return Err(Error::Validation(format!("observation end {days} precedes last transaction at {last}")));
        }
        self.observed_until = days;
        Ok(self)
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    /// End of the observed period, in days.
    pub fn observed_until(&self) -> f64 {
        self.observed_until
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Contiguous per-customer slices in customer-id order.
    pub fn customers(&self) -> impl Iterator<Item = (&str, &[Transaction])> {
        self.transactions
            .chunk_by(|a, b| a.customer_id == b.customer_id)
            .map(|chunk| (chunk[0].customer_id.as_str(), chunk))
    }

    pub fn customer_count(&self) -> usize {
        self.customers().count()
    }

    /// Only the records at or before `days`, observed up to `days`.
    pub fn truncated(&self, days: f64) -> Result<Self> {
        let kept: Vec<_> = self.transactions.iter().filter(|t| t.time <= days).cloned().collect();
        let log = Self::new(kept, self.origin)?;
        log.with_observed_until(days.min(self.observed_until))
    }
}

/// Column names and delimiter of a delimited transaction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub customer: String,
    pub date: String,
    pub amount: String,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self { customer: "customer_id".into(), date: "date".into(), amount: "amount".into(), delimiter: ',' }
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let day = raw.split(['T', ' ']).next().unwrap_or(raw);
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// Reads a delimited table with a header row. Lines starting with `#` are
/// comments. Times become days since the earliest date; purchases of one
/// customer on the same day are merged with their amounts summed.
pub fn parse_transaction_log<R: Read>(source: R, format: &ColumnMapping) -> Result<TransactionLog> {
    if !format.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {:?} is not ASCII", format.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter as u8)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyInput("transaction file is empty".into()));
    }
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (ci, di, ai) = (column(&format.customer)?, column(&format.date)?, column(&format.amount)?);

    let mut rows: Vec<(String, NaiveDate, f64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| {
            record.get(i).ok_or_else(|| Error::Parse { line, message: "row has too few fields".into() })
        };
        let id = field(ci)?.to_string();
        if id.is_empty() {
            return Err(Error::Parse { line, message: "empty customer id".into() });
        }
        let date = parse_date(field(di)?)
            .ok_or_else(|| Error::Parse { line, message: format!("unparseable date {:?}", field(di).unwrap_or("")) })?;
        let raw_amount = field(ai)?;
        let amount: f64 = raw_amount
            .parse()
            .ok()
            .filter(|a: &f64| a.is_finite())
            .ok_or_else(|| Error::Parse { line, message: format!("unparseable amount {raw_amount:?}") })?;
        if amount < 0.0 {
            return Err(Error::Validation(format!("line {line}: negative amount {amount}")));
        }
        rows.push((id, date, amount));
    }
    let origin = rows
        .iter()
        .map(|r| r.1)
        .min()
        .ok_or_else(|| Error::EmptyInput("transaction file has no data rows".into()))?;

    let mut merged: BTreeMap<(String, i64), f64> = BTreeMap::new();
    for (id, date, amount) in rows {
        *merged.entry((id, (date - origin).num_days())).or_insert(0.0) += amount;
    }
    let transactions = merged
        .into_iter()
        .map(|((customer_id, day), amount)| Transaction { customer_id, time: day as f64, amount })
        .collect();
    TransactionLog::new(transactions, origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TransactionLog> {
        parse_transaction_log(text.as_bytes(), &ColumnMapping::default())
    }

    #[test]
    fn same_day_rows_are_merged() {
        let log = parse("customer_id,date,amount\nA,2020-01-01,10\nA,2020-01-01,5\nA,2020-01-08,20\n").unwrap();
        let t = log.transactions();
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].time, t[0].amount), (0.0, 15.0));
        assert_eq!((t[1].time, t[1].amount), (7.0, 20.0));
    }

    #[test]
    fn errors_carry_category_and_line() {
        let neg = parse("customer_id,date,amount\nA,2020-01-01,-3.00\n").unwrap_err();
        assert_eq!(neg.category(), "validation");
        let bad = parse("customer_id,date,amount\nA,2020-01-01,1\nB,2020-13-01,2\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 3, .. }), "{bad:?}");
        assert_eq!(parse("customer_id,date,amount\n").unwrap_err().category(), "empty-input");
        assert_eq!(parse("").unwrap_err().category(), "empty-input");
        assert_eq!(parse("id,date,amount\nA,2020-01-01,1\n").unwrap_err().category(), "parse");
    }

    #[test]
    fn custom_columns_comments_and_origin() {
        let mapping = ColumnMapping { customer: "cid".into(), date: "day".into(), amount: "value".into(), delimiter: ';' };
        let text = "# exported\nday;cid;value\n2021-03-05;x;1.5\n2021-03-01;y;2\n";
        let log = parse_transaction_log(text.as_bytes(), &mapping).unwrap();
        assert_eq!(log.origin(), NaiveDate::from_ymd_opt(2021, 3, 1).unwrap());
        assert_eq!(log.transactions()[0].customer_id, "x");
        assert_eq!(log.transactions()[0].time, 4.0);
        assert_eq!(log.customer_count(), 2);
    }
}
