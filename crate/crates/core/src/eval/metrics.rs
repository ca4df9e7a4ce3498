use std::collections::{BTreeSet, HashMap};

use crate::{Error, Result};

/// Pairs `(pred, actual)` matched by customer id. Both sides must carry
/// exactly the same set of unique ids.
pub fn align(pred_ids: &[String], pred: &[f64], actual_ids: &[String], actual: &[f64]) -> Result<Vec<(f64, f64)>> {
    if pred_ids.len() != pred.len() || actual_ids.len() != actual.len() {
        return Err(Error::Shape("ids and values differ in length".into()));
    }
    let mut offenders = BTreeSet::new();
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(actual_ids.len());
    for (i, id) in actual_ids.iter().enumerate() {
        if index.insert(id, i).is_some() {
            offenders.insert(id.clone());
        }
    }
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(pred.len());
    for (id, &p) in pred_ids.iter().zip(pred) {
        if !seen.insert(id.as_str()) {
            offenders.insert(id.clone());
            continue;
        }
        match index.get(id.as_str()) {
            Some(&j) => pairs.push((p, actual[j])),
            None => {
                offenders.insert(id.clone());
            }
        }
    }
    offenders.extend(actual_ids.iter().filter(|id| !seen.contains(id.as_str())).cloned());
    if offenders.is_empty() {
        Ok(pairs)
    } else {
        Err(Error::Alignment(offenders.into_iter().collect()))
    }
}

fn check(pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no customers to score".into()));
    }
    Ok(())
}

/// Root mean squared error of aligned pairs.
pub fn rmse_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    check(pairs)?;
    Ok((pairs.iter().map(|(p, a)| (p - a).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt())
}

/// Mean absolute error of aligned pairs.
pub fn mae_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    check(pairs)?;
    Ok(pairs.iter().map(|(p, a)| (p - a).abs()).sum::<f64>() / pairs.len() as f64)
}

pub fn rmse(pred_ids: &[String], pred: &[f64], actual_ids: &[String], actual: &[f64]) -> Result<f64> {
    rmse_pairs(&align(pred_ids, pred, actual_ids, actual)?)
}

pub fn mae(pred_ids: &[String], pred: &[f64], actual_ids: &[String], actual: &[f64]) -> Result<f64> {
    mae_pairs(&align(pred_ids, pred, actual_ids, actual)?)
}
