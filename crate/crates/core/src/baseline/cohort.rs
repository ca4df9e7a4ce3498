use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gg::fit_gg;
use super::params::{Fit, GgParams, ParetoNbdParams};
use super::pnbd::fit_pnbd;
use crate::ingest::CustomerSummary;
use crate::{Error, Result};

/// Fitted pair of models for one group of customers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPairFit {
    pub pnbd: Fit<ParetoNbdParams>,
    pub gg: Fit<GgParams>,
}

pub fn fit_pair(summaries: &[CustomerSummary]) -> Result<ModelPairFit> {
    Ok(ModelPairFit { pnbd: fit_pnbd(summaries, None)?, gg: fit_gg(summaries, None)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortFit {
    pub customers: usize,
    pub fit: ModelPairFit,
    /// True when the cohort was too small or had no repeaters and the pooled
    /// fit stands in.
    pub pooled_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortFits {
    pub pooled: Option<ModelPairFit>,
    pub cohorts: BTreeMap<usize, CohortFit>,
}

impl CohortFits {
    pub fn for_label(&self, label: usize) -> Option<&ModelPairFit> {
        self.cohorts.get(&label).map(|c| &c.fit)
    }
}

fn eligible(group: &[CustomerSummary]) -> bool {
    group.len() >= 2 && group.iter().any(|s| s.x > 0)
}

/// Independent fits per cohort label; ineligible cohorts and cohorts whose
/// fit fails fall back to the pooled fit.
pub fn fit_per_cohort(summaries: &[CustomerSummary], labels: &[usize]) -> Result<CohortFits> {
    if labels.len() != summaries.len() {
        return Err(Error::Shape(format!("{} labels for {} customers", labels.len(), summaries.len())));
    }
    let mut groups: BTreeMap<usize, Vec<CustomerSummary>> = BTreeMap::new();
    for (s, &l) in summaries.iter().zip(labels) {
        groups.entry(l).or_default().push(s.clone());
    }
    let groups: Vec<(usize, Vec<CustomerSummary>)> = groups.into_iter().collect();
    let fits: Vec<Option<ModelPairFit>> =
        groups.par_iter().map(|(_, g)| if eligible(g) { fit_pair(g).ok() } else { None }).collect();

    let pooled = if fits.iter().any(Option::is_none) { Some(fit_pair(summaries)?) } else { None };
    let cohorts = groups
        .iter()
        .zip(fits)
        .map(|((label, g), fit)| {
            let pooled_fallback = fit.is_none();
            let fit = fit.unwrap_or_else(|| pooled.clone().expect("pooled fit exists when a cohort falls back"));
            (*label, CohortFit { customers: g.len(), fit, pooled_fallback })
        })
        .collect();
    Ok(CohortFits { pooled, cohorts })
}
