use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{align, mae_pairs, rmse_pairs};
use crate::baseline::{expected_revenue, fit_pair, fit_per_cohort, BaselineParams, ModelPairFit};
use crate::ingest::{
    build_cohort_covariates, holdout_revenue, summarize_rfm_with, CohortSpec, CustomerSummary, HoldoutRevenue,
    SpendBasis, TransactionLog,
};
use crate::model::{attach_covariates, train, PriorParams, TrainConfig, TrainingLog};
use crate::predict::{simulate_futures, SimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Pooled Pareto/NBD + Gamma-Gamma.
    PnbdGg,
    /// Pareto/NBD + Gamma-Gamma fitted per acquisition cohort.
    PnbdGgPerCohort,
    Clvae,
    /// CLVAE with one-hot acquisition cohorts as encoder covariates.
    ClvaeCovariates,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::PnbdGg, ModelKind::PnbdGgPerCohort, ModelKind::Clvae, ModelKind::ClvaeCovariates];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PnbdGg => "pnbd_gg",
            ModelKind::PnbdGgPerCohort => "pnbd_gg_per_cohort",
            ModelKind::Clvae => "clvae",
            ModelKind::ClvaeCovariates => "clvae_covariates",
        }
    }

    fn needs_cohorts(self) -> bool {
        matches!(self, ModelKind::PnbdGgPerCohort | ModelKind::ClvaeCovariates)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    /// Calibration end in days since the log origin.
    pub calibration_end: f64,
    pub models: Vec<ModelKind>,
    pub train: TrainConfig,
    /// Horizons (weeks), draw count and seed of the CLVAE simulations.
    pub sim: SimConfig,
    pub cohorts: CohortSpec,
    pub spend_basis: SpendBasis,
    /// Fit the models concurrently.
    pub parallel: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            calibration_end: 0.0,
            models: vec![ModelKind::PnbdGg, ModelKind::Clvae],
            train: TrainConfig::default(),
            sim: SimConfig::default(),
            cohorts: CohortSpec::default(),
            spend_basis: SpendBasis::default(),
            parallel: false,
        }
    }
}

/// Per-customer cumulative revenue forecasts, `values[i][k]` for horizon `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub customer_ids: Vec<String>,
    pub horizons: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub model: ModelKind,
    pub horizon: f64,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub customers: usize,
    pub calibration_transactions: usize,
    pub calibration_end: f64,
    pub observed_until: f64,
    pub zero_repeaters: usize,
}

/// What each model fitted, for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDetails {
    Baseline { params: BaselineParams },
    PerCohort { fits: Vec<(usize, BaselineParams, bool)> },
    Clvae { training: TrainingLog, prior: PriorParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: ModelKind,
    pub details: ModelDetails,
    pub forecast: Forecast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub fingerprint: DataFingerprint,
    pub cells: Vec<ScoreCell>,
    pub runs: Vec<ModelRun>,
}

/// Errors if anything in `log` lies after `calibration_end`.
pub fn check_no_leakage(log: &TransactionLog, calibration_end: f64) -> Result<()> {
    if log.observed_until() > calibration_end {
        return Err(Error::Leakage(format!(
            "calibration log observed until day {} beyond the cutoff {calibration_end}",
            log.observed_until()
        )));
    }
    if let Some(t) = log.transactions().iter().find(|t| t.time > calibration_end) {
        return Err(Error::Leakage(format!("customer {} has a transaction after the cutoff", t.customer_id)));
    }
    Ok(())
}

/// Scores a forecast against realized holdout revenue per horizon.
pub fn score(model: ModelKind, forecast: &Forecast, holdout: &HoldoutRevenue) -> Result<Vec<ScoreCell>> {
    if forecast.horizons != holdout.horizons {
        return Err(Error::Shape("forecast and holdout horizons differ".into()));
    }
    (0..forecast.horizons.len())
        .map(|k| {
            let pred: Vec<f64> = forecast.values.iter().map(|r| r[k]).collect();
            let pairs = align(&forecast.customer_ids, &pred, &holdout.customer_ids, &holdout.horizon_column(k))?;
            Ok(ScoreCell { model, horizon: forecast.horizons[k], rmse: rmse_pairs(&pairs)?, mae: mae_pairs(&pairs)? })
        })
        .collect()
}

fn baseline_forecast(fit_for: impl Fn(usize) -> ModelPairFit + Sync, summaries: &[CustomerSummary], horizons: &[f64]) -> Result<Forecast> {
    let values = summaries
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let f = fit_for(i);
            horizons.iter().map(|&h| expected_revenue(&f.pnbd.params, &f.gg.params, s, h)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Forecast { customer_ids: summaries.iter().map(|s| s.customer_id.clone()).collect(), horizons: horizons.to_vec(), values })
}

struct Prepared<'a> {
    config: &'a BenchmarkConfig,
    summaries: Vec<CustomerSummary>,
    cohort_vectors: Option<Vec<Vec<f64>>>,
    pooled: ModelPairFit,
}

impl Prepared<'_> {
    fn run(&self, model: ModelKind) -> Result<ModelRun> {
        let horizons = &self.config.sim.horizons;
        let (details, forecast) = match model {
            ModelKind::PnbdGg => (
                ModelDetails::Baseline { params: BaselineParams::from_fits(&self.pooled.pnbd, &self.pooled.gg) },
                baseline_forecast(|_| self.pooled.clone(), &self.summaries, horizons)?,
            ),
            ModelKind::PnbdGgPerCohort => {
                let vectors = self.cohort_vectors.as_ref().expect("cohorts built when requested");
                let labels: Vec<usize> =
                    vectors.iter().map(|v| v.iter().position(|&e| e == 1.0).unwrap_or(0)).collect();
                let fits = fit_per_cohort(&self.summaries, &labels)?;
                let forecast = baseline_forecast(
                    |i| fits.for_label(labels[i]).cloned().expect("every label has a fit"),
                    &self.summaries,
                    horizons,
                )?;
                let fits = fits
                    .cohorts
                    .iter()
                    .map(|(l, c)| (*l, BaselineParams::from_fits(&c.fit.pnbd, &c.fit.gg), c.pooled_fallback))
                    .collect();
                (ModelDetails::PerCohort { fits }, forecast)
            }
            ModelKind::Clvae | ModelKind::ClvaeCovariates => {
                let prior = PriorParams::from_baseline(&self.pooled.pnbd.params, &self.pooled.gg.params)?;
                let data = if model == ModelKind::ClvaeCovariates {
                    attach_covariates(&self.summaries, self.cohort_vectors.as_ref().expect("cohorts built when requested"))?
                } else {
                    self.summaries.clone()
                };
                let (net, training) = train(&data, &self.config.train, &prior)?;
                let result = simulate_futures(&net, &data, &self.config.sim)?;
                let forecast = Forecast {
                    customer_ids: result.customer_ids,
                    horizons: result.horizons,
                    values: result.expected_revenue,
                };
                (ModelDetails::Clvae { training, prior }, forecast)
            }
        };
        Ok(ModelRun { model, details, forecast })
    }
}

/// Fits every requested model on calibration data only, forecasts
/// cumulative holdout revenue and scores the forecasts.
pub fn run_benchmark(log: &TransactionLog, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.train.validate()?;
    config.sim.validate()?;
    if config.models.is_empty() {
        return Err(Error::Config("no models requested".into()));
    }
    let cal_end = config.calibration_end;
    let holdout = holdout_revenue(log, cal_end, &config.sim.horizons)?;
    let calibration = log.truncated(cal_end)?;
    check_no_leakage(&calibration, cal_end)?;
    let summaries = summarize_rfm_with(&calibration, cal_end, config.spend_basis)?;
    let cohort_vectors = if config.models.iter().any(|m| m.needs_cohorts()) {
        Some(build_cohort_covariates(&calibration, &config.cohorts)?.vectors_for(&summaries)?)
    } else {
        None
    };
    let pooled = fit_pair(&summaries)?;
    let fingerprint = DataFingerprint {
        customers: summaries.len(),
        calibration_transactions: calibration.len(),
        calibration_end: cal_end,
        observed_until: log.observed_until(),
        zero_repeaters: summaries.iter().filter(|s| s.x == 0).count(),
    };
    let prepared = Prepared { config, summaries, cohort_vectors, pooled };
    let runs: Vec<ModelRun> = if config.parallel {
        config.models.par_iter().map(|&m| prepared.run(m)).collect::<Result<_>>()?
    } else {
        config.models.iter().map(|&m| prepared.run(m)).collect::<Result<_>>()?
    };
    let mut cells = Vec::new();
    for run in &runs {
        cells.extend(score(run.model, &run.forecast, &holdout)?);
    }
    Ok(BenchmarkReport { config: config.clone(), fingerprint, cells, runs })
}

impl BenchmarkReport {
    pub fn cell(&self, model: ModelKind, horizon: f64) -> Option<&ScoreCell> {
        self.cells.iter().find(|c| c.model == model && c.horizon == horizon)
    }

    /// Grid with one row per (model, metric) and one column per horizon.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let horizons = &self.config.sim.horizons;
        let mut header = vec!["model".to_string(), "metric".to_string()];
        header.extend(horizons.iter().map(|h| h.to_string()));
        w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
        for run in &self.runs {
            for metric in ["rmse", "mae"] {
                let mut row = vec![run.model.name().to_string(), metric.to_string()];
                for &h in horizons {
                    let c = self.cell(run.model, h).expect("scored every horizon");
                    row.push(if metric == "rmse" { c.rmse } else { c.mae }.to_string());
                }
                w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
