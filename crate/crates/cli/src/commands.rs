use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveDate;
use clvae::baseline::{fit_pair, BaselineParams};
use clvae::eval::{generate_synthetic, run_benchmark, SyntheticTruth};
use clvae::ingest::{
    build_cohort_covariates, holdout_revenue, parse_transaction_log, read_summaries_csv, summarize_rfm_with,
    write_holdout_csv, write_summaries_csv, write_transaction_log_csv, ColumnMapping, CustomerSummary,
    TransactionLog,
};
use clvae::model::{
    attach_covariates, load_checkpoint, save_checkpoint, train, CheckpointMeta, PriorParams, TrainingLog,
};
use clvae::predict::{
    expected_revenue_report, simulate_futures, simulate_with, write_draws_csv, write_prediction_csv,
    ClassicalPosteriorRates,
};
use clvae::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{required, RunConfig};
use crate::output::{write_csv_with_echo, write_json};

/// Parameter document: the flat baseline keys plus the run echo.
#[derive(Debug, Serialize, Deserialize)]
pub struct BaselineDocument {
    #[serde(flatten)]
    pub params: BaselineParams,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainingDocument {
    pub config: serde_json::Value,
    pub prior: PriorParams,
    pub log: TrainingLog,
}

pub const TRAINING_FILE: &str = "training.json";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_summaries(path: &Path) -> Result<Vec<CustomerSummary>> {
    read_summaries_csv(open(path)?)
}

fn read_baseline(path: &Path) -> Result<BaselineParams> {
    let doc: BaselineDocument = serde_json::from_reader(open(path)?)?;
    doc.params.pnbd()?;
    doc.params.gg()?;
    Ok(doc.params)
}

fn days_since(log: &TransactionLog, date: NaiveDate, what: &str) -> Result<f64> {
    let days = (date - log.origin()).num_days();
    if days < 0 {
        return Err(Error::Window(format!("{what} {date} precedes the first transaction on {}", log.origin())));
    }
    Ok(days as f64)
}

/// Parses the log and applies the declared observation end.
fn load_log(path: &Path, columns: &ColumnMapping, observed_until: Option<NaiveDate>) -> Result<TransactionLog> {
    let log = parse_transaction_log(open(path)?, columns)?;
    match observed_until {
        Some(date) => {
            let days = days_since(&log, date, "observation end")?;
            log.with_observed_until(days)
        }
        None => Ok(log),
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.ingest;
    let echo = cfg.echo("ingest")?;
    let log = load_log(required(&sec.transactions, "ingest.transactions")?, &sec.columns, sec.observed_until)?;
    let cal_date = sec.calibration_end.ok_or_else(|| Error::Config("missing ingest.calibration_end".into()))?;
    let cal_end = days_since(&log, cal_date, "calibration end")?;
    let calibration = log.truncated(cal_end)?;
    let mut summaries = summarize_rfm_with(&calibration, cal_end, sec.spend_basis)?;
    if let Some(spec) = &sec.cohorts {
        let vectors = build_cohort_covariates(&calibration, spec)?.vectors_for(&summaries)?;
        summaries = attach_covariates(&summaries, &vectors)?;
    }
    write_csv_with_echo(&cfg.output(&sec.summaries_out), &echo, |w| write_summaries_csv(&summaries, w))?;
    if let Some(path) = &sec.holdout_out {
        let holdout = holdout_revenue(&log, cal_end, &sec.horizons)?;
        write_csv_with_echo(&cfg.output(path), &echo, |w| write_holdout_csv(&holdout, w))?;
    }
    Ok(())
}

pub fn fit_baseline(cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.fit_baseline;
    let summaries = read_summaries(required(&sec.summaries, "fit_baseline.summaries")?)?;
    let fit = fit_pair(&summaries)?;
    let doc = BaselineDocument { params: BaselineParams::from_fits(&fit.pnbd, &fit.gg), config: cfg.echo("fit-baseline")? };
    write_json(&cfg.output(&sec.out), &doc)
}

pub fn fit_clvae(cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.fit_clvae;
    let summaries = read_summaries(required(&sec.summaries, "fit_clvae.summaries")?)?;
    let params = match &sec.baseline {
        Some(path) => read_baseline(path)?,
        None => {
            let fit = fit_pair(&summaries)?;
            BaselineParams::from_fits(&fit.pnbd, &fit.gg)
        }
    };
    let prior = PriorParams::from_baseline(&params.pnbd()?, &params.gg()?)?;
    let (model, log) = train(&summaries, &sec.train, &prior)?;
    let names = (1..=model.covariate_width()).map(|k| format!("cov_{k}")).collect();
    let fingerprint = clvae::model::DataFingerprint { customers: summaries.len(), calibration_end: None };
    let meta = CheckpointMeta::for_model(&model, names, fingerprint)?;
    let dir = cfg.output(&sec.out);
    save_checkpoint(&model, &meta, &dir)?;
    let doc = TrainingDocument { config: cfg.echo("fit-clvae")?, prior, log };
    write_json(&dir.join(TRAINING_FILE), &doc)
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.predict;
    let echo = cfg.echo("predict")?;
    let summaries = read_summaries(required(&sec.summaries, "predict.summaries")?)?;
    let mut sim = sec.sim.clone();
    sim.retain_draws |= sec.report_out.is_some() || sec.draws_out.is_some();
    let result = match (&sec.checkpoint, &sec.baseline) {
        (Some(dir), None) => {
            let (model, meta) = load_checkpoint(dir)?;
            let width = summaries.first().map(|s| s.covariates.len()).unwrap_or(0);
            if width != meta.covariate_width {
                return Err(Error::Shape(format!(
                    "summaries carry {width} covariates, the checkpoint expects {}",
                    meta.covariate_width
                )));
            }
            simulate_futures(&model, &summaries, &sim)?
        }
        (None, Some(path)) => {
            let params = read_baseline(path)?;
            let source = ClassicalPosteriorRates::new(&params.pnbd()?, &params.gg()?, &summaries)?;
            simulate_with(&source, &summaries, &sim)?
        }
        _ => return Err(Error::Config("exactly one of predict.checkpoint and predict.baseline is required".into())),
    };
    write_csv_with_echo(&cfg.output(&sec.out), &echo, |w| write_prediction_csv(&result, w))?;
    if let Some(path) = &sec.report_out {
        let report = expected_revenue_report(&result, &sec.quantiles)?;
        write_csv_with_echo(&cfg.output(path), &echo, |w| report.write_csv(w))?;
    }
    if let Some(path) = &sec.draws_out {
        write_csv_with_echo(&cfg.output(path), &echo, |w| write_draws_csv(&result, w))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateDocument<'a> {
    config: serde_json::Value,
    report: &'a clvae::eval::BenchmarkReport,
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.evaluate;
    let echo = cfg.echo("evaluate")?;
    let log = load_log(required(&sec.transactions, "evaluate.transactions")?, &sec.columns, sec.observed_until)?;
    let cal_date = sec.calibration_end.ok_or_else(|| Error::Config("missing evaluate.calibration_end".into()))?;
    let mut bench = sec.benchmark.clone();
    bench.calibration_end = days_since(&log, cal_date, "calibration end")?;
    let report = run_benchmark(&log, &bench)?;
    write_json(&cfg.output(&sec.out), &EvaluateDocument { config: echo.clone(), report: &report })?;
    if let Some(path) = &sec.csv_out {
        write_csv_with_echo(&cfg.output(path), &echo, |w| report.write_csv(w))?;
    }
    Ok(())
}

fn write_truth_csv(truth: &[SyntheticTruth], out: &mut dyn std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in truth {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let sec = &cfg.simulate;
    let echo = cfg.echo("simulate")?;
    let data = generate_synthetic(&sec.spec)?;
    write_csv_with_echo(&cfg.output(&sec.log_out), &echo, |w| write_transaction_log_csv(&data.log, w))?;
    write_csv_with_echo(&cfg.output(&sec.truth_out), &echo, |w| write_truth_csv(&data.truth, w))?;
    Ok(())
}
