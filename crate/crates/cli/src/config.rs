use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clvae::eval::{BenchmarkConfig, SyntheticSpec};
use clvae::ingest::{CohortSpec, ColumnMapping, SpendBasis};
use clvae::model::TrainConfig;
use clvae::predict::SimConfig;
use clvae::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run needs. Loaded from a TOML file (or a JSON echo taken
/// from an earlier artifact), then overridden by flags and the environment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Subcommand that produced an echo; ignored when loading.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Directory that relative output paths are resolved against.
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub ingest: IngestSection,
    pub fit_baseline: FitBaselineSection,
    pub fit_clvae: FitClvaeSection,
    pub predict: PredictSection,
    pub evaluate: EvaluateSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    pub transactions: Option<PathBuf>,
    pub columns: ColumnMapping,
    pub calibration_end: Option<NaiveDate>,
    pub observed_until: Option<NaiveDate>,
    pub spend_basis: SpendBasis,
    /// Attach one-hot acquisition cohorts as covariates.
    pub cohorts: Option<CohortSpec>,
    pub summaries_out: PathBuf,
    /// Written only when set; needs `observed_until` to cover the horizons.
    pub holdout_out: Option<PathBuf>,
    pub horizons: Vec<f64>,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            transactions: None,
            columns: ColumnMapping::default(),
            calibration_end: None,
            observed_until: None,
            spend_basis: SpendBasis::default(),
            cohorts: None,
            summaries_out: "summaries.csv".into(),
            holdout_out: None,
            horizons: SimConfig::default().horizons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitBaselineSection {
    pub summaries: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for FitBaselineSection {
    fn default() -> Self {
        Self { summaries: None, out: "baseline.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitClvaeSection {
    pub summaries: Option<PathBuf>,
    /// Parameter document supplying the priors; fitted on the spot if absent.
    pub baseline: Option<PathBuf>,
    pub out: PathBuf,
    pub train: TrainConfig,
}

impl Default for FitClvaeSection {
    fn default() -> Self {
        Self { summaries: None, baseline: None, out: "checkpoint".into(), train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictSection {
    pub summaries: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Predict from the classical posterior instead of a checkpoint.
    pub baseline: Option<PathBuf>,
    pub out: PathBuf,
    pub sim: SimConfig,
    /// Revenue quantiles written to `report_out`.
    pub quantiles: Vec<f64>,
    pub report_out: Option<PathBuf>,
    pub draws_out: Option<PathBuf>,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            summaries: None,
            checkpoint: None,
            baseline: None,
            out: "predictions.csv".into(),
            sim: SimConfig::default(),
            quantiles: vec![0.05, 0.5, 0.95],
            report_out: None,
            draws_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    pub transactions: Option<PathBuf>,
    pub columns: ColumnMapping,
    pub calibration_end: Option<NaiveDate>,
    pub observed_until: Option<NaiveDate>,
    /// `calibration_end` inside is replaced by the date above.
    pub benchmark: BenchmarkConfig,
    pub out: PathBuf,
    pub csv_out: Option<PathBuf>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            transactions: None,
            columns: ColumnMapping::default(),
            calibration_end: None,
            observed_until: None,
            benchmark: BenchmarkConfig::default(),
            out: "benchmark.json".into(),
            csv_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub spec: SyntheticSpec,
    pub log_out: PathBuf,
    pub truth_out: PathBuf,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { spec: SyntheticSpec::default(), log_out: "synthetic_log.csv".into(), truth_out: "synthetic_truth.csv".into() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
        }
    }

    /// Output path, resolved against `output_dir` when relative.
    pub fn output(&self, path: &Path) -> PathBuf {
        match &self.output_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// The parts of the configuration one subcommand uses, as JSON.
    pub fn echo(&self, command: &str) -> Result<serde_json::Value> {
        let section = match command {
            "ingest" => serde_json::to_value(&self.ingest)?,
            "fit-baseline" => serde_json::to_value(&self.fit_baseline)?,
            "fit-clvae" => serde_json::to_value(&self.fit_clvae)?,
            "predict" => serde_json::to_value(&self.predict)?,
            "evaluate" => serde_json::to_value(&self.evaluate)?,
            "simulate" => serde_json::to_value(&self.simulate)?,
            other => return Err(Error::Config(format!("unknown subcommand {other:?}"))),
        };
        let mut map = serde_json::Map::new();
        map.insert("command".into(), command.into());
        map.insert("output_dir".into(), serde_json::to_value(&self.output_dir)?);
        map.insert("threads".into(), serde_json::to_value(self.threads)?);
        map.insert(command.replace('-', "_"), section);
        Ok(serde_json::Value::Object(map))
    }
}

pub fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Config(format!("missing {key}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_fill_defaults() {
        let cfg: RunConfig = toml::from_str(
            "output_dir = \"out\"\n[fit_clvae]\nsummaries = \"s.csv\"\n[fit_clvae.train]\nmax_epochs = 5\n[ingest]\ncalibration_end = \"2001-06-30\"\n",
        )
        .unwrap();
        assert_eq!(cfg.fit_clvae.train.max_epochs, 5);
        assert_eq!(cfg.fit_clvae.train.batch_size, 64);
        assert_eq!(cfg.ingest.calibration_end, NaiveDate::from_ymd_opt(2001, 6, 30));
        assert_eq!(cfg.output(Path::new("a.csv")), PathBuf::from("out/a.csv"));
        assert_eq!(cfg.output(Path::new("/abs/a.csv")), PathBuf::from("/abs/a.csv"));
    }

    #[test]
    fn echo_loads_back_as_config() {
        let mut cfg = RunConfig::default();
        cfg.predict.sim.draws = 7;
        cfg.threads = Some(2);
        let echo = cfg.echo("predict").unwrap();
        let back: RunConfig = serde_json::from_value(echo).unwrap();
        assert_eq!(back.predict, cfg.predict);
        assert_eq!(back.threads, Some(2));
        assert_eq!(back.command.as_deref(), Some("predict"));
    }
}
