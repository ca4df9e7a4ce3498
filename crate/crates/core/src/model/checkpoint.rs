//! On-disk model: a directory holding `model.params` (binary parameter
//! container) and `model.json` (everything needed to rebuild the network).

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{PriorParams, TrainConfig};
use super::network::Clvae;
use super::normalize::Normalizer;
use crate::grad::checkpoint::{load_into, read_params, write_params};
use crate::{Error, Result};

pub const PARAMS_FILE: &str = "model.params";
pub const META_FILE: &str = "model.json";
pub const META_VERSION: u32 = 1;

/// Identifies the data a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub customers: usize,
    /// Calibration end in weeks since the log origin, when known.
    pub calibration_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub config: TrainConfig,
    pub prior: PriorParams,
    pub normalizer: Normalizer,
    pub covariate_width: usize,
    pub covariate_names: Vec<String>,
    pub fingerprint: DataFingerprint,
}

impl CheckpointMeta {
    pub fn for_model(model: &Clvae, covariate_names: Vec<String>, fingerprint: DataFingerprint) -> Result<Self> {
        if covariate_names.len() != model.covariate_width() {
            return Err(Error::Shape(format!(
                "{} covariate names for a model with {} covariates",
                covariate_names.len(),
                model.covariate_width()
            )));
        }
        Ok(Self {
            version: META_VERSION,
            config: model.config().clone(),
            prior: *model.prior(),
            normalizer: model.normalizer().clone(),
            covariate_width: model.covariate_width(),
            covariate_names,
            fingerprint,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(bytes)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_checkpoint(model: &Clvae, meta: &CheckpointMeta, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut params = Vec::new();
    write_params(model.params(), &mut params)?;
    write_atomic(&dir.join(PARAMS_FILE), &params)?;
    let json = serde_json::to_vec_pretty(meta).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join(META_FILE), &json)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Clvae, CheckpointMeta)> {
    let meta: CheckpointMeta = serde_json::from_reader(BufReader::new(fs::File::open(dir.join(META_FILE))?))
        .map_err(|e| Error::Format(format!("{META_FILE}: {e}")))?;
    if meta.version != META_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", meta.version)));
    }
    let mut model = Clvae::initialize(&meta.config, meta.prior, meta.normalizer.clone(), meta.covariate_width)?;
    let entries = read_params(BufReader::new(fs::File::open(dir.join(PARAMS_FILE))?))?;
    load_into(model.params_mut(), entries)?;
    Ok((model, meta))
}
