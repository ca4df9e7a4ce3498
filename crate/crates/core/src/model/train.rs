use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{PriorParams, TrainConfig};
use super::elbo::{elbo_estimate, elbo_graph};
use super::network::Clvae;
use super::normalize::Normalizer;
use crate::grad::{Adam, Graph, RngDraw};
use crate::ingest::CustomerSummary;
use crate::rng::{stream, substream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-size weighted mean of the mini-batch ELBOs seen during the epoch.
    pub train_elbo: f64,
    pub validation_elbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub train_customers: usize,
    pub validation_customers: usize,
    /// Validation ELBO of the initial parameters (epoch 0).
    pub initial_validation_elbo: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored; 0 means the initialization.
    pub best_epoch: usize,
    pub best_validation_elbo: f64,
    pub stopped_early: bool,
}

/// Customer indices of the training and validation parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Random split with `round(n · validation_fraction)` validation customers,
/// drawn from the SPLIT stream of the config seed.
pub fn split_data(n: usize, config: &TrainConfig) -> Result<DataSplit> {
    let n_val = (n as f64 * config.validation_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Config(format!(
            "validation fraction {} of {n} customers leaves an empty split",
            config.validation_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(config.seed, stream::SPLIT, 0));
    let validation = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    train.sort_unstable();
    let mut validation = validation;
    validation.sort_unstable();
    Ok(DataSplit { train, validation })
}

/// Validation ELBO under a fixed random stream, so equal parameters give
/// equal values.
pub fn validation_elbo(model: &Clvae, rows: &[&CustomerSummary]) -> Result<f64> {
    let mut rng = substream(model.config().seed, stream::VALIDATION, 0);
    Ok(elbo_estimate(model, rows, model.config().mc_samples, &mut rng)?.elbo)
}

fn check_covariates(data: &[CustomerSummary]) -> Result<usize> {
    let width = data.first().map(|s| s.covariates.len()).unwrap_or(0);
    if data.iter().any(|s| s.covariates.len() != width) {
        return Err(Error::Shape("customers carry covariate vectors of different lengths".into()));
    }
    Ok(width)
}

/// Splits the data, fits the input normalization on the training part,
/// initializes a network and trains it.
pub fn train(data: &[CustomerSummary], config: &TrainConfig, prior: &PriorParams) -> Result<(Clvae, TrainingLog)> {
    config.validate()?;
    let width = check_covariates(data)?;
    let split = split_data(data.len(), config)?;
    let normalizer = Normalizer::fit(split.train.iter().map(|&i| &data[i]), config.normalize_inputs)?;
    let model = Clvae::initialize(config, *prior, normalizer, width)?;
    train_model(model, data, &split)
}

/// Mini-batch Adam on the negative ELBO from the given starting network,
/// with early stopping on the validation ELBO. The best-validation
/// parameters are restored before returning.
pub fn train_model(mut model: Clvae, data: &[CustomerSummary], split: &DataSplit) -> Result<(Clvae, TrainingLog)> {
    let config = model.config().clone();
    config.validate()?;
    if split.validation.is_empty() || split.train.is_empty() {
        return Err(Error::Config("training needs non-empty training and validation parts".into()));
    }
    let validation: Vec<&CustomerSummary> = split.validation.iter().map(|&i| &data[i]).collect();
    let initial = validation_elbo(&model, &validation)?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteElbo { epoch: 0, batch: 0 });
    }

    let mut adam = Adam::new(config.learning_rate);
    let mut mc_rng = substream(config.seed, stream::MC, 0);
    let mut best = (0usize, initial, model.params().snapshot());
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut order = split.train.clone();

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut substream(config.seed, stream::SHUFFLE, epoch as u64));
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let rows: Vec<&CustomerSummary> = chunk.iter().map(|&i| &data[i]).collect();
            model.store.zero_grad();
            let mut g = Graph::new();
            let nodes = elbo_graph(&model, &mut g, &rows, config.mc_samples, &mut RngDraw(&mut mc_rng))
                .map_err(|e| match e {
                    Error::Numerical { .. } | Error::Domain(_) => Error::NonFiniteElbo { epoch, batch: b },
                    other => other,
                })?;
            let elbo = g.scalar(nodes.elbo);
            if !elbo.is_finite() {
                return Err(Error::NonFiniteElbo { epoch, batch: b });
            }
            let loss = g.scale(nodes.elbo, -1.0);
            g.backward(loss, &mut model.store)?;
            adam.step(&mut model.store)?;
            weighted += elbo * rows.len() as f64;
        }
        let val = validation_elbo(&model, &validation)?;
        if !val.is_finite() {
            return Err(Error::NonFiniteElbo { epoch, batch: usize::MAX });
        }
        epochs.push(EpochRecord { epoch, train_elbo: weighted / order.len() as f64, validation_elbo: val });
        if val > best.1 {
            best = (epoch, val, model.params().snapshot());
        } else if epoch - best.0 >= config.patience {
            stopped_early = true;
            break;
        }
    }
    model.store.restore(&best.2)?;
    let log = TrainingLog {
        train_customers: split.train.len(),
        validation_customers: split.validation.len(),
        initial_validation_elbo: initial,
        epochs,
        best_epoch: best.0,
        best_validation_elbo: best.1,
        stopped_early,
    };
    Ok((model, log))
}
