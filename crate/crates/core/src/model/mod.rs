//! The variational autoencoder: amortized Gamma posteriors over the latent
//! rates (λ, μ, ν), a decoder mapping them to process rates (Λ, M, N), and
//! the ELBO training loop.

mod checkpoint;
mod config;
mod elbo;
mod likelihood;
mod network;
mod normalize;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, DataFingerprint, META_FILE, PARAMS_FILE};
pub use config::{PriorParams, TrainConfig};
pub use elbo::{elbo_estimate, elbo_graph, ElboNodes, ElboValue};
pub use likelihood::{
    conditional_log_likelihood, kl_gamma, pnbd_conditional_log_likelihood, spend_log_likelihood, DecodedRates,
};
pub use network::{sample_posterior, Clvae, GammaTriple, Mlp, DECODER_FLOOR, ENCODER_FLOOR};
pub use normalize::Normalizer;
pub use train::{split_data, train, train_model, validation_elbo, DataSplit, EpochRecord, TrainingLog};

use crate::ingest::CustomerSummary;
use crate::{Error, Result};

/// Copies of `summaries` carrying `vectors[i]` as covariates of customer `i`.
pub fn attach_covariates(summaries: &[CustomerSummary], vectors: &[Vec<f64>]) -> Result<Vec<CustomerSummary>> {
    if summaries.len() != vectors.len() {
        return Err(Error::Shape(format!("{} covariate vectors for {} customers", vectors.len(), summaries.len())));
    }
    let width = vectors.first().map_or(0, Vec::len);
    summaries
        .iter()
        .zip(vectors)
        .map(|(s, v)| {
            if v.len() != width {
                return Err(Error::Shape(format!("customer {} has {} covariates, expected {width}", s.customer_id, v.len())));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!("customer {} has a non-finite covariate", s.customer_id)));
            }
            Ok(CustomerSummary { covariates: v.clone(), ..s.clone() })
        })
        .collect()
}
