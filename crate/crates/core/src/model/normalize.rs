use serde::{Deserialize, Serialize};

use crate::grad::Tensor;
use crate::ingest::CustomerSummary;
use crate::{Error, Result};

/// Encoder input map: RFM features (optionally log-transformed and
/// standardized) followed by the raw covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub enabled: bool,
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

fn features(s: &CustomerSummary, enabled: bool) -> [f64; 4] {
    if enabled {
        [(s.x as f64).ln_1p(), s.t_x.ln_1p(), s.t.ln_1p(), s.z_bar.ln()]
    } else {
        [s.x as f64, s.t_x, s.t, s.z_bar]
    }
}

impl Normalizer {
    pub fn identity() -> Self {
        Self { enabled: false, mean: [0.0; 4], std: [1.0; 4] }
    }

    /// Statistics from `rows` only (the training split).
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a CustomerSummary>, enabled: bool) -> Result<Self> {
        if !enabled {
            return Ok(Self::identity());
        }
        let feats: Vec<[f64; 4]> = rows.into_iter().map(|s| features(s, true)).collect();
        if feats.is_empty() {
            return Err(Error::EmptyInput("cannot fit input normalization on zero customers".into()));
        }
        let n = feats.len() as f64;
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for j in 0..4 {
            mean[j] = feats.iter().map(|f| f[j]).sum::<f64>() / n;
            let var = feats.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
            std[j] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { enabled: true, mean, std })
    }

    /// `(rows.len()) x (4 + covariate_width)` encoder input.
    pub fn transform(&self, rows: &[&CustomerSummary], covariate_width: usize) -> Result<Tensor> {
        let width = 4 + covariate_width;
        let mut data = Vec::with_capacity(rows.len() * width);
        for s in rows {
            if s.covariates.len() != covariate_width {
                return Err(Error::Shape(format!(
                    "customer {} has {} covariates, model expects {covariate_width}",
                    s.customer_id,
                    s.covariates.len()
                )));
            }
            let f = features(s, self.enabled);
            for j in 0..4 {
                data.push((f[j] - self.mean[j]) / self.std[j]);
            }
            data.extend_from_slice(&s.covariates);
        }
        Tensor::new(rows.len(), width, data)
    }
}
