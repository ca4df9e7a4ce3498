use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{PriorParams, TrainConfig};
use super::likelihood::DecodedRates;
use super::normalize::Normalizer;
use crate::grad::{Graph, ParamId, ParamStore, Tensor, Value};
use crate::ingest::CustomerSummary;
use crate::numerics::{sample_gamma, softplus, softplus_inverse, GammaParams};
use crate::rng::{stream, substream};
use crate::{Error, Result};

/// Added to every encoder softplus output before scaling.
pub const ENCODER_FLOOR: f64 = 1e-6;
/// Added to every decoder softplus output before scaling.
pub const DECODER_FLOOR: f64 = 1e-8;

/// Fully connected ReLU network with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    fn init<R: Rng>(store: &mut ParamStore, prefix: &str, sizes: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::new();
        for (k, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            let wid = store.add(format!("{prefix}.{k}.weight"), Tensor::new(fan_in, fan_out, w).expect("sized"));
            let bid = store.add(format!("{prefix}.{k}.bias"), Tensor::zeros(1, fan_out));
            layers.push((wid, bid));
        }
        Self { layers }
    }

    pub fn output_layer(&self) -> (ParamId, ParamId) {
        *self.layers.last().expect("at least one layer")
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    fn forward_tensor(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let mut next = h.matmul(store.value(w))?;
            next.add_row_broadcast(store.value(b))?;
            h = if k + 1 < self.layers.len() { next.map(|v| v.max(0.0)) } else { next };
        }
        Ok(h)
    }

    fn forward_graph(&self, g: &mut Graph, store: &ParamStore, x: Value) -> Result<Value> {
        let mut h = x;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let (wv, bv) = (g.param(store, w), g.param(store, b));
            let next = g.affine(h, wv, bv)?;
            h = if k + 1 < self.layers.len() { g.relu(next) } else { next };
        }
        Ok(h)
    }
}

/// Variational posterior of one customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTriple {
    pub lambda: GammaParams,
    pub mu: GammaParams,
    pub nu: GammaParams,
}

impl GammaTriple {
    pub fn components(&self) -> [GammaParams; 3] {
        [self.lambda, self.mu, self.nu]
    }
}

/// Encoder, decoder and everything needed to apply them.
#[derive(Debug, Clone)]
pub struct Clvae {
    pub(crate) store: ParamStore,
    pub(crate) encoder: Mlp,
    pub(crate) decoder: Mlp,
    pub(crate) prior: PriorParams,
    pub(crate) normalizer: Normalizer,
    pub(crate) covariate_width: usize,
    pub(crate) config: TrainConfig,
}

fn scaled_softplus(pre: &Tensor, scales: &[f64], floor: f64) -> Tensor {
    let scale = Tensor::new(1, scales.len(), scales.to_vec()).expect("row").repeat_rows(pre.rows());
    pre.map(softplus).map(|v| v + floor).zip_map(&scale, |a, b| a * b)
}

fn scaled_softplus_graph(g: &mut Graph, pre: Value, scales: &[f64], floor: f64) -> Result<Value> {
    let rows = g.value(pre).rows();
    let scale = g.constant(Tensor::new(1, scales.len(), scales.to_vec())?.repeat_rows(rows));
    let sp = g.softplus(pre);
    let sp = g.offset(sp, floor);
    g.mul(sp, scale)
}

impl Clvae {
    /// Fresh network: weights uniform in ±1/√fan_in from the INIT stream,
    /// hidden biases zero, output biases at softplus⁻¹(1 − floor) so that a
    /// zero hidden activation reproduces the prior-derived output scales.
    pub fn initialize(config: &TrainConfig, prior: PriorParams, normalizer: Normalizer, covariate_width: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(config.seed, stream::INIT, 0);
        let mut store = ParamStore::new();
        let mut enc_sizes = vec![4 + covariate_width];
        enc_sizes.extend(&config.encoder_widths);
        enc_sizes.push(6);
        let mut dec_sizes = vec![config.latent_dim];
        dec_sizes.extend(&config.decoder_widths);
        dec_sizes.push(3);
        let encoder = Mlp::init(&mut store, "encoder", &enc_sizes, &mut rng);
        let decoder = Mlp::init(&mut store, "decoder", &dec_sizes, &mut rng);
        let mut model = Self { store, encoder, decoder, prior, normalizer, covariate_width, config: config.clone() };
        let (_, eb) = model.encoder.output_layer();
        *model.store.value_mut(eb) = Tensor::filled(1, 6, softplus_inverse(1.0 - ENCODER_FLOOR));
        let (_, db) = model.decoder.output_layer();
        *model.store.value_mut(db) = Tensor::filled(1, 3, softplus_inverse(1.0 - DECODER_FLOOR));
        Ok(model)
    }

    pub fn prior(&self) -> &PriorParams {
        &self.prior
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn covariate_width(&self) -> usize {
        self.covariate_width
    }

    pub fn input_width(&self) -> usize {
        4 + self.covariate_width
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    /// Encoder output scales: the prior (shape, rate) pairs.
    pub fn encoder_scales(&self) -> [f64; 6] {
        let [l, m, n] = self.prior.components();
        [l.shape, l.rate, m.shape, m.rate, n.shape, n.rate]
    }

    /// Decoder output scales: the prior means of (λ, μ, ν).
    pub fn decoder_scales(&self) -> [f64; 3] {
        self.prior.means()
    }

    pub fn encoder_input(&self, rows: &[&CustomerSummary]) -> Result<Tensor> {
        self.normalizer.transform(rows, self.covariate_width)
    }

    /// `n x 6` posterior parameters `(r, α, s, β, q, γ)` per row.
    pub fn encode_tensor(&self, input: &Tensor) -> Result<Tensor> {
        if input.cols() != self.input_width() {
            return Err(Error::Shape(format!("encoder expects width {}, got {}", self.input_width(), input.cols())));
        }
        let pre = self.encoder.forward_tensor(&self.store, input)?;
        Ok(scaled_softplus(&pre, &self.encoder_scales(), ENCODER_FLOOR))
    }

    pub fn encode(&self, rows: &[&CustomerSummary]) -> Result<Vec<GammaTriple>> {
        let out = self.encode_tensor(&self.encoder_input(rows)?)?;
        (0..out.rows())
            .map(|i| {
                let r = out.row_slice(i);
                Ok(GammaTriple {
                    lambda: GammaParams::new(r[0], r[1])?,
                    mu: GammaParams::new(r[2], r[3])?,
                    nu: GammaParams::new(r[4], r[5])?,
                })
            })
            .collect()
    }

    /// Latent draw to decoder input: `ln z − ln(prior mean)` per coordinate.
    fn decoder_input_shift(&self) -> [f64; 3] {
        self.prior.means().map(f64::ln)
    }

    /// `n x 3` rates `(Λ, M, N)` for `n x 3` latents `(λ, μ, ν)`.
    pub fn decode_tensor(&self, latents: &Tensor) -> Result<Tensor> {
        if latents.cols() != 3 {
            return Err(Error::Shape(format!("decoder expects 3 latent columns, got {}", latents.cols())));
        }
        let shift = Tensor::new(1, 3, self.decoder_input_shift().to_vec())?.repeat_rows(latents.rows());
        let input = latents.map(f64::ln).zip_map(&shift, |a, b| a - b);
        let pre = self.decoder.forward_tensor(&self.store, &input)?;
        Ok(scaled_softplus(&pre, &self.decoder_scales(), DECODER_FLOOR))
    }

    pub fn decode(&self, latents: &[[f64; 3]]) -> Result<Vec<DecodedRates>> {
        let t = Tensor::new(latents.len(), 3, latents.iter().flatten().copied().collect())?;
        let out = self.decode_tensor(&t)?;
        Ok((0..out.rows()).map(|i| DecodedRates { lambda: out.get(i, 0), m: out.get(i, 1), n: out.get(i, 2) }).collect())
    }

    /// Graph version of [`Clvae::encode_tensor`].
    pub fn encode_graph(&self, g: &mut Graph, input: Value) -> Result<Value> {
        let pre = self.encoder.forward_graph(g, &self.store, input)?;
        scaled_softplus_graph(g, pre, &self.encoder_scales(), ENCODER_FLOOR)
    }

    /// Graph version of [`Clvae::decode_tensor`]; `latents` is `n x 3`.
    pub fn decode_graph(&self, g: &mut Graph, latents: Value) -> Result<Value> {
        let rows = g.value(latents).rows();
        let shift = g.constant(Tensor::new(1, 3, self.decoder_input_shift().to_vec())?.repeat_rows(rows));
        let ln_z = g.ln(latents);
        let input = g.sub(ln_z, shift)?;
        let pre = self.decoder.forward_graph(g, &self.store, input)?;
        scaled_softplus_graph(g, pre, &self.decoder_scales(), DECODER_FLOOR)
    }
}

/// `n` independent `(λ, μ, ν)` draws from one posterior.
pub fn sample_posterior<R: Rng + ?Sized>(posterior: &GammaTriple, n: usize, rng: &mut R) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| posterior.components().map(|g| sample_gamma(g, rng).max(crate::grad::MIN_GAMMA_SAMPLE)))
        .collect()
}
