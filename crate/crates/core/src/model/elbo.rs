use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::Clvae;
use crate::grad::{GammaDraw, Graph, RngDraw, Tensor, Value};
use crate::ingest::CustomerSummary;
use crate::numerics::{ln_gamma, GammaParams};
use crate::{Error, Result};

/// Handles into a graph holding one ELBO evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ElboNodes {
    pub elbo: Value,
    /// Mean over customers and draws of the conditional log-likelihood.
    pub log_likelihood: Value,
    /// Mean over customers of the summed KL of the three components.
    pub kl: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboValue {
    pub elbo: f64,
    pub log_likelihood: f64,
    pub kl: f64,
}

/// KL(Gamma(shape, rate) ‖ prior) per row.
fn kl_graph(g: &mut Graph, shape: Value, rate: Value, prior: GammaParams) -> Result<Value> {
    let (ap, bp) = (prior.shape, prior.rate);
    let psi = g.digamma(shape)?;
    let centered = g.offset(shape, -ap);
    let t1 = g.mul(centered, psi)?;
    let lg = g.ln_gamma(shape)?;
    let t2 = g.sub(t1, lg)?;
    let ln_rate = g.ln(rate);
    let t3 = g.scale(ln_rate, ap);
    let acc = g.add(t2, t3)?;
    let ratio = g.div(shape, rate)?;
    let t4 = g.scale(ratio, bp);
    let acc = g.add(acc, t4)?;
    let acc = g.sub(acc, shape)?;
    Ok(g.offset(acc, ln_gamma(ap)? - ap * bp.ln()))
}

fn column_const(g: &mut Graph, rows: &[&CustomerSummary], repeat: usize, f: impl Fn(&CustomerSummary) -> f64) -> Value {
    let data: Vec<f64> = rows.iter().flat_map(|s| std::iter::repeat_n(f(s), repeat)).collect();
    g.constant(Tensor::column(data))
}

/// Records the ELBO of `rows` with `mc_samples` latent draws per customer.
///
/// Draw order: every λ draw (customer-major, sample-minor), then every μ,
/// then every ν.
pub fn elbo_graph(
    model: &Clvae,
    g: &mut Graph,
    rows: &[&CustomerSummary],
    mc_samples: usize,
    draw: &mut dyn GammaDraw,
) -> Result<ElboNodes> {
    if mc_samples == 0 {
        return Err(Error::Config("at least one Monte Carlo sample is required".into()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("ELBO of an empty batch".into()));
    }
    let input = g.constant(model.encoder_input(rows)?);
    let post = model.encode_graph(g, input)?;

    let priors = model.prior().components();
    let mut kl = None;
    for (k, prior) in priors.iter().enumerate() {
        let shape = g.column(post, 2 * k)?;
        let rate = g.column(post, 2 * k + 1)?;
        let term = kl_graph(g, shape, rate, *prior)?;
        kl = Some(match kl {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    let kl = kl.expect("three components");

    let rep = g.repeat_rows(post, mc_samples);
    let mut z = Vec::with_capacity(3);
    for k in 0..3 {
        let shape = g.column(rep, 2 * k)?;
        let rate = g.column(rep, 2 * k + 1)?;
        z.push(g.gamma_sample(shape, rate, draw)?);
    }
    let latents = g.concat_columns(&z)?;
    let rates = model.decode_graph(g, latents)?;
    let (lam, m, n) = (g.column(rates, 0)?, g.column(rates, 1)?, g.column(rates, 2)?);

    let p = model.prior().p_spend;
    let x = column_const(g, rows, mc_samples, |s| s.x as f64);
    let x1 = column_const(g, rows, mc_samples, |s| s.x as f64 + 1.0);
    let t_x = column_const(g, rows, mc_samples, |s| s.t_x);
    let t = column_const(g, rows, mc_samples, |s| s.t);
    let px = column_const(g, rows, mc_samples, |s| p * s.x as f64);
    let xz = column_const(g, rows, mc_samples, |s| s.x as f64 * s.z_bar);
    let mut spend_const = Vec::with_capacity(rows.len());
    for s in rows {
        let (x, px) = (s.x as f64, p * s.x as f64);
        spend_const.push(if s.x > 0 { px * x.ln() - ln_gamma(px)? + (px - 1.0) * s.z_bar.ln() } else { 0.0 });
    }
    let spend_const = g.constant(Tensor::column(
        spend_const.iter().flat_map(|&c| std::iter::repeat_n(c, mc_samples)).collect(),
    ));

    // Pareto/NBD part
    let total = g.add(lam, m)?;
    let ln_total = g.ln(total);
    let ln_lam = g.ln(lam);
    let ln_m = g.ln(m);
    let a = g.mul(x, ln_lam)?;
    let a = g.add(a, ln_m)?;
    let a = g.sub(a, ln_total)?;
    let decay = g.mul(total, t_x)?;
    let died = g.sub(a, decay)?;
    let b = g.mul(x1, ln_lam)?;
    let b = g.sub(b, ln_total)?;
    let decay = g.mul(total, t)?;
    let alive = g.sub(b, decay)?;
    let pnbd = g.log_sum_exp(died, alive)?;

    // spend part; vanishes identically when x = 0
    let ln_n = g.ln(n);
    let s1 = g.mul(px, ln_n)?;
    let s2 = g.mul(xz, n)?;
    let spend = g.sub(s1, s2)?;
    let spend = g.add(spend, spend_const)?;

    let ll = g.add(pnbd, spend)?;
    let ll_mean = g.mean(ll);
    let kl_mean = g.mean(kl);
    let elbo = g.sub(ll_mean, kl_mean)?;
    Ok(ElboNodes { elbo, log_likelihood: ll_mean, kl: kl_mean })
}

/// ELBO value without gradient tracking.
pub fn elbo_estimate<R: Rng + ?Sized>(
    model: &Clvae,
    rows: &[&CustomerSummary],
    mc_samples: usize,
    rng: &mut R,
) -> Result<ElboValue> {
    let mut g = Graph::inference();
    let nodes = elbo_graph(model, &mut g, rows, mc_samples, &mut RngDraw(rng))?;
    Ok(ElboValue { elbo: g.scalar(nodes.elbo), log_likelihood: g.scalar(nodes.log_likelihood), kl: g.scalar(nodes.kl) })
}
