use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sources::{ClvaeRates, RateSource};
use crate::ingest::{validate_horizons, CustomerSummary};
use crate::model::{Clvae, DecodedRates};
use crate::numerics::{ln_one_minus_exp_neg, sample_gamma, sigmoid, GammaParams};
use crate::rng::{stream, substream, SimRng};
use crate::{Error, Result};

/// Draws handled by one parallel task.
const DRAW_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Forecast horizons in weeks after the calibration end.
    pub horizons: Vec<f64>,
    /// Draws per customer (L).
    pub draws: usize,
    pub seed: u64,
    /// Keep every per-draw count and spend in the result.
    pub retain_draws: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { horizons: vec![52.0, 104.0, 156.0, 208.0], draws: 500, seed: 50, retain_draws: false }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Config("at least one simulation draw is required".into()));
        }
        if self.draws > u32::MAX as usize {
            return Err(Error::Config("too many simulation draws".into()));
        }
        validate_horizons(&self.horizons)
    }
}

/// Per-draw outcomes of one customer, row-major `draws x horizons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerDraws {
    pub transactions: Vec<u32>,
    pub revenue: Vec<f64>,
}

impl CustomerDraws {
    /// Revenue draws at horizon index `k`.
    pub fn revenue_at(&self, k: usize, horizons: usize) -> Vec<f64> {
        self.revenue.iter().skip(k).step_by(horizons).copied().collect()
    }

    pub fn transactions_at(&self, k: usize, horizons: usize) -> Vec<u32> {
        self.transactions.iter().skip(k).step_by(horizons).copied().collect()
    }
}

/// Simulation output; outer vectors are indexed by customer, inner by horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub customer_ids: Vec<String>,
    pub horizons: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
    /// Mean over draws of the individual alive probability at `T`.
    pub p_alive: Vec<f64>,
    pub expected_transactions: Vec<Vec<f64>>,
    pub expected_revenue: Vec<Vec<f64>>,
    pub transactions_std_error: Vec<Vec<f64>>,
    pub revenue_std_error: Vec<Vec<f64>>,
    /// Draws whose event count hit the cap.
    pub overflowed_draws: usize,
    pub retained: Option<Vec<CustomerDraws>>,
}

/// `[1 + M/(Λ+M)·(e^{(Λ+M)(T−t_x)} − 1)]^{−1}`, evaluated in log space.
pub fn p_alive_individual(rates: &DecodedRates, s: &CustomerSummary) -> f64 {
    let total = rates.lambda + rates.m;
    let a = total * (s.t - s.t_x);
    if a <= 0.0 {
        return 1.0;
    }
    let ln_odds = rates.m.ln() - total.ln() + a + ln_one_minus_exp_neg(a);
    sigmoid(-ln_odds)
}

fn exp_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

fn event_cap(lambda: f64, t_max: f64) -> f64 {
    let m = lambda * t_max;
    m + 10.0 * m.sqrt() + 50.0
}

/// One future path. Writes cumulative counts and spend per horizon and
/// returns `(p_alive, overflowed)`.
fn simulate_draw(
    rates: &DecodedRates,
    p_spend: f64,
    s: &CustomerSummary,
    horizons: &[f64],
    rng: &mut SimRng,
    counts: &mut [u32],
    spend: &mut [f64],
) -> Result<(f64, bool)> {
    counts.fill(0);
    spend.fill(0.0);
    let p_alive = p_alive_individual(rates, s);
    let u: f64 = rng.random();
    if u >= p_alive {
        return Ok((p_alive, false));
    }
    let t_max = *horizons.last().expect("validated horizons");
    let lifetime = exp_draw(rates.m, rng);
    let end = lifetime.min(t_max);
    let cap = event_cap(rates.lambda, t_max);
    let mut t = 0.0;
    let mut n = 0u32;
    let mut overflow = false;
    let mut k = 0;
    loop {
        t += exp_draw(rates.lambda, rng);
        if t > end {
            break;
        }
        if f64::from(n) >= cap {
            overflow = true;
            break;
        }
        while t > horizons[k] {
            counts[k] = n;
            k += 1;
        }
        n += 1;
    }
    for c in &mut counts[k..] {
        *c = n;
    }
    let mut prev = 0u32;
    let mut total = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        if c > prev {
            total += sample_gamma(GammaParams::new(p_spend * f64::from(c - prev), rates.n)?, rng);
            prev = c;
        }
        spend[k] = total;
    }
    Ok((p_alive, overflow))
}

#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut m = Moments { n: 0.0, mean: 0.0, m2: 0.0 };
        for v in values {
            m.n += 1.0;
            let d = v - m.mean;
            m.mean += d / m.n;
            m.m2 += d * (v - m.mean);
        }
        m
    }

    fn merge(&mut self, o: &Moments) {
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

struct ChunkOutcome {
    customer: usize,
    p_alive: Moments,
    transactions: Vec<Moments>,
    revenue: Vec<Moments>,
    overflowed: usize,
    draws: Option<CustomerDraws>,
}

fn draw_rng(seed: u64, customer: usize, draw: usize) -> SimRng {
    substream(seed, stream::PREDICT, ((customer as u64) << 32) | draw as u64)
}

fn run_chunk(
    source: &dyn RateSource,
    s: &CustomerSummary,
    customer: usize,
    range: std::ops::Range<usize>,
    config: &SimConfig,
) -> Result<ChunkOutcome> {
    let kh = config.horizons.len();
    let mut rngs: Vec<SimRng> = range.clone().map(|l| draw_rng(config.seed, customer, l)).collect();
    let rates = source.rates(customer, &mut rngs)?;
    let len = range.len();
    let mut counts = vec![0u32; len * kh];
    let mut spend = vec![0.0; len * kh];
    let mut alive = Vec::with_capacity(len);
    let mut overflowed = 0;
    for (j, (r, rng)) in rates.iter().zip(rngs.iter_mut()).enumerate() {
        let (pa, over) = simulate_draw(
            r,
            source.p_spend(),
            s,
            &config.horizons,
            rng,
            &mut counts[j * kh..(j + 1) * kh],
            &mut spend[j * kh..(j + 1) * kh],
        )?;
        alive.push(pa);
        overflowed += usize::from(over);
    }
    let col = |v: &[f64], k: usize| Moments::of(v.iter().skip(k).step_by(kh).copied());
    let counts_f: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
    Ok(ChunkOutcome {
        customer,
        p_alive: Moments::of(alive.into_iter()),
        transactions: (0..kh).map(|k| col(&counts_f, k)).collect(),
        revenue: (0..kh).map(|k| col(&spend, k)).collect(),
        overflowed,
        draws: config.retain_draws.then_some(CustomerDraws { transactions: counts, revenue: spend }),
    })
}

/// Simulates every customer with rates from `source`. Results depend only on
/// the inputs and the seed, never on thread scheduling.
pub fn simulate_with(source: &dyn RateSource, summaries: &[CustomerSummary], config: &SimConfig) -> Result<PredictionResult> {
    config.validate()?;
    if source.customers() != summaries.len() {
        return Err(Error::Shape(format!(
            "rate source covers {} customers, {} summaries given",
            source.customers(),
            summaries.len()
        )));
    }
    if summaries.len() > u32::MAX as usize {
        return Err(Error::Config("too many customers for the draw stream layout".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..summaries.len())
        .flat_map(|i| (0..config.draws).step_by(DRAW_CHUNK).map(move |start| (i, start)))
        .collect();
    let chunks: Vec<ChunkOutcome> = tasks
        .par_iter()
        .map(|&(i, start)| {
            let end = (start + DRAW_CHUNK).min(config.draws);
            run_chunk(source, &summaries[i], i, start..end, config)
        })
        .collect::<Result<_>>()?;

    let kh = config.horizons.len();
    let n = summaries.len();
    let mut result = PredictionResult {
        customer_ids: summaries.iter().map(|s| s.customer_id.clone()).collect(),
        horizons: config.horizons.clone(),
        draws: config.draws,
        seed: config.seed,
        p_alive: Vec::with_capacity(n),
        expected_transactions: Vec::with_capacity(n),
        expected_revenue: Vec::with_capacity(n),
        transactions_std_error: Vec::with_capacity(n),
        revenue_std_error: Vec::with_capacity(n),
        overflowed_draws: 0,
        retained: config.retain_draws.then(|| Vec::with_capacity(n)),
    };
    let mut iter = chunks.into_iter().peekable();
    while let Some(mut first) = iter.next() {
        while let Some(next) = iter.next_if(|c| c.customer == first.customer) {
            first.p_alive.merge(&next.p_alive);
            for k in 0..kh {
                first.transactions[k].merge(&next.transactions[k]);
                first.revenue[k].merge(&next.revenue[k]);
            }
            first.overflowed += next.overflowed;
            if let (Some(a), Some(b)) = (first.draws.as_mut(), next.draws) {
                a.transactions.extend(b.transactions);
                a.revenue.extend(b.revenue);
            }
        }
        result.p_alive.push(first.p_alive.mean);
        result.expected_transactions.push(first.transactions.iter().map(|m| m.mean).collect());
        result.expected_revenue.push(first.revenue.iter().map(|m| m.mean).collect());
        result.transactions_std_error.push(first.transactions.iter().map(Moments::std_error).collect());
        result.revenue_std_error.push(first.revenue.iter().map(Moments::std_error).collect());
        result.overflowed_draws += first.overflowed;
        if let (Some(r), Some(d)) = (result.retained.as_mut(), first.draws) {
            r.push(d);
        }
    }
    Ok(result)
}

/// Simulates futures with latents from the model's encoder posterior.
pub fn simulate_futures(model: &Clvae, summaries: &[CustomerSummary], config: &SimConfig) -> Result<PredictionResult> {
    let source = ClvaeRates::new(model, summaries)?;
    simulate_with(&source, summaries, config)
}

/// Calibration-period outcome of the generative process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedHistory {
    /// Repeat purchases in `(0, T]`.
    pub x: u32,
    pub t_x: f64,
    /// Mean spend of the repeat purchases; `None` when `x = 0`.
    pub repeat_spend_mean: Option<f64>,
}

/// Runs the purchase process from a first purchase at time 0 up to `t`.
pub fn simulate_history<R: Rng + ?Sized>(rates: &DecodedRates, p_spend: f64, t: f64, rng: &mut R) -> Result<SimulatedHistory> {
    let end = exp_draw(rates.m, rng).min(t);
    let spend = GammaParams::new(p_spend, rates.n)?;
    let (mut now, mut x, mut t_x, mut total) = (0.0, 0u32, 0.0, 0.0);
    loop {
        now += exp_draw(rates.lambda, rng);
        if now > end {
            break;
        }
        x += 1;
        t_x = now;
        total += sample_gamma(spend, rng);
    }
    Ok(SimulatedHistory { x, t_x, repeat_spend_mean: (x > 0).then(|| total / f64::from(x)) })
}
