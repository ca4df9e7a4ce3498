//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on
//! any failure. Runs as a plain binary (`harness = false`).

mod common;

use std::time::{Duration, Instant};

use chrono::{Months, NaiveDate};
use clvae::baseline::{
    fit_gg, fit_pair, fit_pnbd, gg_log_likelihood, pnbd_expected_transactions, pnbd_log_likelihood, GgParams,
    ParetoNbdParams,
};
use clvae::eval::{generate_synthetic, run_benchmark, BenchmarkConfig, LambdaMixing, ModelKind, SyntheticSpec};
use clvae::grad::{Graph, QuantileDraw};
use clvae::ingest::{parse_transaction_log, summarize_rfm, summarize_rfm_with, ColumnMapping, CustomerSummary, SpendBasis};
use clvae::model::{
    conditional_log_likelihood, elbo_graph, kl_gamma, split_data, train, validation_elbo, Clvae, DecodedRates, Normalizer,
    PriorParams, TrainConfig,
};
use clvae::numerics::GammaParams;
use clvae::predict::{p_alive_individual, simulate_history, simulate_with, ClassicalPosteriorRates, FixedRates, SimConfig};
use clvae::rng::substream;
use rand::Rng;
use rand_distr::Exp1;
use statrs::distribution::{ContinuousCDF, Gamma as StatGamma};

const TRUTH_PNBD: ParetoNbdParams = ParetoNbdParams { r: 0.55, alpha: 10.6, s: 0.61, beta: 11.7 };
const TRUTH_GG: GgParams = GgParams { p: 6.25, q: 3.74, gamma: 15.44 };
/// Streams of this suite; kept apart from the library's labels.
const STREAM: u64 = 100;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self { status: if ok { Status::Pass } else { Status::Fail }, detail }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self { status: Status::Fail, detail: detail.into() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn summary(x: u32, t_x: f64, t: f64, z: f64) -> CustomerSummary {
    CustomerSummary::new("c", x, t_x, t, z).expect("valid summary")
}

fn kl_correctness() -> Outcome {
    let mut rng = substream(50, STREAM, 1);
    let mut worst: f64 = 0.0;
    let mut diagonal: f64 = 0.0;
    for _ in 0..50 {
        let mut draw = || rng.random_range(0.1..=20.0);
        let (aq, bq, ap, bp) = (draw(), draw(), draw(), draw());
        let q = GammaParams::new(aq, bq).unwrap();
        let p = GammaParams::new(ap, bp).unwrap();
        worst = worst.max(rel(kl_gamma(&q, &p), common::kl_quadrature(aq, bq, ap, bp)));
        diagonal = diagonal.max(kl_gamma(&q, &q).abs()).max(kl_gamma(&p, &p).abs());
    }
    Outcome::check(worst < 1e-6 && diagonal <= 1e-12, format!("max rel err {worst:.2e}, max |KL(q,q)| {diagonal:.2e}"))
}

/// Cell probability of `x` repeats with mean spend in `[lo, hi]`: the
/// likelihood integrated over the unordered earlier purchase times
/// (t_x^{x-1}/(x-1)!), over t_x and over the spend bin.
fn cell_probability(rates: &DecodedRates, p: f64, x: u32, t: f64, lo: f64, hi: f64) -> f64 {
    // Every case has p·x > 1, so the spend density vanishes at z = 0.
    let density = |t_x: f64, z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        let s = summary(x, t_x.max(1e-300), t, z);
        conditional_log_likelihood(rates, p, &s).expect("finite likelihood").exp()
    };
    let weight = |t_x: f64| t_x.powi(x as i32 - 1) / (1..x).map(f64::from).product::<f64>();
    let outer = |t_x: f64| weight(t_x) * common::simpson_rel(&|z| density(t_x, z), lo, hi, 1e-9);
    common::simpson_rel(&outer, 0.0, t, 1e-8)
}

fn likelihood_correctness() -> Outcome {
    let t = 52.0;
    let cases = [
        (DecodedRates { lambda: 0.05, m: 0.02, n: 0.4 }, 6.25),
        (DecodedRates { lambda: 0.02, m: 0.01, n: 0.1 }, 2.0),
        (DecodedRates { lambda: 0.1, m: 0.05, n: 1.5 }, 10.0),
        (DecodedRates { lambda: 0.03, m: 0.002, n: 0.05 }, 1.2),
        (DecodedRates { lambda: 0.08, m: 0.1, n: 0.7 }, 4.0),
    ];
    let draws = 1_000_000usize;
    let mut worst: f64 = 0.0;
    let mut worst_cell = String::new();
    let mut cells = 0;
    let repeat_spends = |rates: &DecodedRates, p: f64, n: usize, stream: u64| {
        let mut rng = substream(50, stream, 0);
        let mut zero = 0usize;
        let mut spends: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for _ in 0..n {
            let h = simulate_history(rates, p, t, &mut rng).expect("valid rates");
            match h.x {
                0 => zero += 1,
                1 | 2 => spends[h.x as usize - 1].push(h.repeat_spend_mean.expect("repeat spend")),
                _ => {}
            }
        }
        (zero, spends)
    };
    for (case, (rates, p)) in cases.iter().enumerate() {
        // Decile edges come from an independent pilot run, so the cell
        // counts of the main run are plain binomials.
        let (_, mut pilot) = repeat_spends(rates, *p, 200_000, STREAM + 20 + case as u64);
        let (zero, spends) = repeat_spends(rates, *p, draws, STREAM + 10 + case as u64);
        let mut record = |label: String, count: usize, prob: f64| {
            let se = (prob * (1.0 - prob) / draws as f64).sqrt();
            let dev = (count as f64 / draws as f64 - prob).abs() / se;
            if dev > worst {
                worst = dev;
                worst_cell = format!("case {case} {label}: {count} vs {:.1}", prob * draws as f64);
            }
            cells += 1;
        };
        let p0 = conditional_log_likelihood(rates, *p, &summary(0, 0.0, t, 1.0)).unwrap().exp();
        record("x=0".into(), zero, p0);
        for (k, sample) in spends.iter().enumerate() {
            let x = k as u32 + 1;
            let edges_from = &mut pilot[k];
            edges_from.sort_by(f64::total_cmp);
            let spend = StatGamma::new(p * f64::from(x), rates.n * f64::from(x)).unwrap();
            let mut edges = vec![0.0];
            edges.extend((1..10).map(|d| edges_from[d * edges_from.len() / 10]));
            edges.push(spend.inverse_cdf(1.0 - 1e-14));
            for (d, bin) in edges.windows(2).enumerate() {
                let count = sample.iter().filter(|&&z| z > bin[0] && z <= bin[1]).count();
                let prob = cell_probability(rates, *p, x, t, bin[0], bin[1]);
                record(format!("x={x} decile {}", d + 1), count, prob);
            }
        }
    }
    Outcome::check(worst < 3.0, format!("{cells} cells, worst deviation {worst:.2} SE at {worst_cell}"))
}

fn p_alive_correctness() -> Outcome {
    let configs = [(0.1, 0.05, 3, 20.0, 52.0), (0.5, 0.02, 10, 30.0, 40.0), (0.05, 0.1, 1, 5.0, 30.0), (0.2, 0.2, 2, 8.0, 12.0), (0.02, 0.01, 4, 60.0, 104.0)];
    let target = 200_000usize;
    let mut worst: f64 = 0.0;
    for (i, &(lambda, m, x, t_x, t)) in configs.iter().enumerate() {
        let mut rng = substream(50, STREAM + 3, i as u64);
        let (mut accepted, mut alive) = (0usize, 0usize);
        // The customer is alive at t_x; both clocks restart there.
        while accepted < target {
            let life: f64 = rng.sample::<f64, _>(Exp1) / m;
            let gap: f64 = rng.sample::<f64, _>(Exp1) / lambda;
            if gap < life && gap <= t - t_x {
                continue;
            }
            accepted += 1;
            alive += usize::from(life > t - t_x);
        }
        let exact = p_alive_individual(&DecodedRates { lambda, m, n: 1.0 }, &summary(x, t_x, t, 1.0));
        let se = (exact * (1.0 - exact) / accepted as f64).sqrt();
        worst = worst.max((alive as f64 / accepted as f64 - exact).abs() / se);
    }
    Outcome::check(worst < 3.0, format!("5 configurations at {target} accepted, worst deviation {worst:.2} SE"))
}

fn gradient_fidelity() -> Outcome {
    let config = TrainConfig { encoder_widths: vec![8, 4], decoder_widths: vec![4, 8], mc_samples: 10, ..TrainConfig::default() };
    let rows = vec![summary(0, 0.0, 40.0, 25.0), summary(3, 20.0, 52.0, 12.0), summary(1, 5.0, 30.0, 60.0), summary(8, 70.0, 78.0, 18.0)];
    let refs: Vec<&CustomerSummary> = rows.iter().collect();
    let prior = PriorParams::from_baseline(&TRUTH_PNBD, &TRUTH_GG).unwrap();
    let mut model = Clvae::initialize(&config, prior, Normalizer::fit(&rows, true).unwrap(), 0).unwrap();
    let mut rng = substream(50, STREAM + 4, 0);
    let u: Vec<f64> = (0..3 * rows.len() * config.mc_samples).map(|_| rng.random_range(0.02..0.98)).collect();
    // Zero biases behind a dead ReLU layer sit exactly on the next kink;
    // move to a generic point first.
    let ids: Vec<_> = model.params().ids().collect();
    for &id in &ids {
        for v in model.params_mut().value_mut(id).data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let elbo = |model: &Clvae| {
        let mut g = Graph::new();
        let nodes = elbo_graph(model, &mut g, &refs, config.mc_samples, &mut QuantileDraw::new(&u)).unwrap();
        (g, nodes.elbo)
    };
    let (mut g, out) = elbo(&model);
    model.params_mut().zero_grad();
    g.backward(out, model.params_mut()).unwrap();
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| model.params().grad(id).unwrap().data().to_vec()).collect();
    let (mut worst, mut checked): (f64, usize) = (0.0, 0);
    for (k, &id) in ids.iter().enumerate() {
        for j in 0..model.params().value(id).len() {
            let x0 = model.params().value(id).data()[j];
            let h = 1e-6 * x0.abs().max(1e-2);
            let at = |x: f64, model: &mut Clvae| {
                model.params_mut().value_mut(id).data_mut()[j] = x;
                let (g, out) = elbo(model);
                g.scalar(out)
            };
            let fd = (at(x0 + h, &mut model) - at(x0 - h, &mut model)) / (2.0 * h);
            at(x0, &mut model);
            let an = analytic[k][j];
            worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-3));
            checked += 1;
        }
    }
    Outcome::check(worst < 1e-2, format!("{checked} parameters, worst rel err {worst:.2e}"))
}

fn prediction_oracle() -> Outcome {
    let horizons = vec![52.0, 104.0];
    let cfg = SimConfig { horizons: horizons.clone(), draws: 100_000, seed: 50, retain_draws: false };

    let rates = vec![
        DecodedRates { lambda: 0.5, m: 0.01, n: 1.0 },
        DecodedRates { lambda: 0.2, m: 0.02, n: 1.0 },
        DecodedRates { lambda: 1.0, m: 0.05, n: 1.0 },
    ];
    let alive: Vec<CustomerSummary> = (0..rates.len()).map(|_| summary(4, 30.0, 30.0, 10.0)).collect();
    let fixed = simulate_with(&FixedRates::new(rates.clone(), 6.25).unwrap(), &alive, &cfg).unwrap();
    let mut worst_fixed: f64 = 0.0;
    for (i, r) in rates.iter().enumerate() {
        for (k, &t) in horizons.iter().enumerate() {
            let exact = r.lambda / r.m * (1.0 - (-r.m * t).exp());
            worst_fixed = worst_fixed.max(rel(fixed.expected_transactions[i][k], exact));
        }
    }

    let customers = vec![summary(10, 50.0, 52.0, 10.0), summary(6, 30.0, 31.0, 10.0), summary(20, 70.0, 70.0, 10.0)];
    let source = ClassicalPosteriorRates::new(&TRUTH_PNBD, &TRUTH_GG, &customers).unwrap();
    let pipeline = simulate_with(&source, &customers, &cfg).unwrap();
    let mut worst_pipeline: f64 = 0.0;
    for (i, s) in customers.iter().enumerate() {
        for (k, &t) in horizons.iter().enumerate() {
            let exact = pnbd_expected_transactions(&TRUTH_PNBD, s, t).unwrap();
            worst_pipeline = worst_pipeline.max(rel(pipeline.expected_transactions[i][k], exact));
        }
    }
    Outcome::check(
        worst_fixed < 0.01 && worst_pipeline < 0.01,
        format!("fixed latents max rel err {worst_fixed:.2e}, classical posterior max rel err {worst_pipeline:.2e}"),
    )
}

fn baseline_recovery() -> Outcome {
    let spec = SyntheticSpec { customers: 10_000, window_weeks: 156.0, whole_days: false, seed: 50, ..SyntheticSpec::default() };
    let data = generate_synthetic(&spec).unwrap();
    let summaries = summarize_rfm_with(&data.log, spec.window_weeks * 7.0, SpendBasis::RepeatOnly).unwrap();
    let pnbd = fit_pnbd(&summaries, None).unwrap();
    let gg = fit_gg(&summaries, None).unwrap();
    let pairs = [
        (pnbd.params.r, TRUTH_PNBD.r),
        (pnbd.params.alpha, TRUTH_PNBD.alpha),
        (pnbd.params.s, TRUTH_PNBD.s),
        (pnbd.params.beta, TRUTH_PNBD.beta),
        (gg.params.p, TRUTH_GG.p),
        (gg.params.q, TRUTH_GG.q),
        (gg.params.gamma, TRUTH_GG.gamma),
    ];
    let worst = pairs.iter().map(|&(est, tru)| rel(est, tru)).fold(0.0, f64::max);
    let n = summaries.len() as f64;
    let repeaters = summaries.iter().filter(|s| s.x > 0).count() as f64;
    let pnbd_gap = (pnbd_log_likelihood(&pnbd.params, &summaries).unwrap() - pnbd_log_likelihood(&TRUTH_PNBD, &summaries).unwrap()) / n;
    let gg_gap = (gg_log_likelihood(&gg.params, &summaries).unwrap() - gg_log_likelihood(&TRUTH_GG, &summaries).unwrap()) / repeaters;
    Outcome::check(
        worst < 0.15 && pnbd_gap >= -0.01 && gg_gap >= -0.01,
        format!(
            "max rel err {worst:.3} (r {:.3}, alpha {:.2}, s {:.3}, beta {:.2}, p {:.2}, q {:.2}, gamma {:.2}); LL gain per customer pnbd {pnbd_gap:.2e}, gg {gg_gap:.2e}",
            pnbd.params.r, pnbd.params.alpha, pnbd.params.s, pnbd.params.beta, gg.params.p, gg.params.q, gg.params.gamma
        ),
    )
}

fn training_sanity() -> Outcome {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let summaries = summarize_rfm(&data.log, 104.0 * 7.0).unwrap();
    let base = fit_pair(&summaries).unwrap();
    let prior = PriorParams::from_baseline(&base.pnbd.params, &base.gg.params).unwrap();
    let config = TrainConfig::default();
    let (model, log) = train(&summaries, &config, &prior).unwrap();
    let (again, log_again) = train(&summaries, &config, &prior).unwrap();
    let same_params = model
        .params()
        .ids()
        .all(|id| model.params().value(id).data() == again.params().value(id).data());
    let deterministic = log == log_again && same_params;

    let improved = log.best_validation_elbo > log.initial_validation_elbo;
    let split = split_data(summaries.len(), &config).unwrap();
    let rows: Vec<&CustomerSummary> = split.validation.iter().map(|&i| &summaries[i]).collect();
    let restored = validation_elbo(&model, &rows).unwrap();
    let best_logged = log.epochs.iter().map(|e| e.validation_elbo).fold(f64::NEG_INFINITY, f64::max);
    let restores_best = restored == log.best_validation_elbo && best_logged == log.best_validation_elbo;
    Outcome::check(
        deterministic && improved && restores_best,
        format!(
            "{} customers, {} epochs (best {}), identical reruns {deterministic}, validation ELBO {:.3} -> {:.3}, restored {restored:.3}",
            summaries.len(),
            log.epochs.len(),
            log.best_epoch,
            log.initial_validation_elbo,
            log.best_validation_elbo
        ),
    )
}

fn misspecification_benefit() -> Outcome {
    let mixing = LambdaMixing::Mixture {
        weight: 0.7,
        first: GammaParams::new(10.0, 1000.0).unwrap(),
        second: GammaParams::new(10.0, 10.0).unwrap(),
    };
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let spec = SyntheticSpec { customers: 4000, window_weeks: 221.0, lambda_mixing: mixing, seed, ..SyntheticSpec::default() };
        let log = generate_synthetic(&spec).unwrap().log;
        let config = BenchmarkConfig {
            calibration_end: 117.0 * 7.0,
            sim: SimConfig { horizons: vec![52.0, 104.0], ..SimConfig::default() },
            ..BenchmarkConfig::default()
        };
        let report = match run_benchmark(&log, &config) {
            Ok(r) => r,
            Err(e) => return Outcome::fail(format!("seed {seed}: {e}")),
        };
        let clvae = report.cell(ModelKind::Clvae, 104.0).unwrap().rmse;
        let pnbd = report.cell(ModelKind::PnbdGg, 104.0).unwrap().rmse;
        wins += usize::from(clvae <= pnbd);
        rows.push(format!("seed {seed} clvae {clvae:.2} / pnbd+gg {pnbd:.2}"));
    }
    Outcome::check(wins >= 3, format!("CLVAE <= PNBD+GG at 104 weeks in {wins}/5 seeds ({})", rows.join("; ")))
}

/// Runs the benchmark on a user-supplied log and prints the grid; never
/// part of the verdict.
fn supplied_benchmarks() {
    let (Ok(path), Ok(weeks)) = (std::env::var("CLVAE_BENCHMARK_LOG"), std::env::var("CLVAE_BENCHMARK_CALIBRATION_WEEKS")) else {
        return;
    };
    let run = || -> Result<String, String> {
        let weeks: f64 = weeks.parse().map_err(|e| format!("calibration weeks: {e}"))?;
        let log = read_log(&path)?;
        let config = BenchmarkConfig { calibration_end: weeks * 7.0, ..BenchmarkConfig::default() };
        let report = run_benchmark(&log, &config).map_err(|e| e.to_string())?;
        Ok(report
            .cells
            .iter()
            .map(|c| format!("{} h{}: rmse {:.2} mae {:.2}", c.model.name(), c.horizon, c.rmse, c.mae))
            .collect::<Vec<_>>()
            .join("; "))
    };
    match run() {
        Ok(line) => println!("  supplied log {path}: {line}"),
        Err(e) => println!("  supplied log {path}: error {e}"),
    }
}

fn read_log(path: &str) -> Result<clvae::ingest::TransactionLog, String> {
    let mut mapping = ColumnMapping::default();
    if let Ok(spec) = std::env::var("CLVAE_RETAILER_C_COLUMNS") {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() < 3 {
            return Err("CLVAE_RETAILER_C_COLUMNS needs customer,date,amount".into());
        }
        mapping.customer = parts[0].into();
        mapping.date = parts[1].into();
        mapping.amount = parts[2].into();
        if let Some(d) = parts.get(3).and_then(|d| d.chars().next()) {
            mapping.delimiter = if parts[3] == "tab" { '\t' } else { d };
        }
    }
    let file = std::fs::File::open(path).map_err(|e| format!("{path}: {e}"))?;
    parse_transaction_log(file, &mapping).map_err(|e| e.to_string())
}

/// Documented preprocessing: the acquisition cohort is every customer whose
/// first purchase falls in the first 24 calendar months of the file, and
/// the calibration period ends at the same date.
fn ingestion_fidelity() -> Outcome {
    let Ok(path) = std::env::var("CLVAE_RETAILER_C") else {
        return Outcome { status: Status::Skip, detail: "CLVAE_RETAILER_C not set".into() };
    };
    let log = match read_log(&path) {
        Ok(log) => log,
        Err(e) => return Outcome::fail(e),
    };
    let origin: NaiveDate = log.origin();
    let end = origin.checked_add_months(Months::new(24)).expect("date in range");
    let days = (end - origin).num_days() as f64;
    let summaries = match summarize_rfm(&log, days) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let n = summaries.len();
    let share = summaries.iter().filter(|s| s.x == 0).count() as f64 / n as f64;
    Outcome::check(
        n == 5843 && (share - 0.276).abs() <= 0.005,
        format!("{n} customers, zero-repeater share {:.2}%", 100.0 * share),
    )
}

fn main() {
    let criteria: [(&str, Option<u64>, fn() -> Outcome); 9] = [
        ("KL correctness", Some(10), kl_correctness),
        ("likelihood correctness", Some(120), likelihood_correctness),
        ("P(alive) correctness", Some(120), p_alive_correctness),
        ("gradient fidelity", Some(60), gradient_fidelity),
        ("prediction oracle", Some(180), prediction_oracle),
        ("baseline recovery", Some(300), baseline_recovery),
        ("training sanity", Some(900), training_sanity),
        ("misspecification benefit", None, misspecification_benefit),
        ("ingestion fidelity", None, ingestion_fidelity),
    ];
    // Comma-separated criterion numbers restrict the run.
    let only: Option<Vec<usize>> =
        std::env::var("CLVAE_ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        let timing = match budget {
            Some(b) => {
                if elapsed > Duration::from_secs(*b) && matches!(outcome.status, Status::Pass) {
                    outcome.status = Status::Fail;
                }
                format!("{:.1} s of {b} s", elapsed.as_secs_f64())
            }
            None => format!("{:.1} s", elapsed.as_secs_f64()),
        };
        let label = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("criterion {} {name}: {label} ({}; {timing})", i + 1, outcome.detail);
        if i == 7 {
            supplied_benchmarks();
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
