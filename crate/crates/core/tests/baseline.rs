mod common;

use clvae::baseline::{
    fit_gg, fit_pair, fit_per_cohort, fit_pnbd, gg_customer_log_likelihood, gg_log_likelihood,
    pnbd_customer_log_likelihood, pnbd_expected_transactions, pnbd_log_likelihood, GgParams, ParetoNbdParams,
};
use clvae::eval::{generate_synthetic, Acquisition, SyntheticSpec};
use clvae::ingest::{summarize_rfm_with, CustomerSummary, SpendBasis};
use clvae::rng::substream;
use common::{gg_marginal_quadrature, mean_se, pnbd_individual_likelihood, pnbd_marginal_quadrature};
use rand_distr::{Distribution, Gamma};

const TRUTH: ParetoNbdParams = ParetoNbdParams { r: 0.55, alpha: 10.6, s: 0.61, beta: 11.7 };

fn summaries(spec: SyntheticSpec, cal_weeks: f64) -> Vec<CustomerSummary> {
    let data = generate_synthetic(&spec).unwrap();
    summarize_rfm_with(&data.log, cal_weeks * 7.0, SpendBasis::RepeatOnly).unwrap()
}

fn cohort_data(customers: usize, pnbd: ParetoNbdParams, seed: u64) -> Vec<CustomerSummary> {
    let spec = SyntheticSpec {
        customers,
        pnbd,
        window_weeks: 78.0,
        acquisition: Acquisition::AtOrigin,
        seed,
        ..SyntheticSpec::default()
    };
    summaries(spec, 78.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn single_customer_likelihood_matches_two_dimensional_quadrature() {
    for &(x, t_x, t) in &[(0u32, 0.0, 30.0), (0, 0.0, 78.0), (2, 10.0, 30.0), (5, 25.0, 78.0), (1, 3.0, 3.5)] {
        let s = CustomerSummary::new("c", x, t_x, t, 10.0).unwrap();
        let ours = pnbd_customer_log_likelihood(&TRUTH, &s).unwrap().exp();
        let reference = pnbd_marginal_quadrature(TRUTH.r, TRUTH.alpha, TRUTH.s, TRUTH.beta, x, t_x, t);
        assert!(rel(ours, reference) < 1e-6, "(x {x}, t_x {t_x}, T {t}): {ours} vs {reference}");
    }
}

#[test]
fn batch_likelihood_matches_monte_carlo_over_prior_draws() {
    let data = summaries(SyntheticSpec { customers: 100, seed: 3, ..SyntheticSpec::default() }, 120.0);
    let mut rng = substream(11, 90, 0);
    let lambda = Gamma::new(TRUTH.r, 1.0 / TRUTH.alpha).unwrap();
    let mu = Gamma::new(TRUTH.s, 1.0 / TRUTH.beta).unwrap();
    // Same prior draws for every customer; the per-draw batch sum carries
    // the correlation into the standard error.
    let sums: Vec<f64> = (0..100_000)
        .map(|_| {
            let (l, m) = (lambda.sample(&mut rng), mu.sample(&mut rng));
            data.iter().map(|s| pnbd_individual_likelihood(l, m, s.x, s.t_x, s.t)).sum()
        })
        .collect();
    let (mc, se) = mean_se(&sums);
    let exact: f64 = data.iter().map(|s| pnbd_customer_log_likelihood(&TRUTH, s).unwrap().exp()).sum();
    assert!((mc - exact).abs() < 3.0 * se, "batch likelihood {exact} vs Monte Carlo {mc} ± {se}");
}

#[test]
fn spend_density_matches_quadrature_over_nu() {
    let g = GgParams::new(6.25, 3.74, 15.44).unwrap();
    for &(x, z) in &[(1u32, 2.5), (3, 0.7), (10, 4.0), (40, 1.2)] {
        let s = CustomerSummary::new("c", x, 1.0, 10.0, z).unwrap();
        let ours = gg_customer_log_likelihood(&g, &s).unwrap().exp();
        let reference = gg_marginal_quadrature(g.p, g.q, g.gamma, x, z);
        assert!(rel(ours, reference) < 1e-6, "x {x}, z {z}: {ours} vs {reference}");
    }
}

#[test]
fn pnbd_fit_invariances() {
    let data = cohort_data(1500, TRUTH, 21);
    let fit = fit_pnbd(&data, None).unwrap();
    assert!(fit.converged);

    let refit = fit_pnbd(&data, Some(fit.params)).unwrap();
    assert!((refit.log_likelihood - fit.log_likelihood).abs() < 1e-6);

    let c = 7.0;
    let scaled: Vec<CustomerSummary> =
        data.iter().map(|s| CustomerSummary::new(&s.customer_id, s.x, s.t_x * c, s.t * c, s.z_bar).unwrap()).collect();
    let fs = fit_pnbd(&scaled, None).unwrap().params;
    assert!(rel(fs.r, fit.params.r) < 1e-3 && rel(fs.s, fit.params.s) < 1e-3, "{fs:?} vs {:?}", fit.params);
    assert!(rel(fs.alpha, c * fit.params.alpha) < 1e-3 && rel(fs.beta, c * fit.params.beta) < 1e-3);

    let mut doubled = data.clone();
    doubled.extend(data.iter().cloned());
    let fd = fit_pnbd(&doubled, None).unwrap();
    for (a, b) in [(fd.params.r, fit.params.r), (fd.params.alpha, fit.params.alpha), (fd.params.s, fit.params.s), (fd.params.beta, fit.params.beta)] {
        assert!(rel(a, b) < 1e-3, "doubled data moved the argmax: {:?} vs {:?}", fd.params, fit.params);
    }
    assert!(rel(fd.log_likelihood, 2.0 * fit.log_likelihood) < 1e-9);

    let mut reversed = data.clone();
    reversed.reverse();
    let fr = fit_pnbd(&reversed, None).unwrap();
    assert_eq!(fr.params, fit.params);
    assert_eq!(fr.log_likelihood, fit.log_likelihood);
}

#[test]
fn gg_fit_scale_equivariance() {
    let data = cohort_data(3000, TRUTH, 22);
    let fit = fit_gg(&data, None).unwrap();
    assert!(fit.converged);
    let c = 3.0;
    let scaled: Vec<CustomerSummary> =
        data.iter().map(|s| CustomerSummary::new(&s.customer_id, s.x, s.t_x, s.t, s.z_bar * c).unwrap()).collect();
    let fs = fit_gg(&scaled, None).unwrap().params;
    assert!(rel(fs.gamma, c * fit.params.gamma) < 1e-3, "{fs:?} vs {:?}", fit.params);
    assert!(rel(fs.p, fit.params.p) < 1e-3 && rel(fs.q, fit.params.q) < 1e-3);
}

#[test]
fn gg_recovers_spend_parameters_from_repeaters() {
    let truth = GgParams::new(6.25, 3.74, 15.44).unwrap();
    let mut rng = substream(5, 91, 0);
    let nu_prior = Gamma::new(truth.q, 1.0 / truth.gamma).unwrap();
    let data: Vec<CustomerSummary> = (0..10_000)
        .map(|i| {
            let x = 1 + (i % 7) as u32;
            let nu = nu_prior.sample(&mut rng);
            let z = Gamma::new(truth.p * x as f64, 1.0 / (nu * x as f64)).unwrap().sample(&mut rng);
            CustomerSummary::new(format!("c{i}"), x, 1.0, 10.0, z).unwrap()
        })
        .collect();
    let fit = fit_gg(&data, None).unwrap().params;
    for (est, tru) in [(fit.p, truth.p), (fit.q, truth.q), (fit.gamma, truth.gamma)] {
        assert!(rel(est, tru) < 0.15, "{fit:?} vs {truth:?}");
    }
    assert!(gg_log_likelihood(&fit, &data).unwrap() >= gg_log_likelihood(&truth, &data).unwrap());
}

#[test]
fn expected_transactions_vanish_for_short_horizons() {
    let s = CustomerSummary::new("c", 3, 20.0, 40.0, 5.0).unwrap();
    let e = |t: f64| pnbd_expected_transactions(&TRUTH, &s, t).unwrap();
    assert!(e(1e-9) < 1e-9);
    assert!(e(1e-9) >= 0.0);
    assert!(e(1.0) < e(10.0));
}

#[test]
fn per_cohort_fits() {
    let a = cohort_data(600, TRUTH, 31);
    let pooled = fit_pair(&a).unwrap();
    let one = fit_per_cohort(&a, &vec![0; a.len()]).unwrap();
    let c = &one.cohorts[&0];
    assert!(!c.pooled_fallback);
    assert_eq!(c.fit.pnbd.params, pooled.pnbd.params);
    assert_eq!(c.fit.gg.params, pooled.gg.params);

    // A cohort of zero-repeaters falls back to the pooled fit.
    let mut with_dead = a.clone();
    with_dead.extend((0..5).map(|i| CustomerSummary::new(format!("z{i}"), 0, 0.0, 50.0, 3.0).unwrap()));
    let labels: Vec<usize> = (0..with_dead.len()).map(|i| usize::from(i >= a.len())).collect();
    let fits = fit_per_cohort(&with_dead, &labels).unwrap();
    assert!(fits.cohorts[&1].pooled_fallback);
    assert!(!fits.cohorts[&0].pooled_fallback);
    let pooled_all = fits.pooled.as_ref().expect("pooled fit kept for fallbacks");
    assert_eq!(fits.cohorts[&1].fit.pnbd.params, pooled_all.pnbd.params);

    // Two regimes: each cohort's own fit beats the pooled fit on that cohort.
    let other = ParetoNbdParams::new(2.0, 5.0, 0.3, 30.0).unwrap();
    let b: Vec<CustomerSummary> = cohort_data(600, other, 32)
        .into_iter()
        .map(|mut s| {
            s.customer_id = format!("b{}", s.customer_id);
            s
        })
        .collect();
    let mut both = a.clone();
    both.extend(b.iter().cloned());
    let labels: Vec<usize> = (0..both.len()).map(|i| usize::from(i >= a.len())).collect();
    let fits = fit_per_cohort(&both, &labels).unwrap();
    let pooled = fit_pair(&both).unwrap();
    for (label, group) in [(0usize, &a), (1, &b)] {
        let own = pnbd_log_likelihood(&fits.cohorts[&label].fit.pnbd.params, group).unwrap();
        let shared = pnbd_log_likelihood(&pooled.pnbd.params, group).unwrap();
        assert!(own > shared, "cohort {label}: own {own} vs pooled {shared}");
    }
}
