use clvae::ingest::CustomerSummary;
use clvae::model::DecodedRates;
use clvae::predict::{simulate_with, FixedRates, SimConfig};

fn customers() -> (Vec<CustomerSummary>, Vec<DecodedRates>) {
    let summaries = vec![
        CustomerSummary::new("a", 4, 30.0, 30.0, 12.0).unwrap(),
        CustomerSummary::new("b", 1, 5.0, 40.0, 30.0).unwrap(),
        CustomerSummary::new("c", 9, 60.0, 70.0, 8.0).unwrap(),
    ];
    let rates = vec![
        DecodedRates { lambda: 0.2, m: 0.01, n: 0.5 },
        DecodedRates { lambda: 0.05, m: 0.02, n: 0.1 },
        DecodedRates { lambda: 0.4, m: 0.005, n: 1.0 },
    ];
    (summaries, rates)
}

#[test]
fn standard_error_shrinks_at_root_n_rate() {
    let (summaries, rates) = customers();
    let source = FixedRates::new(rates, 6.0).unwrap();
    let se = |draws: usize| {
        let cfg = SimConfig { horizons: vec![52.0, 104.0], draws, seed: 3, retain_draws: false };
        simulate_with(&source, &summaries, &cfg).unwrap().revenue_std_error
    };
    let (s1, s2, s3) = (se(1_000), se(4_000), se(16_000));
    for i in 0..summaries.len() {
        for k in 0..2 {
            for (coarse, fine) in [(s1[i][k], s2[i][k]), (s2[i][k], s3[i][k])] {
                let ratio = coarse / fine;
                assert!((1.7..2.3).contains(&ratio), "customer {i}, horizon {k}: ratio {ratio}");
            }
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (summaries, rates) = customers();
    let source = FixedRates::new(rates, 6.0).unwrap();
    let cfg = SimConfig { horizons: vec![13.0, 52.0], draws: 3_000, seed: 8, retain_draws: true };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_with(&source, &summaries, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
    for i in 0..summaries.len() {
        let rows = [&one.expected_transactions[i], &one.expected_revenue[i]];
        for row in rows {
            assert!(row[0] >= 0.0 && row[0] <= row[1]);
        }
    }
}
