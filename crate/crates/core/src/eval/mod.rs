//! Error metrics, synthetic data and the calibration/holdout benchmark.

mod benchmark;
mod metrics;
mod synthetic;

pub use benchmark::{
    check_no_leakage, run_benchmark, score, BenchmarkConfig, BenchmarkReport, DataFingerprint, Forecast, ModelDetails,
    ModelKind, ModelRun, ScoreCell,
};
pub use metrics::{align, mae, mae_pairs, rmse, rmse_pairs};
pub use synthetic::{generate_synthetic, synthetic_customer_id, Acquisition, LambdaMixing, SyntheticData, SyntheticSpec, SyntheticTruth};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainConfig;
    use crate::predict::SimConfig;
    use crate::Error;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn metric_hand_values() {
        let id = ids(2);
        assert_eq!(rmse(&id, &[1.0, 2.0], &id, &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse(&id, &[3.0, -4.0], &id, &[0.0, 0.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&id, &[3.0, -4.0], &id, &[0.0, 0.0]).unwrap(), 3.5);
    }

    #[test]
    fn alignment_uses_ids_and_reports_offenders() {
        let a = vec!["x".to_string(), "y".to_string()];
        let b = vec!["y".to_string(), "x".to_string()];
        assert_eq!(rmse(&a, &[1.0, 5.0], &b, &[5.0, 1.0]).unwrap(), 0.0);
        let c = vec!["y".to_string(), "z".to_string()];
        match rmse(&a, &[1.0, 5.0], &c, &[5.0, 1.0]) {
            Err(Error::Alignment(bad)) => assert_eq!(bad, vec!["x".to_string(), "z".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn synthetic_is_reproducible_and_bounded() {
        let spec = SyntheticSpec { customers: 300, ..SyntheticSpec::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.customer_count(), 300);
        let window = spec.window_weeks * 7.0;
        assert!(a.log.transactions().iter().all(|t| t.time <= window && t.time == t.time.floor()));
        assert_eq!(a.log.observed_until(), window);
    }

    #[test]
    fn small_benchmark_runs_and_orders_metrics() {
        let spec = SyntheticSpec { customers: 400, window_weeks: 104.0 + 104.0 + 1.0, ..SyntheticSpec::default() };
        let data = generate_synthetic(&spec).unwrap();
        let config = BenchmarkConfig {
            calibration_end: 104.0 * 7.0,
            models: ModelKind::ALL.to_vec(),
            train: TrainConfig { max_epochs: 3, encoder_widths: vec![8, 4], decoder_widths: vec![4, 8], ..TrainConfig::default() },
            sim: SimConfig { horizons: vec![52.0, 104.0], draws: 50, ..SimConfig::default() },
            ..BenchmarkConfig::default()
        };
        let report = run_benchmark(&data.log, &config).unwrap();
        assert_eq!(report.cells.len(), 8);
        for c in &report.cells {
            assert!(c.rmse >= c.mae && c.mae >= 0.0);
        }
        let parallel = run_benchmark(&data.log, &BenchmarkConfig { parallel: true, ..config.clone() }).unwrap();
        assert_eq!(parallel.cells, report.cells);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("model,metric,52,104\npnbd_gg,rmse,"));
    }
}
