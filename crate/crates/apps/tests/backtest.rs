use msdro_apps::backtest::{analytic_performance, run_backtest, ExperimentConfig, METHODS, METRICS};
use msdro_apps::report::table_to_string;
use msdro_apps::synthetic::{SpreadConvention, SyntheticModel};

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        replications: 2,
        lambda_grid: vec![0.0, 0.5, 1.0],
        m_grid: vec![0.005, 0.02],
        eps_grid: vec![0.01, 0.1, 1.0],
        ..ExperimentConfig::default()
    }
}

#[test]
fn equal_weights_analytic_performance() {
    let w = vec![0.1; 10];
    let p = analytic_performance(&w, SyntheticModel::BacktestModel1, SpreadConvention::StdDev);
    assert!((p.mean + 0.0024).abs() < 1e-12, "{}", p.mean);
    let sd = (0.02f64.powi(2) + 10.0 * 0.01 * 0.01 * 0.01).sqrt();
    assert!((p.sd - sd).abs() < 1e-12);
    assert!((p.sharpe - p.mean / sd).abs() < 1e-12);
}

#[test]
fn default_config_grids() {
    let c = ExperimentConfig::default();
    assert_eq!(c.lambda_grid.len(), 11);
    assert_eq!(c.m_grid, vec![0.002, 0.005, 0.01, 0.02]);
    assert_eq!((c.n_target, c.n_source, c.n_validation, c.replications), (5, 30, 5, 10));
    assert!(c.validate().is_ok());
    let bad = ExperimentConfig { m_grid: vec![], ..c };
    assert!(bad.validate().is_err());
}

#[test]
fn report_shape_and_determinism() {
    let a = run_backtest(&small_config(4)).unwrap();
    let b = run_backtest(&small_config(4)).unwrap();
    let (h, rows) = a.table();
    assert_eq!(h.len(), 2 + METHODS.len());
    assert_eq!(rows.len(), 2 * METRICS.len());
    assert_eq!(a.summary.len(), METRICS.len());
    for row in &a.summary {
        assert_eq!(row.len(), METHODS.len());
        assert!(row.iter().all(|(m, s)| m.is_finite() && s.is_finite()));
    }
    let (h2, rows2) = b.table();
    assert_eq!(table_to_string(&h, &rows), table_to_string(&h2, &rows2));
    for rep in &a.replications {
        for w in &rep.weights {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn config_round_trips_through_json() {
    let c = small_config(9);
    let text = serde_json::to_string(&c).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}
