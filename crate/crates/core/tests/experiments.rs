use stochcbo::experiments::{
    emit_csv, read_csv, run_experiment, write_csv, Experiment, ExperimentConfig, PartialConfig, Pipeline, Scale,
};
use stochcbo::Error;

fn small(experiment: Experiment) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(experiment, Scale::Desk, true);
    cfg.t_final = 1.0;
    cfg.samples_cbo = 3;
    cfg.samples_y = 2;
    cfg.n_ref = 200;
    match experiment {
        Experiment::Test1Saa => {
            cfg.n = vec![50];
            cfg.m = vec![10, 40];
        }
        Experiment::Test1Mf => cfg.n = vec![20, 80],
        Experiment::Test2 | Experiment::Test3 => cfg.n = vec![16, 64],
        Experiment::Test4 => {
            cfg.n = vec![30];
            cfg.m = vec![30];
            cfg.objective = "utility-d1,utility-d2".into();
        }
        Experiment::Run => {}
    }
    cfg.validate().unwrap();
    cfg
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let report = run_experiment(cfg).unwrap();
    let mut out = Vec::new();
    write_csv(&report, &mut out).unwrap();
    out
}

#[test]
fn reruns_are_byte_identical() {
    for exp in Experiment::ALL {
        let cfg = small(exp);
        let first = csv_bytes(&cfg);
        assert!(first.len() > 100, "{exp} wrote almost nothing");
        assert_eq!(first, csv_bytes(&cfg), "{exp} is not deterministic");
    }
}

#[test]
fn seed_changes_output() {
    let mut cfg = small(Experiment::Test2);
    let a = csv_bytes(&cfg);
    cfg.seed = 99;
    assert_ne!(a, csv_bytes(&cfg));
}

#[test]
fn csv_round_trip() {
    let report = run_experiment(&small(Experiment::Test1Mf)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.csv");
    emit_csv(&report, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), report.rows);
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("experiment,objective,pipeline,t,scale_name,scale_value,p_or_thr,error_mean,q15,q85,slope\n"));
}

#[test]
fn identical_reference_gives_zero_distance() {
    let mut cfg = small(Experiment::Test1Mf);
    cfg.n = vec![cfg.n_ref];
    cfg.common_reference_noise = true;
    let report = run_experiment(&cfg).unwrap();
    assert!(!report.rows.is_empty());
    assert!(report.rows.iter().all(|r| r.error_mean == 0.0));
    assert!(report.fits.is_empty());
}

#[test]
fn single_scale_has_no_fit() {
    let mut cfg = small(Experiment::Test1Saa);
    cfg.m = vec![40];
    let report = run_experiment(&cfg).unwrap();
    assert!(report.fits.is_empty());
    assert!(report.rows.iter().all(|r| r.slope.is_none()));
    assert_eq!(report.rows.len(), cfg.params().unwrap().n_it);
}

#[test]
fn saa_rows_cover_every_scale_and_time() {
    let cfg = small(Experiment::Test1Saa);
    let report = run_experiment(&cfg).unwrap();
    let n_it = cfg.params().unwrap().n_it;
    assert_eq!(report.rows.len(), cfg.m.len() * n_it);
    for row in &report.rows {
        assert_eq!(row.scale_name, "M");
        assert!(row.error_mean.is_finite() && row.error_mean >= 0.0);
        let (lo, hi) = (row.q15.unwrap(), row.q85.unwrap());
        assert!(lo <= hi);
    }
    let fit = report.fit("test1-saa", "ackley-like", None).unwrap();
    assert_eq!(fit.fit.points.len(), 2);
}

#[test]
fn meanfield_orders_w1_below_w2() {
    let report = run_experiment(&small(Experiment::Test1Mf)).unwrap();
    assert_eq!(report.diagnostic("test1-mf-w1-above-w2-cells"), Some(0.0));
    assert!(report.fit("test1-mf", "ackley-like", Some(1.0)).is_some());
    assert!(report.fit("test1-mf", "ackley-like", Some(2.0)).is_some());
}

#[test]
fn quadrature_part_does_not_depend_on_n() {
    let report = run_experiment(&small(Experiment::Test2)).unwrap();
    assert_eq!(report.diagnostic("test2-quadrature-part-variation"), Some(0.0));
    for name in ["test2", "test2-meanfield-part"] {
        assert!(report.rows.iter().any(|r| r.experiment == name));
    }
}

#[test]
fn dimension_sweep_records_actual_node_counts() {
    let report = run_experiment(&small(Experiment::Test3)).unwrap();
    let scales = |obj: &str| {
        let mut s: Vec<f64> = report.rows.iter().filter(|r| r.objective == obj).map(|r| r.scale_value).collect();
        s.dedup();
        s
    };
    assert_eq!(scales("lls-k1"), [16.0, 64.0]);
    assert_eq!(scales("lls-k2"), [16.0, 64.0]);
    assert_eq!(scales("lls-k3"), [8.0, 64.0]);
}

#[test]
fn success_rates_are_fractions() {
    let cfg = small(Experiment::Test4);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2 * cfg.n.len() * 2 * cfg.thresholds.len());
    for row in &report.rows {
        let rate = row.error_mean;
        assert!((0.0..=1.0).contains(&rate));
        assert!((rate * cfg.samples_cbo as f64).fract() == 0.0);
    }
    // Wider balls never lose candidates.
    for obj in ["utility-d1", "utility-d2"] {
        for pipe in ["saa", "quadrature"] {
            let rates: Vec<f64> = cfg
                .thresholds
                .iter()
                .map(|&t| report.success_rate(obj, pipe, 30.0, t).unwrap())
                .collect();
            let mut sorted_thr: Vec<(f64, f64)> = cfg.thresholds.iter().copied().zip(rates).collect();
            sorted_thr.sort_by(|a, b| a.0.total_cmp(&b.0));
            assert!(sorted_thr.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }
}

#[test]
fn exact_pipeline_on_success_study() {
    let mut cfg = small(Experiment::Test4);
    cfg.pipeline = Some(Pipeline::ExactF);
    let report = run_experiment(&cfg).unwrap();
    assert!(report.rows.iter().all(|r| r.pipeline == "exact-f"));
}

#[test]
fn single_run_reports_consensus() {
    let mut cfg = small(Experiment::Run);
    cfg.objective = "lls-k2".into();
    cfg.t_final = 10.0;
    let report = run_experiment(&cfg).unwrap();
    let x = report.diagnostic("final-consensus-0").unwrap();
    assert!((x - 0.75).abs() < 0.05, "consensus {x}");
    let last = report.rows.last().unwrap();
    assert!((last.error_mean - (x - 0.75).abs()).abs() < 1e-12);
}

#[test]
fn config_layers_apply_in_order() {
    let file = PartialConfig::from_toml("n = [10, 20]\nsigma = 0.3\nseed = 5\n").unwrap();
    let flags = PartialConfig {
        seed: Some(7),
        ..Default::default()
    };
    let cfg = ExperimentConfig::resolve(Experiment::Test2, Some(&file), &flags).unwrap();
    assert_eq!((cfg.n.clone(), cfg.sigma, cfg.seed), (vec![10, 20], 0.3, 7));
    assert!(PartialConfig::from_toml("sigmaa = 0.3").is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        PartialConfig { n: Some(vec![100, 50]), ..Default::default() },
        PartialConfig { dt: Some(-0.1), ..Default::default() },
        PartialConfig { objective: Some("rosenbrock".into()), ..Default::default() },
        PartialConfig { thresholds: Some(vec![]), ..Default::default() },
    ];
    for partial in bad {
        assert!(ExperimentConfig::resolve(Experiment::Test2, None, &partial).is_err(), "{partial:?}");
    }
    let two = PartialConfig { n: Some(vec![10, 20]), ..Default::default() };
    let cfg = ExperimentConfig::resolve(Experiment::Test1Saa, None, &two).unwrap();
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
}

#[test]
fn missing_config_file_names_the_path() {
    let err = PartialConfig::load(std::path::Path::new("/nonexistent/cfg.toml")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/cfg.toml"));
}
