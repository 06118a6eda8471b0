use dfl_core::data::{load_csv, simulate_records, write_csv, CsvSchema};
use dfl_core::fairness::{delta1_eo, delta2_eo, value_hat, MetricConfig, PolicyEvaluator, Variant};
use dfl_core::harness::{fit_method, run_experiment, EvalModels, ExperimentConfig, Fitted, FittedModels, Scenario};
use dfl_core::nuisance::Family;
use dfl_core::policy::PolicyClassSpec;
use dfl_core::rng;
use dfl_core::solver::{DFLConfig, Method};

fn small_dfl() -> DFLConfig {
    DFLConfig {
        k: 5,
        class_spec: PolicyClassSpec {
            pool_size: 150,
            refine_budget: 40,
            ..PolicyClassSpec::default()
        },
        ..DFLConfig::default()
    }
}

#[test]
fn csv_round_trip_preserves_fit() {
    let data = simulate_records(300, &mut rng::stream(8, 0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&data, &path).unwrap();
    let back = load_csv(&path, &CsvSchema::standard(2, false)).unwrap();
    assert_eq!(back, data);

    let cfg = small_dfl();
    let m1 = FittedModels::fit(&data, Family::LinearGaussian, false).unwrap();
    let m2 = FittedModels::fit(&back, Family::LinearGaussian, false).unwrap();
    let a = fit_method(Method::Dfl, &data, m1.view(), &cfg).unwrap();
    let b = fit_method(Method::Dfl, &back, m2.view(), &cfg).unwrap();
    assert_eq!(a.policy(), b.policy());
}

#[test]
fn every_method_reports_consistent_scores() {
    let data = simulate_records(250, &mut rng::stream(21, 0));
    let models = FittedModels::fit(&data, Family::LinearGaussian, false).unwrap();
    let cfg = small_dfl();
    let ev = PolicyEvaluator::new(&data, &models.primary, &models.fairness, None, MetricConfig::default()).unwrap();
    for m in Method::ALL {
        let fitted = fit_method(m, &data, models.view(), &cfg).unwrap();
        let policy = fitted.policy();
        let cached = ev.scores(policy);
        // Direct metric definitions, without the evaluator's caches.
        let d1 = delta1_eo(policy, &data, Variant::Squared).unwrap();
        let d2 = delta2_eo(policy, &data, &models.fairness, Variant::Squared).unwrap();
        let v = value_hat(policy, &data, &models.primary).unwrap();
        assert!((cached.delta1 - d1).abs() < 1e-12, "{m}");
        assert!((cached.delta2 - d2).abs() < 1e-12, "{m}");
        assert!((cached.value - v).abs() < 1e-12, "{m}");
        if let Fitted::Dfl(f) = &fitted {
            assert!(f.verify().unwrap().holds());
            assert_eq!(f.scores, cached);
        }
    }
}

#[test]
fn oracle_and_refit_evaluation_modes() {
    let base = ExperimentConfig {
        scenario: Scenario::Simulation,
        methods: vec![Method::Optimal, Method::Dfl],
        replications: 2,
        dfl: small_dfl(),
        sim: dfl_core::data::SimConfig {
            n_train: 120,
            n_test: 400,
            seed: 4,
        },
        ..ExperimentConfig::default()
    };
    let train = run_experiment(&base).unwrap();
    for mode in [EvalModels::Oracle, EvalModels::TestRefit] {
        let cfg = ExperimentConfig {
            eval_models: mode,
            ..base.clone()
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.metadata.eval_models, mode);
        // Same fitted rules, different scoring models: Delta1 does not use
        // the outcome models.
        for (x, y) in r.results.iter().zip(&train.results) {
            assert_eq!(x.metrics.delta1, y.metrics.delta1);
            assert_eq!(x.train, y.train);
        }
    }
}

#[test]
fn seed_changes_results() {
    let mut cfg = ExperimentConfig {
        methods: vec![Method::Optimal],
        replications: 1,
        dfl: small_dfl(),
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&cfg).unwrap();
    cfg.seed = Some(cfg.master_seed() + 1);
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.results[0].metrics, b.results[0].metrics);
    assert_ne!(a.metadata.config_hash, b.metadata.config_hash);
}
