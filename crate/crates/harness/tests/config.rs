use rsg_core::UtilityModel;
use rsg_harness::channels::Scenario;
use rsg_harness::{ExperimentConfig, HarnessError};

#[test]
fn round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        ExperimentConfig::example(),
        ExperimentConfig::budgeted_study(Scenario::S3),
    ] {
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
        assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let mut v: serde_json::Value =
        serde_json::from_str(&ExperimentConfig::example().to_json().unwrap()).unwrap();
    v["ensemble_sise"] = 3.into();
    let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
    assert!(matches!(err, HarnessError::Json(_)), "{err}");
}

#[test]
fn grids_must_start_at_zero_and_ascend() {
    for grid in [
        vec![0.1, 0.2],
        vec![0.0, 0.2, 0.2],
        vec![0.0, 0.3, 0.1],
        vec![],
    ] {
        let mut cfg = ExperimentConfig::example();
        cfg.eps_grid = grid.clone();
        assert!(
            matches!(cfg.validate(), Err(HarnessError::Config(_))),
            "{grid:?}"
        );
        let mut cfg = ExperimentConfig::example();
        cfg.delta_grid = grid.clone();
        assert!(
            matches!(cfg.validate(), Err(HarnessError::Config(_))),
            "{grid:?}"
        );
    }
    let mut cfg = ExperimentConfig::example();
    cfg.ensemble_size = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn scenario_filters_need_a_pair() {
    let mut cfg = ExperimentConfig::budgeted_study(Scenario::S1);
    cfg.spec.n_followers = 2;
    cfg.spec.action_max.push(1.0);
    cfg.spec.utility = UtilityModel::BudgetedThroughput {
        budget: vec![1.0; 3],
    };
    cfg.spec.validate().unwrap();
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    cfg.scenario = Scenario::None;
    cfg.validate().unwrap();
}

#[test]
fn instances_are_reproducible_per_index() {
    let cfg = ExperimentConfig::budgeted_study(Scenario::None);
    assert_eq!(cfg.instance(5).unwrap(), cfg.instance(5).unwrap());
    assert_ne!(cfg.instance(5).unwrap(), cfg.instance(6).unwrap());
}
