use std::path::PathBuf;

use proptest::prelude::*;
use rsq_core::config::{self, ConfigError, ExperimentConfig, RegionConfig};

fn bundled_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/symmetric2.json")
}

fn bundled() -> ExperimentConfig {
    ExperimentConfig::load(&bundled_path(), &[]).unwrap()
}

fn field_of(err: ConfigError) -> String {
    match err {
        ConfigError::Invalid { field, .. } => field,
        ConfigError::Parse { path, .. } => path,
        other => panic!("unexpected error {other}"),
    }
}

fn with(overrides: &[&str]) -> Result<ExperimentConfig, ConfigError> {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::load(&bundled_path(), &o)
}

#[test]
fn bundled_config_builds_every_model_object() {
    let cfg = bundled();
    assert_eq!((cfg.users(), cfg.state_count()), (2, 2));
    let region = cfg.capacity_region().unwrap();
    assert!(matches!(cfg.region, RegionConfig::Mac2 { .. }));
    let spec = cfg.heavy_traffic_spec(&region).unwrap();
    assert_eq!(spec.scales, vec![4.0, 8.0, 16.0, 32.0]);
    // λ = μρ with ρ(0) = log(3)/2, ρ(1) = log(5)/2
    assert!((spec.lambda[0][0] - 3f64.ln() / 2.0).abs() < 1e-9);
    assert!((spec.lambda[1][1] - 5f64.ln() / 2.0).abs() < 1e-9);
    cfg.rdrs_spec(&region).unwrap().validate().unwrap();
}

#[test]
fn round_trip_is_field_by_field_identical() {
    let cfg = bundled();
    let again = ExperimentConfig::from_json_str(&cfg.to_json(), &[]).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn published_schema_is_current() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/schema.json");
    let on_disk = std::fs::read_to_string(path).unwrap();
    assert_eq!(on_disk.trim_end(), config::schema().trim_end());
}

#[test]
fn validation_errors_name_the_field() {
    assert_eq!(field_of(with(&["simulation.horizon=0"]).unwrap_err()), "simulation.horizon");
    assert_eq!(field_of(with(&["heavy_traffic.theta.1=[0.1]"]).unwrap_err()), "heavy_traffic.theta[1]");
    assert_eq!(field_of(with(&["traffic.mu.0=-1"]).unwrap_err()), "traffic.mu[0]");
    assert_eq!(field_of(with(&["environment.initial_state=5"]).unwrap_err()), "environment.initial_state");
    assert_eq!(field_of(with(&["region.gains=[[1.0, 1.0]]"]).unwrap_err()), "region.gains");
    assert_eq!(field_of(with(&["rdrs.alpha=1.5"]).unwrap_err()), "rdrs.alpha");
    assert_eq!(field_of(with(&["heavy_traffic.scales=[8, 4]"]).unwrap_err()), "heavy_traffic.scales");
    assert_eq!(field_of(with(&["utility.weights=[1.0]"]).unwrap_err()), "utility.weights");
}

#[test]
fn parse_errors_carry_the_path() {
    assert_eq!(field_of(with(&["simulation.horizon=\"long\""]).unwrap_err()), "simulation.horizon");
    assert_eq!(field_of(with(&["simulation.policy=fastest"]).unwrap_err()), "simulation.policy");
    assert_eq!(field_of(with(&["traffic.extra=1"]).unwrap_err()), "traffic.extra");
}

#[test]
fn other_region_kinds_build() {
    let simplex = with(&[r#"region={"kind": "simplex", "users": 2, "sum_capacity": [2.0, 3.0]}"#]).unwrap();
    assert_eq!(simplex.capacity_region().unwrap().state_count(), 2);
    let disk = with(&[r#"region={"kind": "custom", "family": {"name": "disk-simplex", "users": 2, "radius": [1.5, 2.0], "sum_capacity": [2.0, 2.5]}}"#]).unwrap();
    assert_eq!(disk.capacity_region().unwrap().users(), 2);
    let mimo = with(&[r#"region={"kind": "mimo-mac", "powers": [1.0, 1.0], "divisions": 8, "channels": [[{"re": [[1.0]]}, {"re": [[1.0]]}], [{"re": [[1.2]], "im": [[0.3]]}, {"re": [[1.2]], "im": [[0.3]]}]]}"#]).unwrap();
    assert_eq!(mimo.capacity_region().unwrap().state_count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn overridden_configs_round_trip(seed in any::<u64>(), theta in -2.0f64..0.0, horizon in 1.0f64..100.0, replicas in 1usize..50, paths in 1usize..500) {
        let cfg = with(&[
            &format!("seed={seed}"),
            &format!("heavy_traffic.theta.0.1={theta}"),
            &format!("simulation.horizon={horizon}"),
            &format!("heavy_traffic.replicas={replicas}"),
            &format!("rdrs.paths={paths}"),
        ]).unwrap();
        prop_assert_eq!(cfg.seed, seed);
        prop_assert_eq!(cfg.heavy_traffic.theta[0][1], theta);
        let again = ExperimentConfig::from_json_str(&cfg.to_json(), &[]).unwrap();
        prop_assert_eq!(cfg, again);
    }
}
