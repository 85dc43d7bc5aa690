use anosov_lab::config::{ConfigError, RunConfig, SCHEMA_VERSION};
use anosov_lab::da::DaMode;

#[test]
fn default_config_is_valid_and_round_trips() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    let text = cfg.to_json();
    let back = RunConfig::from_json(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.schema_version, SCHEMA_VERSION);
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&RunConfig::default().to_json()).unwrap();
    v.as_object_mut().unwrap().insert("surprise".into(), 1.into());
    assert!(RunConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn schema_version_is_checked() {
    let mut cfg = RunConfig::default();
    cfg.schema_version = 99;
    assert!(matches!(cfg.validate(), Err(ConfigError::SchemaVersion(99))));
}

#[test]
fn invariants_name_the_offending_field() {
    let mut cfg = RunConfig::default();
    cfg.model.r_tube = 0.2;
    let err = cfg.validate().unwrap_err();
    assert!(err.to_string().contains("r_tube"), "message: {err}");

    let mut cfg = RunConfig::default();
    cfg.model.r2 = 0.05;
    assert!(cfg.validate().is_err());

    let mut cfg = RunConfig::default();
    cfg.analysis.angle_floor = 0.0;
    assert!(cfg.validate().is_err());
}

#[test]
fn non_injective_profile_is_caught_at_validation() {
    // A window too narrow for the twist fails the full model check.
    let mut cfg = RunConfig::default();
    cfg.model.r1 = 0.1;
    cfg.model.r2 = 0.25;
    assert!(cfg.validate().is_err());
}

#[test]
fn both_modes_construct() {
    let cfg = RunConfig::default();
    assert!(cfg.plug(DaMode::Source).is_ok());
    assert!(cfg.plug(DaMode::Sink).is_ok());
}
