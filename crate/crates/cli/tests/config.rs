use qprior_cli::config::{parse_config, OutcomeSource, PriorSpec, Schedule};
use qprior_cli::presets;

const MINIMAL: &str = r#"{
    "prior": {"name": "counter_inductive"},
    "povm": {"name": "z_basis", "schedule": "per_block"},
    "outcomes": {"kind": "constant", "symbol": 0},
    "iterations": 20,
    "target": "one",
    "output": {"csv": "cip.csv", "json": "cip.json"}
}"#;

fn with(field: &str, value: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    v[field] = serde_json::from_str(value).unwrap();
    v.to_string()
}

fn without(field: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    v.as_object_mut().unwrap().remove(field);
    v.to_string()
}

#[test]
fn minimal_config_parses() {
    let c = parse_config(MINIMAL).unwrap();
    assert_eq!(c.prior, PriorSpec::CounterInductive);
    assert_eq!(c.povm.schedule, Schedule::PerBlock);
    assert_eq!(c.outcomes, OutcomeSource::Constant { symbol: 0 });
    assert_eq!(c.iterations, 20);
    assert!(c.resampling.is_none());
}

#[test]
fn unknown_prior_names_the_field() {
    let err = parse_config(&with("prior", r#"{"name": "foo"}"#)).unwrap_err();
    assert!(err.mentions("prior.name"), "{err}");
    assert!(err.to_string().contains("foo"));
}

#[test]
fn negative_and_zero_iterations_rejected() {
    for bad in ["-5", "0", "2.5", "\"ten\""] {
        let err = parse_config(&with("iterations", bad)).unwrap_err();
        assert!(err.mentions("iterations"), "{bad}: {err}");
    }
}

#[test]
fn every_error_is_reported() {
    let text = r#"{
        "prior": {"name": "hs_mixed", "particles": 0, "seed": -1},
        "povm": {"name": "sic", "schedule": "sometimes"},
        "outcomes": {"kind": "constant", "symbol": 0},
        "iterations": -2,
        "target": "nowhere",
        "output": {"csv": "a.csv"},
        "colour": "blue"
    }"#;
    let err = parse_config(text).unwrap_err();
    for field in [
        "prior.particles",
        "prior.seed",
        "povm.name",
        "povm.schedule",
        "iterations",
        "target",
        "output.json",
        "colour",
    ] {
        assert!(err.mentions(field), "missing {field}:\n{err}");
    }
}

#[test]
fn missing_fields_rejected_except_resampling() {
    for field in [
        "prior",
        "povm",
        "outcomes",
        "iterations",
        "target",
        "output",
    ] {
        assert!(parse_config(&without(field)).unwrap_err().mentions(field));
    }
    assert!(parse_config(&without("resampling")).is_ok());
}

#[test]
fn seeds_are_unsigned_64_bit() {
    let ok = with(
        "prior",
        r#"{"name": "haar_pure", "particles": 3, "seed": 18446744073709551615}"#,
    );
    let ok = ok.replace("\"one\"", "\"zero\"");
    assert!(parse_config(&ok).is_ok());
    for seed in ["-1", "18446744073709551616", "1.5"] {
        let text = with(
            "prior",
            &format!(r#"{{"name": "haar_pure", "particles": 3, "seed": {seed}}}"#),
        );
        assert!(
            parse_config(&text).unwrap_err().mentions("prior.seed"),
            "{seed}"
        );
    }
}

#[test]
fn malformed_json_is_one_error() {
    let err = parse_config("{ \"prior\": ").unwrap_err();
    assert_eq!(err.0.len(), 1);
    assert!(err.to_string().contains("malformed JSON"));
}

#[test]
fn cross_field_checks() {
    // change-point prior under a SIC measurement
    let text = with("povm", r#"{"name": "sic_qubit", "schedule": "per_block"}"#);
    assert!(parse_config(&text).unwrap_err().mentions("povm.name"));
    // outcome index out of range
    let text = with("outcomes", r#"{"kind": "constant", "symbol": 2}"#);
    assert!(parse_config(&text).unwrap_err().mentions("outcomes.symbol"));
    // explicit length must match iterations
    let text = with("outcomes", r#"{"kind": "explicit", "outcomes": [0, 1]}"#);
    assert!(parse_config(&text)
        .unwrap_err()
        .mentions("outcomes.outcomes"));
    // per_factor needs a product POVM
    let text = with("povm", r#"{"name": "z_basis", "schedule": "per_factor"}"#);
    assert!(parse_config(&text).unwrap_err().mentions("povm.schedule"));
    // sampled from a two-qubit state under a one-qubit POVM
    let text = with(
        "outcomes",
        r#"{"kind": "sampled", "true_state": "bell_phi_plus", "seed": 1}"#,
    );
    assert!(parse_config(&text)
        .unwrap_err()
        .mentions("outcomes.true_state"));
    // fields of another outcome kind
    let text = with(
        "outcomes",
        r#"{"kind": "constant", "symbol": 0, "seed": 4}"#,
    );
    assert!(parse_config(&text).unwrap_err().mentions("outcomes.seed"));
}

#[test]
fn explicit_target_matrices() {
    let good = with(
        "target",
        r#"{"re": [[0.5, 0.5], [0.5, 0.5]], "im": [[0, 0], [0, 0]]}"#,
    );
    assert!(parse_config(&good).is_ok());
    let not_psd = with(
        "target",
        r#"{"re": [[1.5, 0], [0, -0.5]], "im": [[0, 0], [0, 0]]}"#,
    );
    assert!(parse_config(&not_psd).unwrap_err().mentions("target"));
    let ragged = with("target", r#"{"re": [[1, 0], [0]], "im": [[0, 0], [0, 0]]}"#);
    assert!(parse_config(&ragged).unwrap_err().mentions("target"));
}

#[test]
fn resampling_defaults_and_ranges() {
    let base = with(
        "prior",
        r#"{"name": "hs_mixed", "particles": 10, "seed": 1}"#,
    );
    let mut v: serde_json::Value = serde_json::from_str(&base).unwrap();
    v["resampling"] = serde_json::json!({"seed": 9});
    let c = parse_config(&v.to_string()).unwrap();
    let r = c.resampling.unwrap();
    assert_eq!((r.threshold, r.shrink, r.seed), (0.5, 0.98, 9));
    v["resampling"] = serde_json::json!({"shrink": 0.0, "threshold": 2.0});
    let err = parse_config(&v.to_string()).unwrap_err();
    assert!(err.mentions("resampling.shrink") && err.mentions("resampling.threshold"));
}

#[test]
fn preset_configs_round_trip_through_the_parser() {
    let configs = presets::three_priors(50, 1000, 42)
        .into_iter()
        .chain(presets::entanglement(5000, 4000, 42));
    for c in configs {
        let text = serde_json::to_string(&c.to_json()).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c, "{text}");
    }
}
