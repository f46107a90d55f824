use qprior::measure::{sic_bloch_vectors, PovmKind};
use qprior::{standard_povm, DensityOperator, InferenceTrajectory};
use qprior_cli::config::parse_config;
use qprior_cli::run::CSV_HEADER;
use qprior_cli::{execute, sample_outcomes, write_csv};

#[test]
fn empty_trajectory_writes_header_only() {
    let mut out = Vec::new();
    write_csv(&InferenceTrajectory::default(), &mut out).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "iter,outcome,pred_prob,td_target,ess,marg_00_re,marg_01_re,marg_01_im,marg_11_re\n"
    );
    assert_eq!(
        CSV_HEADER.join(","),
        "iter,outcome,pred_prob,td_target,ess,marg_00_re,marg_01_re,marg_01_im,marg_11_re"
    );
}

#[test]
fn entangled_pair_frequencies_match_born_rule() {
    // tr(phi+ (A (x) B)) = tr(A^T B) / 2; transposing flips the y component
    let v = sic_bloch_vectors();
    let expected = |i: usize, j: usize| {
        let (a, b) = (v[i], v[j]);
        (1.0 + a[0] * b[0] - a[1] * b[1] + a[2] * b[2]) / 16.0
    };
    let prod = standard_povm(&PovmKind::Product(
        Box::new(PovmKind::SicQubit),
        Box::new(PovmKind::SicQubit),
    ));
    let draws = 100_000;
    let s = sample_outcomes(&DensityOperator::bell_phi_plus(), &prod, draws, 5).unwrap();
    let mut counts = [0usize; 16];
    for &k in &s.outcomes {
        counts[k] += 1;
    }
    for i in 0..4 {
        for j in 0..4 {
            let freq = counts[4 * i + j] as f64 / draws as f64;
            assert!((freq - expected(i, j)).abs() < 0.01, "({i},{j}) {freq}");
        }
    }
}

fn run_config(dir: &std::path::Path, text: &str) -> (String, serde_json::Value) {
    let config = parse_config(text).unwrap();
    execute(&config, dir).unwrap();
    let csv = std::fs::read_to_string(dir.join(&config.output.csv)).unwrap();
    let json =
        serde_json::from_str(&std::fs::read_to_string(dir.join(&config.output.json)).unwrap())
            .unwrap();
    (csv, json)
}

#[test]
fn csv_and_json_contents() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = run_config(
        dir.path(),
        r#"{
            "prior": {"name": "hs_mixed", "particles": 300, "seed": 3},
            "povm": {"name": "sic_qubit", "schedule": "per_block"},
            "outcomes": {"kind": "sampled", "true_state": "zero", "seed": 4},
            "iterations": 250,
            "target": "zero",
            "resampling": {},
            "output": {"csv": "sub/t.csv", "json": "t.json"}
        }"#,
    );
    assert!(!csv.contains('\r'));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 251);
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], (i + 1).to_string());
        let pred: f64 = fields[2].parse().unwrap();
        let td: f64 = fields[3].parse().unwrap();
        let ess: f64 = fields[4].parse().unwrap();
        assert!(pred > 0.0 && pred <= 1.0);
        assert!((0.0..=1.0).contains(&td));
        assert!((1.0..=300.0 + 1e-9).contains(&ess));
        let trace: f64 = fields[5].parse::<f64>().unwrap() + fields[8].parse::<f64>().unwrap();
        assert!((trace - 1.0).abs() < 1e-10);
    }

    let fin = &json["final"];
    assert_eq!(fin["iterations"], 250);
    for key in ["marginal_1", "marginal_2"] {
        let dim = if key == "marginal_1" { 2 } else { 4 };
        for part in ["re", "im"] {
            let rows = fin[key][part].as_array().unwrap();
            assert_eq!(rows.len(), dim);
            assert!(rows.iter().all(|r| r.as_array().unwrap().len() == dim));
        }
    }
    let last: Vec<&str> = lines[250].split(',').collect();
    assert_eq!(fin["td_target"].as_f64().unwrap().to_string(), last[3]);
    assert!(fin["td_target_pair"].as_f64().is_some());
    let checkpoints = json["checkpoints"].as_array().unwrap();
    assert_eq!(
        checkpoints
            .iter()
            .map(|c| c["iteration"].as_u64().unwrap())
            .collect::<Vec<_>>(),
        vec![100, 200]
    );
    assert_eq!(json["config_echo"]["prior"]["name"], "hs_mixed");
    assert_eq!(json["config_echo"]["resampling"]["shrink"], 0.98);
}

#[test]
fn change_point_rows_leave_ess_empty() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = run_config(
        dir.path(),
        r#"{
            "prior": {"name": "counter_inductive"},
            "povm": {"name": "z_basis", "schedule": "per_block"},
            "outcomes": {"kind": "explicit", "outcomes": [1, 1, 0, 0]},
            "iterations": 4,
            "target": "zero",
            "output": {"csv": "c.csv", "json": "c.json"}
        }"#,
    );
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert!(rows.iter().all(|r| r[4].is_empty()));
    assert_eq!(rows[3][1], "0");
    // after 1,1,0 every remaining system is 0
    assert_eq!(rows[3][2], "1");
    assert_eq!(json["final"]["td_target"], 0.0);
}

#[test]
fn per_factor_schedule_doubles_the_updates() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = run_config(
        dir.path(),
        r#"{
            "prior": {"name": "hs_mixed", "particles": 50, "seed": 1},
            "povm": {"name": "product(sic_qubit,sic_qubit)", "schedule": "per_factor"},
            "outcomes": {"kind": "explicit", "outcomes": [0, 7, 13]},
            "iterations": 3,
            "target": "maximally_mixed",
            "output": {"csv": "d.csv", "json": "d.json"}
        }"#,
    );
    let outcomes: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(outcomes, ["0", "0", "1", "3", "3", "1"]);
    assert_eq!(json["final"]["iterations"], 6);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let config = parse_config(
        r#"{
            "prior": {"name": "plus_product"},
            "povm": {"name": "z_basis", "schedule": "per_block"},
            "outcomes": {"kind": "constant", "symbol": 1},
            "iterations": 2,
            "target": "plus",
            "output": {"csv": "a.csv", "json": "a.json"}
        }"#,
    )
    .unwrap();
    let err = execute(&config, &blocker).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
