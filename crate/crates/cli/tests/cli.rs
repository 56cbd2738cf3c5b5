mod common;

use common::*;
use serde_json::json;
use thermocert::families::{noisy_mubs, pauli_measurements, werner};
use thermocert::incompat::ChannelEnsemble;
use thermocert::steering::assemble;
use thermocert::thermo::thermal_state;
use thermocert::{ChoiMatrix, DensityMatrix, HermitianOperator, ThermalContext};

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn work_eval_examples() {
    let dir = tempfile::tempdir().unwrap();
    let mixed = write_scenario(
        dir.path(),
        "mixed.json",
        "state",
        state_payload(&DensityMatrix::maximally_mixed(3), Some(&HermitianOperator::zeros(3))),
    );
    let r = stdout_json(&run(&["work", "eval", "--input", s(&mixed)]));
    for k in ["w", "wInf", "delta"] {
        assert!(r["result"][k].as_f64().unwrap().abs() < 1e-12, "{k}");
    }

    let pure = write_scenario(
        dir.path(),
        "pure.json",
        "state",
        state_payload(&DensityMatrix::basis(2, 1), Some(&HermitianOperator::zeros(2))),
    );
    let r = stdout_json(&run(&["work", "eval", "--input", s(&pure)]));
    assert!((r["result"]["wInf"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["units"]["energy"], "bits");

    let h = HermitianOperator::from_real_diagonal(&[0.0, 0.3, 1.7]);
    let gamma = thermal_state(&h, &ThermalContext::default()).unwrap();
    let thermal = write_scenario(dir.path(), "gibbs.json", "state", state_payload(&gamma, None));
    let hpath = dir.path().join("h.json");
    std::fs::write(&hpath, serde_json::to_vec(&h).unwrap()).unwrap();
    let out = run(&["work", "eval", "--input", s(&thermal), "--hamiltonian", s(&hpath)]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    assert!(r["result"]["w"].as_f64().unwrap().abs() <= 1e-10);
    assert!(r["result"]["identity"]["residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn temperature_flag_switches_to_joules() {
    let dir = tempfile::tempdir().unwrap();
    let pure = write_scenario(
        dir.path(),
        "pure.json",
        "state",
        state_payload(&DensityMatrix::basis(2, 0), Some(&HermitianOperator::zeros(2))),
    );
    let r = stdout_json(&run(&["work", "eval", "--input", s(&pure), "--temp", "300"]));
    assert_eq!(r["units"]["energy"], "J");
    let w = r["result"]["wInf"].as_f64().unwrap();
    assert!((w - 300.0 * 1.380649e-23 * std::f64::consts::LN_2).abs() < 1e-30);

    let r = stdout_json(&run(&["work", "eval", "--input", s(&pure), "--kbt-ln2", "2.5"]));
    assert!((r["result"]["wInf"].as_f64().unwrap() - 2.5).abs() < 1e-12);
}

#[test]
fn thermal_block_in_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let doc = json!({
        "kind": "state",
        "payload": state_payload(&DensityMatrix::basis(2, 0), Some(&HermitianOperator::zeros(2))),
        "thermal": { "kBT_ln2": 4.0 }
    });
    std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let r = stdout_json(&run(&["work", "eval", "--input", s(&path)]));
    assert!((r["result"]["wInf"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    // flag wins over the file
    let r = stdout_json(&run(&["work", "eval", "--input", s(&path), "--kbt-ln2", "1"]));
    assert!((r["result"]["wInf"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn steering_commands() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    let w9 = werner_file(dir.path(), 0.9);

    let out = run(&["steering", "certify", "--input", s(&w9), "--measurements", s(&xz)]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    assert_eq!(r["conclusion"], "steerable");
    assert_eq!(r["verdict"], "resource");
    assert!(r["result"]["gap"].as_f64().unwrap() > 0.0);

    let single = measurements_file(dir.path(), "x.json", &pauli_measurements("X").unwrap());
    let r = stdout_json(&run(&["steering", "check-lhs", "--input", s(&w9), "--measurements", s(&single)]));
    assert_eq!(r["conclusion"], "unsteerable");

    let lhs = assemble(&werner(0.5).unwrap(), &pauli_measurements("XZ").unwrap()).unwrap();
    let lhs_file = write_scenario(dir.path(), "lhs.json", "assemblage", &lhs);
    let r = stdout_json(&run(&["steering", "energy", "--input", s(&lhs_file)]));
    assert!(r["result"]["e"].as_f64().unwrap() <= 1e-7);
    assert_eq!(r["conclusion"], "unsteerable");

    let r = stdout_json(&run(&["steering", "robustness", "--input", s(&w9), "--measurements", s(&xz)]));
    let sr = r["result"]["sr"].as_f64().unwrap();
    assert!((sr - 0.112994232).abs() < 1e-6);
}

#[test]
fn assemble_output_feeds_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    let w9 = werner_file(dir.path(), 0.9);
    let r = stdout_json(&run(&["steering", "assemble", "--input", s(&w9), "--measurements", s(&xz)]));
    let scenario = dir.path().join("sigma.json");
    std::fs::write(&scenario, serde_json::to_vec(&r["result"]).unwrap()).unwrap();
    let direct = stdout_json(&run(&["steering", "robustness", "--input", s(&w9), "--measurements", s(&xz)]));
    let via = stdout_json(&run(&["steering", "robustness", "--input", s(&scenario)]));
    assert_eq!(direct["result"]["sr"], via["result"]["sr"]);
}

#[test]
fn inconclusive_band_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    // just above 1/√2 the robustness is ~6e-7, between the two verdict bands
    let p = std::f64::consts::FRAC_1_SQRT_2 + 1e-6;
    let state = werner_file(dir.path(), p);
    let out = run(&["steering", "robustness", "--input", s(&state), "--measurements", s(&xz)]);
    let r = stdout_json(&out);
    let sr = r["result"]["sr"].as_f64().unwrap();
    assert!(sr > 1e-7 && sr < 1e-6, "sr {sr}");
    assert_eq!(code(&out), 2);
    assert_eq!(r["conclusion"], "inconclusive");
}

#[test]
fn incompat_and_channel_commands() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    let r = stdout_json(&run(&["incompat", "check", "--input", s(&xz)]));
    assert_eq!(r["conclusion"], "incompatible");

    let noisy = measurements_file(dir.path(), "noisy.json", &noisy_mubs(2, 2, 0.6).unwrap());
    let r = stdout_json(&run(&["incompat", "certify-energy", "--input", s(&noisy)]));
    assert_eq!(r["conclusion"], "compatible");
    assert!(r["result"]["e"].as_f64().unwrap() <= 1e-7);

    let id = ChoiMatrix::identity(2);
    let clone = write_scenario(dir.path(), "idid.json", "channels", ChannelEnsemble::new(vec![id.clone(), id.clone()]).unwrap());
    let r = stdout_json(&run(&["channels", "broadcast-check", "--input", s(&clone)]));
    assert_eq!(r["conclusion"], "broadcast-incompatible");
    assert!(r["result"]["certificate"].is_array());
    let alias = stdout_json(&run(&["incompat", "broadcast", "--input", s(&clone)]));
    assert_eq!(alias["result"], r["result"]);

    let pair = ChannelEnsemble::new(vec![id, ChoiMatrix::depolarizing(2)]).unwrap();
    let compatible = write_scenario(dir.path(), "iddep.json", "channels", pair);
    let out = run(&["channels", "certify", "--input", s(&compatible)]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    assert!(r["result"]["gap"].as_f64().unwrap() <= 1e-7);
    assert_eq!(r["conclusion"], "broadcast-compatible");
}

#[test]
fn payoff_command_reads_task_and_channels() {
    let dir = tempfile::tempdir().unwrap();
    let id = ChoiMatrix::identity(2);
    let ens = write_scenario(dir.path(), "ens.json", "channels", ChannelEnsemble::new(vec![id.clone(), id]).unwrap());
    let route = json!({
        "q": [0.5, 0.5],
        "states": [DensityMatrix::basis(2, 0), DensityMatrix::basis(2, 1)],
        "povm": [HermitianOperator::from_real_diagonal(&[1.0, 0.0]), HermitianOperator::from_real_diagonal(&[0.0, 1.0])],
    });
    let task = write_scenario(dir.path(), "task.json", "discrimination-task", json!({ "pX": [0.5, 0.5], "routes": [route.clone(), route] }));
    let r = stdout_json(&run(&["channels", "payoff", "--input", s(&task), "--channels", s(&ens)]));
    assert!((r["result"]["payoff"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["result"]["positive"], false);
}

#[test]
fn csv_format_has_header_and_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    let w9 = werner_file(dir.path(), 0.9);
    let out = run(&["steering", "certify", "--input", s(&w9), "--measurements", s(&xz), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sr,deficit,lhsMaxDeficit,gap,verdict");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mantissa = row[0].split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 12);
    assert_eq!(row[4], "steerable");
}

#[test]
fn validation_errors_exit_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"kind\": \"state\",\n  \"payload\": {\n    \"rho\": {\"dim\": 1, \"entries\": [[1.0, 0.0]]},\n    \"colour\": 3\n  }\n}\n").unwrap();
    let out = run(&["work", "eval", "--input", s(&path)]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.json:5:"), "{err}");
    assert!(err.contains("colour"), "{err}");

    std::fs::write(&path, "{\"kind\": \"state\", \"payload\": {}, \"extra\": 1}").unwrap();
    let out = run(&["work", "eval", "--input", s(&path)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("extra"));

    let xz = xz_file(dir.path());
    let out = run(&["steering", "certify", "--input", s(&xz)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("not accepted"));

    let out = run(&["steering", "certify"]);
    assert_eq!(code(&out), 1);
    let out = run(&["steering", "frobnicate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_werner_threshold() {
    let out = run(&["sweep", "--family", "werner", "--grid", "0,1,21"]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    let rows = r["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 21);
    let params: Vec<f64> = rows.iter().map(|x| x["parameter"].as_f64().unwrap()).collect();
    assert!(params.windows(2).all(|w| w[0] < w[1]));
    let t = &r["result"]["transition"];
    let threshold = t["threshold"].as_f64().unwrap();
    assert!((threshold - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-3);
    assert_eq!(t["confirmed"], true);
}

#[test]
fn sweep_noisy_mub_threshold_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let out = run(&["sweep", "--family", "noisy-mub", "--grid", "0.5,1,11", "--output", s(&csv)]);
    assert_eq!(code(&out), 0);
    let r = stdout_json(&out);
    let threshold = r["result"]["transition"]["threshold"].as_f64().unwrap();
    assert!((threshold - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-3);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("parameter,sr,E,gap,verdict\n"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn sweep_lhs_region_and_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"family": "werner", "grid": [0.0, 0.6, 4], "outputs": ["sr", "verdict"]}"#).unwrap();
    let out = run(&["sweep", "--input", s(&spec), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "parameter,sr,verdict");
    assert!(lines.all(|l| l.ends_with(",unsteerable")));

    let out = run(&["sweep", "--family", "werner", "--grid", "0,0.6,4"]);
    assert!(stdout_json(&out)["result"]["transition"].is_null());

    let out = run(&["sweep", "--family", "cluster", "--grid", "0,1,3"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("werner") && err.contains("noisy-mub") && err.contains("isotropic"));

    let out = run(&["sweep", "--family", "werner", "--grid", "0,1,1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn solver_debug_dump() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    let out = std::process::Command::new(BIN)
        .args(["incompat", "check", "--input", s(&xz)])
        .env("THERMOCERT_SOLVER_DEBUG", "1")
        .env("THERMOCERT_SOLVER_DEBUG_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let dumps: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("sdp-"))
        .collect();
    assert!(!dumps.is_empty());
    let text = std::fs::read_to_string(dumps[0].path()).unwrap();
    assert!(serde_json::from_str::<serde_json::Value>(&text).is_ok());
}

#[test]
fn reports_are_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let xz = xz_file(dir.path());
    let r = stdout_json(&run(&["incompat", "check", "--input", s(&xz), "--gap-tol", "1e-9", "--seed", "7"]));
    assert_eq!(r["solver"]["gapTol"], 1e-9);
    assert_eq!(r["seed"], 7);
    let bytes = std::fs::read(&xz).unwrap();
    use sha2::Digest;
    assert_eq!(r["inputs"][0]["sha256"], hex::encode(sha2::Sha256::digest(&bytes)));
}
