use std::path::PathBuf;
use std::process::Command;

use bellmeter::behaviour::{Behaviour, Tolerance};
use bellmeter::cli;
use bellmeter::hvmodel::trivial_fhv;
use bellmeter::polytope::PrBox;
use bellmeter::quantum::{born_behaviour, tsirelson_settings, TwoQubitPureState};
use bellmeter::schema::{behaviour_from_json, behaviour_to_json, model_from_json, model_to_json};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }

    fn error_kind(&self) -> String {
        let v: Value = serde_json::from_str(self.stderr.trim()).unwrap();
        v["error"]["kind"].as_str().unwrap().to_string()
    }
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bellmeter").chain(args.iter().copied());
    let code = cli::run(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with_stdin(args, "")
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn pr_box_file() -> PathBuf {
    write_temp("prbox.json", &behaviour_to_json(PrBox::new(1).unwrap().behaviour(), None))
}

fn tsirelson_file() -> PathBuf {
    let (a, b) = tsirelson_settings();
    let beh = born_behaviour(&TwoQubitPureState::phi_plus(), &a, &b).unwrap();
    write_temp("tsirelson.json", &behaviour_to_json(&beh, None))
}

fn signalling_file() -> PathBuf {
    let b = Behaviour::from_fn(2, 2, |_, y, a, _| if a == y { 0.5 } else { 0.0 }).unwrap();
    write_temp("signalling.json", &behaviour_to_json(&b, None))
}

#[test]
fn check_pr_box() {
    let r = run(&["check", pr_box_file().to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json(), serde_json::json!({"valid": true, "non_signalling": true}));
}

#[test]
fn check_reports_signalling_witness() {
    let r = run(&["check", signalling_file().to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let v = r.json();
    assert_eq!(v["non_signalling"], false);
    assert_eq!(v["signalling_witness"]["party"], "alice");
}

#[test]
fn measure_both_methods_agree_on_tsirelson() {
    let r = run(&["measure", "--method", "both", tsirelson_file().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    let f = v["formula"]["measure"].as_f64().unwrap();
    let l = v["lp"]["mu"].as_f64().unwrap();
    assert!((f - l).abs() <= 1e-7);
    assert!((f - (2.0 - 2f64.sqrt())).abs() <= 1e-9);
}

#[test]
fn measure_rejects_signalling_input() {
    let r = run(&["measure", signalling_file().to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.is_empty());
    assert_eq!(r.error_kind(), "signalling");
}

#[test]
fn invalid_behaviour_is_a_domain_error() {
    let path = write_temp(
        "unnormalized.json",
        r#"{"num_settings_a":1,"num_settings_b":1,"probabilities":[[[[0.5,0.5],[0.5,0.5]]]]}"#,
    );
    let r = run(&["measure", "--method", "lp", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error_kind(), "invalid_behaviour");
}

#[test]
fn chained_ten_reports_bound_and_envelope() {
    let r = run(&["chained", "--m", "10"]);
    assert_eq!(r.code, 0);
    let v = r.json();
    assert!((v["bound_exact"].as_f64().unwrap() - 0.12956761767413738).abs() < 1e-12);
    let envelope = std::f64::consts::PI.powi(2) / 76.0;
    assert!((v["bound_envelope"].as_f64().unwrap() - envelope).abs() < 1e-15);
    assert!((envelope - 0.12986321580380733).abs() < 1e-15);
    assert_eq!(v["s_sharp"], 20.0);
    assert_eq!(v["s_loc"], 18.0);
}

#[test]
fn chained_needs_two_settings() {
    let r = run(&["chained", "--m", "1"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error_kind(), "domain");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["measure", "--method", "guess", "x.json"]).code, 2);
    assert_eq!(run(&["chained"]).code, 2);
    assert_eq!(run(&["--tol", "-1", "chained", "--m", "3"]).code, 2);
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn stdin_input() {
    let text = behaviour_to_json(PrBox::new(3).unwrap().behaviour(), None);
    let r = run_with_stdin(&["chsh", "-"], &text);
    assert_eq!(r.code, 0);
    let v = r.json();
    assert_eq!(v["s_values"], serde_json::json!([0.0, 4.0, 0.0, 0.0]));
    assert_eq!(v["measure"], 0.0);
}

#[test]
fn decompose_output_reassembles() {
    let iso = PrBox::new(6)
        .unwrap()
        .behaviour()
        .mix(&Behaviour::uniform(2, 2).unwrap(), 0.9)
        .unwrap();
    let r = run_with_stdin(&["decompose", "-"], &behaviour_to_json(&iso, None));
    assert_eq!(r.code, 0);
    let v = r.json();
    let p = v["p"].as_f64().unwrap();
    assert!((p - 0.2).abs() < 1e-12);
    assert_eq!(v["pr_index"], 6);
    let tol = Tolerance::default();
    let local = behaviour_from_json(&v["local_part"].to_string(), tol).unwrap().0;
    let pr = behaviour_from_json(&v["pr_part"].to_string(), tol).unwrap().0;
    assert!(local.mix(&pr, p).unwrap().max_abs_diff(&iso).unwrap() < 1e-12);
}

#[test]
fn dilate_then_classify() {
    let r = run(&["dilate", pr_box_file().to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let model = model_from_json(&r.stdout, Tolerance::default()).unwrap();
    assert_eq!(model.lambda_count(), 16);
    let c = run_with_stdin(&["classify", "-"], &r.stdout);
    assert_eq!(c.code, 0);
    let v = c.json();
    assert_eq!(v["measures"]["freedom_mass"], 0.0);
    assert_eq!(v["measures"]["locality_mass"], 1.0);
    assert_eq!(v["classification"]["free"], serde_json::json!([]));
}

#[test]
fn quantum_subcommand_round_trips() {
    let r = run(&[
        "quantum",
        "--theta",
        "1.5707963267948966",
        "--alice",
        "0,0.7853981633974483",
        "--bob",
        "0.39269908169872414,-0.39269908169872414",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (b, _) = behaviour_from_json(&r.stdout, Tolerance::default()).unwrap();
    let s = bellmeter::chsh::chsh_values(&b).unwrap();
    assert!((bellmeter::chsh::s_max(&s) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(run(&["quantum", "--theta", "3", "--alice", "0", "--bob", "0"]).code, 1);
}

#[test]
fn simulate_free_model_with_external_settings() {
    let m = trivial_fhv(&Behaviour::uniform(2, 2).unwrap(), Tolerance::default()).unwrap();
    let path = write_temp("fhv.json", &model_to_json(&m));
    let r = run(&[
        "simulate",
        "--model",
        path.to_str().unwrap(),
        "--trials",
        "1000",
        "--seed",
        "4",
        "--settings",
        "uniform",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["free_trials"], 1000);
    let again = run(&[
        "simulate",
        "--model",
        path.to_str().unwrap(),
        "--trials",
        "1000",
        "--seed",
        "4",
        "--settings",
        "uniform",
    ]);
    assert_eq!(again.stdout, r.stdout);
}

#[test]
fn simulate_dilation_with_external_settings_is_refused() {
    let d = run(&["dilate", pr_box_file().to_str().unwrap()]);
    let path = write_temp("dilation.json", &d.stdout);
    let settings = write_temp("settings.json", "[[0.25, 0.25], [0.25, 0.25]]");
    let r = run(&[
        "simulate",
        "--model",
        path.to_str().unwrap(),
        "--trials",
        "10",
        "--seed",
        "1",
        "--settings",
        settings.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 1);
    assert_eq!(r.error_kind(), "config");
    let ok = run(&["simulate", "--model", path.to_str().unwrap(), "--trials", "10", "--seed", "1"]);
    assert_eq!(ok.code, 0);
    assert_eq!(ok.json()["free_trials"], 0);
}

#[test]
fn binary_honours_tolerance_variable() {
    let bin = env!("CARGO_BIN_EXE_bellmeter");
    // a behaviour that is off by 1e-6 in one entry
    let mut probs = PrBox::new(1).unwrap().behaviour().as_slice().to_vec();
    probs[0] += 1e-6;
    probs[1] -= 1e-6;
    let b = Behaviour::new(2, 2, probs).unwrap();
    let path = write_temp("slightly_signalling.json", &behaviour_to_json(&b, None));

    let strict = Command::new(bin).args(["measure", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));

    let loose = Command::new(bin)
        .env("BELLMETER_TOL", "1e-5")
        .args(["measure", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(loose.status.code(), Some(0), "{}", String::from_utf8_lossy(&loose.stderr));

    let flag = Command::new(bin)
        .args(["--tol", "1e-5", "measure", "--method", "formula", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(flag.status.code(), Some(0));

    let usage = Command::new(bin).arg("nonsense").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}
