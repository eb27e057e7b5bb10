use std::path::PathBuf;

use hls_lab::cli::run;
use serde_json::Value;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hls-lab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hls-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn json_result(text: &str) -> Value {
    let v: Value = serde_json::from_str(text).unwrap();
    assert_eq!(v["tool"], "hls-lab");
    v["result"].clone()
}

#[test]
fn constants_prints_table_then_json() {
    let (code, out, err) = invoke(&["constants", "--n", "4", "--s", "1", "--lmax", "3"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("# hls-lab "));
    let brace = out.find("\n{").unwrap() + 1;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(&out.as_bytes()[..brace]);
    assert_eq!(reader.records().count(), 4);
    let tail: Value = serde_json::from_str(&out[brace..]).unwrap();
    let sharp = tail["result"]["S"].as_f64().unwrap();
    assert!((sharp - 10.26039864129491).abs() < 1e-12, "{sharp}");
}

#[test]
fn deficit_of_perturbed_constant() {
    let path = scratch("near.json", r#"{"kind":"zonal-coeffs","n":4,"s":1,"data":[1,0,0.001]}"#);
    let (code, out, err) = invoke(&["deficit", "--input", path.to_str().unwrap(), "--q", "64"]);
    assert_eq!(code, 0, "{err}");
    let d = json_result(&out)["deficit"].as_f64().unwrap();
    assert!(d > 0.0 && d < 1e-6, "{d}");
}

#[test]
fn output_is_deterministic() {
    let path = scratch("det.json", r#"{"kind":"zonal-coeffs","n":5,"s":1,"data":[1,0.02,-0.01,0.004]}"#);
    let args = ["duality-check", "--input", path.to_str().unwrap(), "--q", "64"];
    let (a, b) = (invoke(&args), invoke(&args));
    assert_eq!(a.0, 0, "{}", a.2);
    assert_eq!(a.1, b.1);
    let local = ["local-check", "--n", "20", "--s", "1", "--count", "5", "--seed", "3", "--q", "64"];
    assert_eq!(invoke(&local).1, invoke(&local).1);
}

#[test]
fn output_flag_writes_file() {
    let target = std::env::temp_dir().join(format!("hls-lab-cli-out-{}.txt", std::process::id()));
    let (code, out, _) = invoke(&["constants", "--n", "6", "--s", "1.5", "--output", target.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    assert!(std::fs::read_to_string(&target).unwrap().contains("\"S\""));
    std::fs::remove_file(target).unwrap();
}

#[test]
fn bad_input_exits_two_with_one_line() {
    let path = scratch("bad.json", r#"{"kind":"zonal","n":4,"data":[1]}"#);
    let (code, out, err) = invoke(&["deficit", "--input", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("kind") && err.contains("s: missing"), "{err}");

    let (code, _, err) = invoke(&["constants", "--n", "4"]);
    assert_eq!(code, 2);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");

    let (code, _, _) = invoke(&["constants", "--n", "2", "--s", "1"]);
    assert_eq!(code, 2);

    let (code, _, _) = invoke(&["deficit", "--input", "/nonexistent/profile.json"]);
    assert_eq!(code, 2);
}

#[test]
fn passing_and_failing_checks_set_exit_code() {
    let (code, out, _) = invoke(&["certify-scalar", "--points", "2000", "--p-values", "5"]);
    assert_eq!(code, 0);
    assert_eq!(json_result(&out)["certified"], true);
    // one step cannot bring a far start within the residual target
    let path = scratch("far.json", r#"{"kind":"zonal-coeffs","n":4,"s":1,"data":[1,0,0.4,0,0.2]}"#);
    let (code, out, err) = invoke(&["flow", "--input", path.to_str().unwrap(), "--iters", "1", "--q", "64"]);
    assert_eq!(code, 1, "{err}");
    assert!(out.starts_with("# hls-lab "));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(invoke(&["--help"]).0, 0);
    let (code, out, _) = invoke(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}
