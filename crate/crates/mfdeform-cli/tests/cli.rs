use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfdeform")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_series(dir: &Path, name: &str, terms: &[(u32, &str)]) {
    let terms: Vec<Value> = terms.iter().map(|(e, c)| serde_json::json!({"exp": [e], "coeff": c})).collect();
    let v = serde_json::json!({"ring": {"kind": "Q"}, "vars": 1, "order": 5, "terms": terms});
    fs::write(dir.join(name), v.to_string()).unwrap();
}

#[test]
fn stabilize_quadratic() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["stabilize", "--poly", "x1^2", "--vars", "1", "--order", "4", "--out", "e.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = read_json(&t.path().join("e.json"));
    assert_eq!(e["basis"], serde_json::json!([[], [1]]));
    assert_eq!(e["matrix"].as_array().unwrap().len(), 2);
    assert_eq!(e["verification"]["squifferential"], "pass");
    assert_eq!(e["window"]["order"], 4);
    assert_eq!(e["tool"]["name"], "mfdeform");

    let o = run(t.path(), &["verify", "--factorisation", "e.json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn stabilize_zero_potential_gives_koszul_complex() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["stabilize", "--poly", "0", "--vars", "2", "--order", "3", "--out", "k.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = read_json(&t.path().join("k.json"));
    assert_eq!(e["basis"].as_array().unwrap().len(), 4);
    // d(1) = -x1 v1 - x2 v2: column of the empty subset.
    let col0: Vec<&Value> = e["matrix"].as_array().unwrap().iter().map(|row| &row[0]).collect();
    assert_eq!(col0[1]["terms"][0]["coeff"], "-1");
    assert_eq!(col0[1]["terms"][0]["exp"], serde_json::json!([1, 0]));
}

#[test]
fn linear_term_is_an_input_error() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["stabilize", "--poly", "x1 + x1^2", "--vars", "1", "--order", "4"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("potential not in m^2"));
}

#[test]
fn disc_potential_of_minimal_model_is_w() {
    let t = TempDir::new().unwrap();
    let o = run(
        t.path(),
        &["minimal-model", "--poly", "x1^2 - x1^3 + 2*x1*x2^2", "--vars", "2", "--order", "4", "--arity", "4", "--out", "a.json"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = read_json(&t.path().join("a.json"));
    assert_eq!(a["arity_cap"], 4);
    assert!(a["ops"].as_array().unwrap().iter().all(|op| op["k"].as_u64().unwrap() as usize == op["inputs"].as_array().unwrap().len()));
    let o = run(t.path(), &["disc-potential", "--algebra", "a.json", "--out", "p.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "x1^2 - x1^3 + 2*x1*x2^2 + O(5)");
    let p = read_json(&t.path().join("p.json"));
    assert_eq!(p["terms"].as_array().unwrap().len(), 3);
}

#[test]
fn reports_are_byte_identical() {
    let t = TempDir::new().unwrap();
    for f in ["a.json", "b.json"] {
        let o = run(t.path(), &["minimal-model", "--poly", "x1*x2 + x1^3", "--vars", "2", "--order", "4", "--arity", "5", "--out", f]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(t.path().join("a.json")).unwrap(), fs::read(t.path().join("b.json")).unwrap());
}

#[test]
fn equivalence_verdicts_depend_on_characteristic() {
    let t = TempDir::new().unwrap();
    write_series(t.path(), "laurent.json", &[(2, "1"), (3, "-1"), (4, "1"), (5, "-1")]);
    write_series(t.path(), "xsq.json", &[(2, "1")]);
    for (ring, want, verdict) in [("Q", 0, "FOUND"), ("Fp:3", 0, "FOUND"), ("Fp:2", 1, "NOT-EQUIVALENT")] {
        let args =
            ["equivalent", "--p1", "laurent.json", "--p2", "xsq.json", "--ring", ring, "--d", "1", "--order", "5", "--out", "r.json"];
        let o = run(t.path(), &args);
        assert_eq!(code(&o), want, "{ring}: {}", stdout(&o));
        assert!(stdout(&o).contains(verdict));
        let r = read_json(&t.path().join("r.json"));
        assert_eq!(r["verdict"], verdict);
        assert_eq!(r["witness"].is_null(), verdict != "FOUND");
    }
}

#[test]
fn indeterminate_search_exits_3() {
    let t = TempDir::new().unwrap();
    let p1 = r#"{"ring":{"kind":"Q"},"vars":2,"order":4,"terms":[{"exp":[2,0],"coeff":"1"},{"exp":[0,3],"coeff":"1"},{"exp":[0,4],"coeff":"1"}]}"#;
    let p2 = r#"{"ring":{"kind":"Q"},"vars":2,"order":4,"terms":[{"exp":[2,0],"coeff":"1"},{"exp":[0,3],"coeff":"1"}]}"#;
    fs::write(t.path().join("p1.json"), p1).unwrap();
    fs::write(t.path().join("p2.json"), p2).unwrap();
    let o = run(t.path(), &["equivalent", "--p1", "p1.json", "--p2", "p2.json", "--d", "1"]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("INDETERMINATE"));
}

#[test]
fn verify_reports_first_failing_tuple() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["minimal-model", "--poly", "x1^2 + x2^2", "--vars", "2", "--order", "3", "--arity", "4", "--out", "a.json"]);
    assert_eq!(code(&o), 0);
    let o = run(t.path(), &["verify", "--algebra", "a.json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let mut a = read_json(&t.path().join("a.json"));
    let bad = serde_json::json!({"k": 3, "inputs": [[1], [1], [2]], "output": {"terms": [{"indices": [], "coeff": "1"}]}});
    a["ops"].as_array_mut().unwrap().push(bad);
    fs::write(t.path().join("bad.json"), a.to_string()).unwrap();
    let o = run(t.path(), &["verify", "--algebra", "bad.json", "--out", "v.json"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("first failure: relation at (v1, v1, v1, v2)"), "{}", stdout(&o));
    assert_eq!(read_json(&t.path().join("v.json"))["verdict"], "fail");
}

#[test]
fn non_unital_algebra_is_rejected_on_load() {
    let t = TempDir::new().unwrap();
    let text = r#"{"ring":{"kind":"Q"},"vars":1,"order":3,"arity_cap":3,"ops":[{"k":2,"inputs":[[],[1]],"output":{"terms":[{"indices":[1],"coeff":"2"}]}}]}"#;
    fs::write(t.path().join("a.json"), text).unwrap();
    let o = run(t.path(), &["disc-potential", "--algebra", "a.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("strictly unital"), "{}", stderr(&o));
    let o = run(t.path(), &["verify", "--algebra", "a.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn malformed_inputs_exit_2() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("broken.json"), "{").unwrap();
    assert_eq!(code(&run(t.path(), &["disc-potential", "--algebra", "broken.json"])), 2);
    assert_eq!(code(&run(t.path(), &["disc-potential", "--algebra", "missing.json"])), 2);
    assert_eq!(code(&run(t.path(), &["stabilize", "--poly", "x1^2", "--vars", "1", "--order", "3", "--ring", "Fp:4"])), 2);
    assert_eq!(code(&run(t.path(), &["stabilize", "--poly", "x1^2"])), 2);
    assert_eq!(code(&run(t.path(), &["frobnicate"])), 2);
}

#[test]
fn guard_rails_and_force() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["stabilize", "--poly", "x1^2", "--vars", "7", "--order", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n <= 6"));
    let o = run(t.path(), &["stabilize", "--poly", "x1^2", "--vars", "1", "--order", "13"]);
    assert_eq!(code(&o), 2);
    let o = run(t.path(), &["stabilize", "--poly", "x1^2", "--vars", "1", "--order", "13", "--force"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(t.path(), &["minimal-model", "--poly", "x1^2", "--vars", "1", "--order", "5", "--arity", "4"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("K >= N"));
}

#[test]
fn mirror_and_hochschild_on_quadratic_model() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["minimal-model", "--poly", "x1^2", "--vars", "1", "--order", "4", "--arity", "5", "--out", "a.json"]);
    assert_eq!(code(&o), 0);
    let o = run(t.path(), &["mirror", "--algebra", "a.json", "--out", "m.json"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let m = read_json(&t.path().join("m.json"));
    assert_eq!(m["pipeline"]["verdict"], "pass");
    assert_eq!(m["basis"].as_array().unwrap().len(), 2);

    let o = run(t.path(), &["hochschild", "--algebra", "a.json", "--length", "3", "--out", "h.json"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let h = read_json(&t.path().join("h.json"));
    assert_eq!(h["insertion"]["verdict"], "pass");
    assert_eq!(h["centre_check"], "pass");
    assert_eq!(h["window"]["length"], 3);
}

#[test]
fn hochschild_report_for_cubic() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["hochschild", "--poly", "x1^3", "--vars", "1", "--order", "5", "--out", "h.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let h = read_json(&t.path().join("h.json"));
    assert_eq!(h["certified"]["order"], 4);
    assert_eq!(h["total"], 2);
    assert_eq!(h["centre_check"], "pass");
    let ranks: usize = h["ranks"].as_array().unwrap().iter().map(|r| r["rank"].as_u64().unwrap() as usize).sum();
    assert_eq!(ranks, 2);
    assert_eq!(h["representatives"].as_array().unwrap().len(), 2);
}

#[test]
fn selftest_over_f2() {
    let t = TempDir::new().unwrap();
    let o = run(t.path(), &["selftest", "--ring", "Fp:2", "--seed", "7", "--out", "s.json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("[PASS]").count(), 12);
    let s = read_json(&t.path().join("s.json"));
    assert_eq!(s["rings"], serde_json::json!(["Fp:2"]));
}
