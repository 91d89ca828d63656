use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rmdp_geometry::builtin;
use rmdp_geometry::instance::Instance;
use rmdp_geometry::rmdp::{SRectangularSet, UncertaintySet};
use rmdp_geometry::{evaluate_policy, Mdp};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmdp-geo"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/appendix_a/{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn evaluate_matches_library_bit_for_bit() {
    let out = json(&run(&["evaluate", "--instance", p(&fixture("fig2"))]));
    let lib = evaluate_policy(&builtin::fig2(), &builtin::fig2_policy()).unwrap();
    let got = floats(&out["value"]);
    assert_eq!(got.len(), 2);
    for (a, b) in got.iter().zip(lib.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert!(out.get("worst_kernel").is_none());
}

#[test]
fn robust_evaluation_reports_worst_kernel() {
    let out = json(&run(&["evaluate", "--instance", p(&fixture("fig6"))]));
    assert_eq!(out["worst_kernel"].as_array().unwrap().len(), 2);
    assert!(out["iterations"].as_u64().unwrap() > 0);
}

#[test]
fn missing_policy_names_the_flag() {
    let o = run(&["evaluate", "--instance", p(&fixture("fig11b"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("--policy"));
    assert!(o.stdout.is_empty());
}

#[test]
fn policy_flag_overrides_and_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "pi.json", "[[1, 0], [0, 1]]");
    let out = json(&run(&[
        "evaluate",
        "--instance",
        p(&fixture("fig11b")),
        "--policy",
        p(&good),
    ]));
    assert_eq!(floats(&out["value"]).len(), 2);
    let short = write(dir.path(), "short.json", "[[1, 0]]");
    assert_eq!(
        code(&run(&[
            "evaluate",
            "--instance",
            p(&fixture("fig11b")),
            "--policy",
            p(&short)
        ])),
        3
    );
    let bad = write(dir.path(), "bad.json", "[[0.7, 0.7], [0, 1]]");
    assert_eq!(
        code(&run(&[
            "evaluate",
            "--instance",
            p(&fixture("fig11b")),
            "--policy",
            p(&bad)
        ])),
        2
    );
}

#[test]
fn singleton_set_prints_the_plain_output() {
    let m: Mdp = builtin::fig2();
    let plain = Instance::from_mdp(m.clone()).with_policy(builtin::fig2_policy());
    let single = Instance::with_uncertainty(&m, UncertaintySet::S(SRectangularSet::singleton(&m)))
        .unwrap()
        .with_policy(builtin::fig2_policy());
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "plain.json", &plain.to_json());
    let b = write(dir.path(), "single.json", &single.to_json());
    let oa = run(&["evaluate", "--instance", p(&a)]);
    let ob = run(&["evaluate", "--instance", p(&b)]);
    assert_eq!(code(&oa), 0);
    assert_eq!(oa.stdout, ob.stdout);
}

#[test]
fn parse_errors_exit_2_and_shape_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let syntax = write(
        dir.path(),
        "s.json",
        "{\n  \"states\": 2,\n  \"actions\": \n}",
    );
    let o = run(&["evaluate", "--instance", p(&syntax)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"states":1,"actions":1,"gamma":0.5,"rewards":[[1]],"kernel":[[[1]]],"extra":1}"#,
    );
    assert_eq!(code(&run(&["evaluate", "--instance", p(&unknown)])), 2);

    let shape = write(
        dir.path(),
        "sh.json",
        r#"{"states":2,"actions":1,"gamma":0.5,"rewards":[[1]],"kernel":[[[1, 0]], [[0, 1]]]}"#,
    );
    let o = run(&["evaluate", "--instance", p(&shape)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("rewards"));

    assert_eq!(
        code(&run(&["evaluate", "--instance", "/nonexistent/x.json"])),
        2
    );
    assert_eq!(code(&run(&["evaluate"])), 3);
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn membership_of_value_and_far_point() {
    let v = json(&run(&["evaluate", "--instance", p(&fixture("fig6"))]));
    let x = floats(&v["value"]);
    let point = format!("{:.17e},{:.17e}", x[0], x[1]);
    let rep = json(&run(&[
        "membership",
        "--instance",
        p(&fixture("fig6")),
        "--point",
        &point,
        "--tol",
        "1e-8",
    ]));
    assert_eq!(rep["verdict"], Value::Bool(true));

    let rep = json(&run(&[
        "membership",
        "--instance",
        p(&fixture("fig2")),
        "--point",
        "100,-100",
    ]));
    assert_eq!(rep["verdict"], Value::Bool(false));
    let states = rep["per_state"].as_array().unwrap();
    assert!(states
        .iter()
        .any(|c| c["plus_side"] == Value::Bool(false) || c["minus_side"] == Value::Bool(false)));

    assert_eq!(
        code(&run(&[
            "membership",
            "--instance",
            p(&fixture("fig2")),
            "--point",
            "1,2,3"
        ])),
        3
    );
    assert_eq!(
        code(&run(&[
            "membership",
            "--instance",
            p(&fixture("fig2")),
            "--point",
            "1,x"
        ])),
        3
    );
}

#[test]
fn membership_agrees_with_the_rendered_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig6");
    json(&run(&[
        "render",
        "--instance",
        p(&fixture("fig6")),
        "--figure",
        "fig6",
        "--out",
        p(&out),
        "--grid",
        "40",
        "--samples",
        "50",
    ]));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    let mut members = 0;
    for line in grid.lines().skip(1).step_by(7) {
        let f: Vec<&str> = line.split(',').collect();
        let point = format!("{},{}", f[0], f[1]);
        let rep = json(&run(&[
            "membership",
            "--instance",
            p(&fixture("fig6")),
            "--point",
            &point,
        ]));
        let expected = f[2] == "1";
        members += usize::from(expected);
        assert_eq!(rep["verdict"], Value::Bool(expected), "{line}");
    }
    assert!(members > 0);
}

#[test]
fn reduce_removes_the_midpoint_kernel() {
    let (m, u) = builtin::fig5();
    let cands = u.candidates(0);
    let mid: Vec<Vec<f64>> = cands[0]
        .iter()
        .zip(&cands[1])
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * x + 0.5 * y).collect())
        .collect();
    let aug = u.with_extra_candidate(0, mid).unwrap();
    let inst = Instance::with_uncertainty(&m, UncertaintySet::S(aug))
        .unwrap()
        .with_policy(builtin::fig4_policy());
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.json", &inst.to_json());
    let reduced_path = dir.path().join("out.json");
    let rep = json(&run(&[
        "reduce",
        "--instance",
        p(&input),
        "--out",
        p(&reduced_path),
    ]));
    let removed = rep["groups"][0]["removed"].as_array().unwrap();
    assert_eq!(removed.len(), 1);
    assert_eq!(removed[0]["index"], 4);
    let w: Vec<(u64, f64)> = removed[0]["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_u64().unwrap(), p[1].as_f64().unwrap()))
        .collect();
    let (w0, w1) = (
        w.iter().find(|p| p.0 == 0).unwrap().1,
        w.iter().find(|p| p.0 == 1).unwrap().1,
    );
    assert!((w0 - 0.5).abs() < 1e-9 && (w1 - 0.5).abs() < 1e-9, "{w:?}");

    let reduced = Instance::read(&reduced_path).unwrap();
    assert_eq!(reduced.s_rectangular(64).unwrap().candidates(0).len(), 4);
    assert_eq!(reduced.policy, inst.policy);
    let before = json(&run(&["evaluate", "--instance", p(&input)]));
    let after = json(&run(&["evaluate", "--instance", p(&reduced_path)]));
    for (a, b) in floats(&before["value"]).iter().zip(floats(&after["value"])) {
        assert!((a - b).abs() <= 1e-8);
    }

    let o = run(&[
        "reduce",
        "--instance",
        p(&fixture("fig2")),
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn verify_exit_codes() {
    let o = run(&["verify", "--instances", "0"]);
    let rep = json(&o);
    assert_eq!(rep["all_passed"], Value::Bool(true));
    assert!(rep["failures"].as_array().unwrap().is_empty());

    let rep = json(&run(&["verify", "--instances", "5", "--seed", "11"]));
    assert_eq!(rep["config"]["seed"], 11);

    let o = run(&[
        "verify",
        "--instances",
        "3",
        "--inject-failure",
        "region_bounds_chain",
    ]);
    assert_eq!(code(&o), 1);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failures = rep["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 3);
    assert!(failures.iter().all(|f| f["check"] == "region_bounds_chain"));
    // each failure carries an instance in the input format
    let inst = serde_json::to_string(&failures[0]["instance"]).unwrap();
    assert!(Instance::parse(&inst).is_ok());
    assert!(stderr(&o).contains("FAIL region_bounds_chain"));

    assert_eq!(
        code(&run(&[
            "verify",
            "--inject-failure",
            "nope",
            "--instances",
            "1"
        ])),
        3
    );
    assert_eq!(code(&run(&["verify", "--suite", "/nonexistent.json"])), 3);
}

#[test]
fn verify_reads_a_suite_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "suite.json",
        r#"{"seed": 3, "num_instances": 2, "checks": ["reduction_idempotent"]}"#,
    );
    let rep = json(&run(&["verify", "--suite", p(&cfg)]));
    assert_eq!(rep["checks"].as_array().unwrap().len(), 1);
    assert_eq!(rep["checks"][0]["trials"], 2);
}

#[test]
fn render_errors_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "render",
        "--instance",
        p(&fixture("fig1b")),
        "--figure",
        "fig3",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 3);
    let o = run(&[
        "render",
        "--instance",
        p(&fixture("fig2")),
        "--figure",
        "fig99",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 3);

    let out = dir.path().join("fig11");
    let summary = json(&run(&[
        "render",
        "--instance",
        p(&fixture("fig11b")),
        "--figure",
        "fig11",
        "--out",
        p(&out),
        "--grid",
        "60",
        "--samples",
        "100",
    ]));
    assert!(summary["star"]["star_centers"]
        .as_array()
        .unwrap()
        .is_empty());
    let prims = std::fs::read_to_string(out.join("primitives.csv")).unwrap();
    assert!(prims.starts_with("kind,state,index,x1,y1,x2,y2\n"));
    assert!(prims.lines().any(|l| l.starts_with("witness,")));
    let points = std::fs::read_to_string(out.join("points.csv")).unwrap();
    assert!(points.starts_with("v1,v2,policy_id\n"));
    assert_eq!(points.lines().count(), 101);
    assert!(!points.contains('\r'));
}
