use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relcert"))
        .args(args)
        .current_dir(fixture(""))
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let out = run(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn standing_example_report() {
    let v = json(&["analyze", "problems/standing.json"]);
    let r = &v["result"];
    assert_eq!(r["classes"][0]["states"], serde_json::json!(["00", "01"]));
    assert_eq!(r["classes"][1]["states"], serde_json::json!(["10", "11"]));
    assert_eq!(r["relevant"], serde_json::json!([0]));
    assert_eq!(r["srank"], 1);
    assert_eq!(r["bound_holds"], true);
}

#[test]
fn constant_problem_has_no_relevant_coordinates() {
    let out = run(&["analyze", "problems/constant.json"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("empty set sufficient; all coordinates irrelevant"));
}

#[test]
fn dominant_pair_relevance() {
    let v = json(&["analyze", "slices/dominant-pair.json"]);
    assert_eq!(v["result"]["relevant"], serde_json::json!([0, 1]));
}

#[test]
fn machine_output_is_stamped() {
    let v = json(&["taxonomy", "--seed", "17"]);
    assert_eq!(v["version"], format!("relcert {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(v["command"], "taxonomy");
    assert_eq!(v["seed"], 17);
    assert_eq!(v["result"]["integrity"]["rows"], 15);
}

#[test]
fn golden_outputs() {
    let cases: [(&[&str], &str); 5] = [
        (&["analyze", "problems/standing.json"], "golden/analyze-standing.json"),
        (&["graph", "slices/dominant-pair.json"], "golden/graph-dominant-pair.json"),
        (&["transform", "slices/dominant-pair.json", "traces/orbit-affine.json"], "golden/transform-orbit.json"),
        (&["taxonomy"], "golden/taxonomy.json"),
        (&["reduce", "induce", "specs/pac.json"], "golden/induce-pac.json"),
    ];
    for (args, golden) in cases {
        let mut full = args.to_vec();
        full.extend(["--format", "json"]);
        let out = run(&full);
        assert_eq!(code(&out), 0);
        let want = std::fs::read_to_string(fixture(golden)).unwrap();
        assert_eq!(stdout(&out), want, "{golden}");
    }
}

#[test]
fn dot_export_has_only_the_anchor_edge() {
    let out = run(&["graph", "slices/dominant-pair.json", "--mode", "raw"]);
    let dot = stdout(&out);
    assert!(dot.starts_with("graph interaction {"));
    let edges: Vec<&str> = dot.lines().filter(|l| l.contains("--")).collect();
    assert_eq!(edges, vec!["  0 -- 1 [label=\"2/1\"];"]);
}

#[test]
fn orbit_transform_reports_invariance() {
    let v = json(&["transform", "slices/dominant-pair.json", "traces/orbit-affine.json"]);
    let obj = &v["result"]["object"];
    assert_eq!(obj["coeffs"]["a"]["pairs"]["1,2"][1][1], "3/1");
    assert_eq!(obj["coeffs"]["b"]["pairs"]["1,2"][1][1], "3/1");
    assert_eq!(v["result"]["invariance"]["subsets_checked"], 8);
}

#[test]
fn witnesses_match_golden_bundles_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["dominant_pair", "margin_bounded", "ghost_action", "offset_signature"] {
        for n in ["3", "4"] {
            let path = dir.path().join(format!("{kind}-{n}.json"));
            let out = run(&["witness", kind, n, "--out", path.to_str().unwrap()]);
            assert_eq!(code(&out), 0);
            let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let golden: Value = serde_json::from_str(
                &std::fs::read_to_string(fixture(&format!("bundles/{}-{n}.json", kind.replace('_', "-")))).unwrap(),
            )
            .unwrap();
            assert_eq!(written["result"], golden, "{kind} {n}");
            let out = run(&["verify", path.to_str().unwrap()]);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            assert!(stdout(&out).contains("bundle verified"));
        }
    }
}

#[test]
fn tampered_bundles_name_the_failed_invariant() {
    let out = run(&["verify", "invalid/tampered-report.json"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("report:"));
    let out = run(&["verify", "invalid/tampered-translate.json"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace_replay"));
}

#[test]
fn exit_codes_for_injected_failures() {
    let cases: [(&[&str], i32); 7] = [
        (&["analyze", "invalid/malformed.json"], 1),
        (&["analyze", "invalid/bad-rational.json"], 1),
        (&["analyze", "invalid/bad-pair-key.json"], 1),
        (&["analyze", "invalid/large.json", "--budget", "1000"], 2),
        (&["transform", "slices/dominant-pair.json", "traces/duplicate-state.json"], 1),
        (&["verify", "invalid/tampered-report.json"], 4),
        (&["no-such-command"], 1),
    ];
    for (args, want) in cases {
        assert_eq!(code(&run(args)), want, "{args:?}");
    }
    assert_eq!(code(&run(&["analyze", "invalid/large.json"])), 0);
}

#[test]
fn parse_errors_carry_position() {
    let err = String::from_utf8(run(&["analyze", "invalid/malformed.json"]).stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    let err = String::from_utf8(run(&["analyze", "invalid/bad-pair-key.json"]).stderr).unwrap();
    assert!(err.contains("coeffs.a.pairs"), "{err}");
}

#[test]
fn falsify_emits_a_verified_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("found.json");
    let v = json(&["falsify", "margin_bounded", "--out", path.to_str().unwrap()]);
    assert!(v["result"]["bundle"].is_object());
    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
}

#[test]
fn falsify_echoes_the_effective_seed() {
    let v = json(&["falsify", "schemes/two-pair-edge.json", "--config", "search/default.json"]);
    assert_eq!(v["seed"], 0);
    let v = json(&["falsify", "schemes/two-pair-edge.json", "--seed", "9"]);
    assert_eq!(v["seed"], 9);
}

#[test]
fn machine_output_is_byte_deterministic() {
    let cases: [&[&str]; 4] = [
        &["falsify", "schemes/two-pair-edge.json", "--seed", "5", "--format", "json"],
        &["witness", "ghost_action", "4", "--format", "json"],
        &["transform", "slices/path.json", "traces/mixed.json", "--format", "json"],
        &["taxonomy", "--detect", "slices/path.json", "--format", "json"],
    ];
    for args in cases {
        assert_eq!(run(args).stdout, run(args).stdout, "{args:?}");
    }
}

#[test]
fn classify_and_taxonomy() {
    assert_eq!(stdout(&run(&["classify", "dominant_pair", "slices/dominant-pair.json"])), "true\n");
    assert_eq!(stdout(&run(&["classify", "schemes/constant-false.json", "slices/path.json"])), "false\n");
    assert_eq!(stdout(&run(&["classify", "schemes/constant-true.json", "slices/path.json"])), "true\n");
    let v = json(&["taxonomy", "--detect", "slices/path.json"]);
    assert_eq!(v["result"]["detection"]["roles"], serde_json::json!(["core"]));
    let v = json(&["taxonomy", "--detect", "problems/constant.json"]);
    let skipped = v["result"]["detection"]["skipped"].as_array().unwrap().len();
    assert_eq!(skipped, 3);
}

#[test]
fn stability_certifies_small_perturbations_only() {
    let v = json(&["stability", "stability/base.json", "stability/perturbed.json", "--witness", "stability/witness.json"]);
    assert_eq!(v["result"]["certificate"]["verdict"], "certified");
    assert_eq!(v["result"]["witness_preserved"], true);
    let v = json(&["stability", "stability/base.json", "stability/far.json"]);
    assert_eq!(v["result"]["certificate"]["verdict"], "refused");
}

#[test]
fn reductions() {
    let v = json(&["reduce", "compress", "problems/duplicates.json"]);
    assert_eq!(v["result"]["classes"], serde_json::json!([["a", "c"], ["b", "d"]]));
    let v = json(&["reduce", "induce", "specs/partial.json"]);
    assert_eq!(v["result"]["transfer"]["totalized"], true);
    let v = json(&["reduce", "bits", "problems/duplicates.json"]);
    assert_eq!(v["result"]["padding"], serde_json::json!([6, 7]));
}

#[test]
fn outputs_feed_back_as_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let out = run(&["reduce", "induce", "specs/pac.json", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    // The stamped result wraps two documents, so only the problem is re-read.
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let problem = dir.path().join("p.json");
    std::fs::write(&problem, v["result"]["problem"].to_string()).unwrap();
    let a = json(&["analyze", problem.to_str().unwrap()]);
    assert_eq!(a["result"]["relevant"], serde_json::json!([1]));
}
