//! End-to-end tests of the binary: schemas, exit codes, reproducibility.

use serde_json::{json, Value};
use std::io::Write;
use std::process::{Command, Output};

fn hsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout parses as JSON")
}

fn write_temp(content: &Value) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "{content}").unwrap();
    f
}

#[test]
fn lens_rank_table() {
    let out = json_stdout(&hsi(&["lens", "5", "1", "--class", "0"]));
    assert_eq!(out["total_rank"], 5);
    assert_eq!(out["census"]["perturbed_count"], 5);
}

#[test]
fn lens_domain_errors_exit_1() {
    let out = hsi(&["lens", "4", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gcd"));
    // odd p admits no nonzero mod-2 class
    let out = hsi(&["lens", "5", "1", "--class", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_exit_2() {
    let out = hsi(&["lens", "not-a-number", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), "{ not json").unwrap();
    let out = hsi(&["euler", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn s2s1_table() {
    let out = json_stdout(&hsi(&["s2s1"]));
    assert_eq!(out["total_rank"], 2);
    let out = json_stdout(&hsi(&["s2s1", "--class", "1"]));
    assert_eq!(out["total_rank"], 0);
}

#[test]
fn connsum_of_lens_spaces() {
    let f = write_temp(&json!([
        {"family": "lens", "p": 2, "q": 1, "class": 0},
        {"family": "lens", "p": 3, "q": 1, "class": 0},
    ]));
    let out = json_stdout(&hsi(&["connsum", f.path().to_str().unwrap()]));
    assert_eq!(out["total_rank"], 6);
}

#[test]
fn euler_of_matrix() {
    let f = write_temp(&json!([[2, 0], [0, 3]]));
    let out = json_stdout(&hsi(&["euler", f.path().to_str().unwrap()]));
    assert_eq!(out["euler"], 6);
    assert_eq!(out["h1_order"], 6);
    let f = write_temp(&json!([[0]]));
    let out = json_stdout(&hsi(&["euler", f.path().to_str().unwrap()]));
    assert_eq!(out["euler"], 0);
    assert_eq!(out["h1_order"], "infinite");
}

#[test]
fn plumbing_chain() {
    let f = write_temp(&json!({"weights": [2, 2], "edges": [[0, 1]]}));
    let out = json_stdout(&hsi(&["plumbing", f.path().to_str().unwrap()]));
    assert_eq!(out["minimal"], true);
    assert_eq!(out["h1"], 3);
    // degeneration
    let f = write_temp(&json!({"weights": [1, 2, 1], "edges": [[0, 1], [1, 2]]}));
    let out = json_stdout(&hsi(&["plumbing", f.path().to_str().unwrap()]));
    assert_eq!(out["minimal"], false);
}

#[test]
fn qa_certificate() {
    let trefoil = json!({
        "kind": "node",
        "det": 3,
        "children": [
            {"kind": "node", "det": 2, "children": [
                {"kind": "unknot"}, {"kind": "unknot"}
            ]},
            {"kind": "unknot"}
        ]
    });
    let f = write_temp(&trefoil);
    let out = json_stdout(&hsi(&["qa", f.path().to_str().unwrap()]));
    assert_eq!(out["verified"], true);

    let corrupted = json!({
        "kind": "node",
        "det": 3,
        "children": [{"kind": "unknot"}, {"kind": "unknot"}]
    });
    let f = write_temp(&corrupted);
    let out = json_stdout(&hsi(&["qa", f.path().to_str().unwrap()]));
    assert_eq!(out["verified"], false);
    assert!(out["trace"][0].as_str().unwrap().contains("additivity"));
}

#[test]
fn cerf_normalize_word() {
    let word = json!({
        "initial_genus": 1,
        "pieces": [
            {"kind": {"type": "cylinder"}, "source_genus": 1, "class_bits": [false, false]},
            {"kind": {"type": "cylinder"}, "source_genus": 1, "class_bits": [true, false]},
        ]
    });
    let f = write_temp(&word);
    let out = json_stdout(&hsi(&["cerf-normalize", f.path().to_str().unwrap()]));
    assert_eq!(out["pieces"].as_array().unwrap().len(), 1);
    // round-trip: the output re-parses under the same schema
    let f2 = write_temp(&out);
    let again = json_stdout(&hsi(&["cerf-normalize", f2.path().to_str().unwrap()]));
    assert_eq!(again, out);
}

#[test]
fn intersect_census() {
    let out = json_stdout(&hsi(&["intersect", "2", "1", "-1", "1"]));
    assert_eq!(out["n_central"], 0);
    assert_eq!(out["n_spheres"], 1);
    assert_eq!(out["perturbed_count"], 2);
}

#[test]
fn twist_check_is_seed_reproducible() {
    let a = hsi(&["twist-check", "--samples", "40", "--seed", "7"]);
    let b = hsi(&["twist-check", "--samples", "40", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "identical seeds give identical bytes");
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["passed"], true, "{v}");
    let c = hsi(&["twist-check", "--samples", "40", "--seed", "8"]);
    let w: Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_ne!(v["max_flow_residual"], w["max_flow_residual"]);
}

#[test]
fn seed_env_var_is_honored() {
    let with_flag = hsi(&["twist-check", "--samples", "30", "--seed", "11"]);
    let with_env = Command::new(env!("CARGO_BIN_EXE_hsi"))
        .args(["twist-check", "--samples", "30"])
        .env("HSI_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(with_flag.stdout, with_env.stdout);
}

#[test]
fn compose_output_reparses() {
    let identity = json!({
        "source_genus": 1,
        "target_genus": 1,
        "pre": {"images": [{"sign": 1, "word": [1]}, {"sign": 1, "word": [2]}], "rotation": 0.0},
        "op": {"kind": "none"},
        "post": {"images": [{"sign": 1, "word": [1]}, {"sign": 1, "word": [2]}], "rotation": 0.0}
    });
    let f1 = write_temp(&identity);
    let f2 = write_temp(&identity);
    let out = json_stdout(&hsi(&[
        "compose",
        f1.path().to_str().unwrap(),
        f2.path().to_str().unwrap(),
    ]));
    // feed the output straight back in
    let f3 = write_temp(&out);
    let again = json_stdout(&hsi(&[
        "compose",
        f3.path().to_str().unwrap(),
        f1.path().to_str().unwrap(),
    ]));
    assert_eq!(again, out);
}

#[test]
fn twist_check_accepts_profile_files() {
    let prof = json!({"family": "cosine", "lambda": 0.4});
    let f = write_temp(&prof);
    let out = json_stdout(&hsi(&[
        "twist-check",
        "--samples",
        "30",
        "--profile",
        f.path().to_str().unwrap(),
    ]));
    assert_eq!(out["passed"], true, "{out}");
}

#[test]
fn compose_correspondences() {
    // two sign-flip graphs compose to their class sum
    let flip = |bits: [bool; 2]| {
        json!({
            "source_genus": 1,
            "target_genus": 1,
            "pre": {
                "images": [
                    {"sign": if bits[1] { -1 } else { 1 }, "word": [1]},
                    {"sign": if bits[0] { -1 } else { 1 }, "word": [2]},
                ],
                "rotation": 0.0
            },
            "op": {"kind": "none"},
            "post": {
                "images": [
                    {"sign": 1, "word": [1]},
                    {"sign": 1, "word": [2]},
                ],
                "rotation": 0.0
            }
        })
    };
    let f1 = write_temp(&flip([true, false]));
    let f2 = write_temp(&flip([true, true]));
    let out = json_stdout(&hsi(&[
        "compose",
        f1.path().to_str().unwrap(),
        f2.path().to_str().unwrap(),
    ]));
    // class sum = [false, true]: flips the first image only
    assert_eq!(out["pre"]["images"][0]["sign"], -1);
    assert_eq!(out["pre"]["images"][1]["sign"], 1);

    // a non-composable pair is a domain error
    let kill = json!({
        "source_genus": 1,
        "target_genus": 0,
        "pre": {"images": [{"sign": 1, "word": [1]}, {"sign": 1, "word": [2]}], "rotation": 0.0},
        "op": {"kind": "attach", "kills": [{"pair": 0, "side": "beta", "sign": 1}]},
        "post": {"images": [], "rotation": 0.0}
    });
    let birth = json!({
        "source_genus": 0,
        "target_genus": 1,
        "pre": {"images": [], "rotation": 0.0},
        "op": {"kind": "birth", "births": [{"pair": 0, "side": "beta", "sign": 1}]},
        "post": {"images": [{"sign": 1, "word": [1]}, {"sign": 1, "word": [2]}], "rotation": 0.0}
    });
    let fk = write_temp(&kill);
    let fb = write_temp(&birth);
    let out = hsi(&[
        "compose",
        fk.path().to_str().unwrap(),
        fb.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
