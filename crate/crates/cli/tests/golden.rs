use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(sub)
}

fn run(args: &[&str]) -> (String, i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_finspace"))
        .args(args)
        .current_dir(dir("fixtures"))
        .output()
        .expect("binary runs");
    (
        String::from_utf8(out.stdout).unwrap(),
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn cases() -> Vec<(String, Vec<String>)> {
    fs::read_to_string(dir("golden").join("cases.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut words = l.split_whitespace().map(str::to_string);
            (words.next().unwrap(), words.collect())
        })
        .collect()
}

#[test]
fn outputs_match_golden_files() {
    let mut failures = Vec::new();
    for (name, args) in cases() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (out, code, err) = run(&args);
        let got = format!("{}\n[exit {code}]\n{}\n", out.trim_end_matches('\n'), err.trim_end_matches('\n'));
        let want = fs::read_to_string(dir("golden").join(format!("{name}.out"))).unwrap();
        if got != want {
            failures.push(format!("{name}:\n--- want\n{want}--- got\n{got}"));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn every_subcommand_has_a_golden_case() {
    let used: Vec<String> = cases().into_iter().map(|(_, a)| a[0].clone()).collect();
    for sub in [
        "validate",
        "cohomology",
        "check",
        "morphism-check",
        "stein",
        "product",
        "model",
        "spec-export",
        "core",
    ] {
        assert!(used.iter().any(|u| u == sub), "no golden case for {sub}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    for args in [
        &["cohomology", "dl.json", "--format", "json"][..],
        &["check", "semi-separated", "p1.json"],
        &["spec-export", "dl.json"],
    ] {
        assert_eq!(run(args), run(args));
    }
}

#[test]
fn output_file_holds_the_json_result() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("scheme.json");
    let (_, code, _) = run(&["spec-export", "dl.json", "-o", target.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["is_scheme"], false);
    assert_eq!(v["global_sections"]["poles"], serde_json::json!(["inf"]));

    let model = tmp.path().join("model.json");
    let (_, code, _) = run(&["model", "p1_carrier.json", "cover_two_charts.json", "-o", model.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    // the model is itself a valid space document
    let space = tmp.path().join("space.json");
    fs::write(&space, serde_json::to_string(&v["space"]).unwrap()).unwrap();
    let (out, code, _) = run(&["check", "affine", space.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
}

#[test]
fn usage_errors_exit_with_input_error() {
    let (_, code, _) = run(&["check", "nonsense", "dl.json"]);
    assert_eq!(code, 3);
    let (_, code, _) = run(&["cohomology", "dl.json", "--degree", "x"]);
    assert_eq!(code, 3);
}
