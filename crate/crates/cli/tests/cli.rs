use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn matchbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchbox")).args(args).env_remove("MATCHBOX_CACHE_DIR").output().unwrap()
}

fn run(args: &[&str]) -> (i32, String) {
    let out = matchbox(args);
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn closing_pair_in_text() {
    let (code, out) = run(&["classify", s(&spec("circle-2-3.json")), s(&spec("circle-gap.json")), "--format", "text"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "homeomorphic=yes lipschitz=no (exact)");
}

#[test]
fn json_reports_carry_schema_and_params() {
    let (code, out) = run(&["classify", s(&spec("circle-2-3.json")), s(&spec("circle-3-2.json")), "--seed", "7"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "matchbox.report.classify/1");
    assert_eq!(v["params"]["seed"], 7);
    assert_eq!(v["params"]["horizon"], 64);
    assert_eq!(v["report"]["verdict"], "homeomorphic=yes lipschitz=yes D=1");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // a bare finite prefix carries no rule, so the verdict stays open
    let finite = dir.path().join("finite.json");
    std::fs::write(&finite, r#"{"schema":"matchbox.presentation/1","base":"S1","degrees":{"prefix":[2,3,2,2,2,2]}}"#).unwrap();
    let (code, out) = run(&["classify", s(&finite), s(&spec("circle-2.json")), "--format", "text"]);
    assert_eq!(code, 2);
    assert!(out.contains("inconclusive"));

    assert_eq!(run(&["classify", "missing.json", s(&spec("circle-2.json"))]).0, 1);
    assert_eq!(run(&["entropy", s(&spec("odometer-small.json"))]).0, 1);
    assert_eq!(run(&["treespace", "2"]).0, 1);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert_eq!(run(&["fuse", s(&broken)]).0, 1);
    // a failed doubling check is still a decided answer
    assert_eq!(run(&["doubling", s(&spec("treespace.json")), "--depth", "4"]).0, 0);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cases: Vec<Vec<String>> = vec![
        vec!["classify".into(), s(&spec("circle-2-3.json")).into(), s(&spec("circle-gap.json")).into()],
        vec!["entropy".into(), s(&spec("sturmian.json")).into(), "--epsilon".into(), "1/2,1/6".into(), "--ell".into(), "0..4".into()],
        vec!["fuse".into(), s(&spec("fusion-odometers.json")).into()],
        vec!["treespace".into(), "2".into(), "3".into()],
        vec!["dimension".into(), s(&spec("dyadic-fiber.json")).into(), "--format".into(), "csv".into()],
        vec!["audit".into(), s(&spec("odometer-small.json")).into(), "--alpha".into(), "3".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = matchbox(&args);
        let b = matchbox(&args);
        assert!(a.status.success(), "{args:?}");
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn fused_spec_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let fused = dir.path().join("fused.json");
    let (code, _) = run(&["fuse", s(&spec("fusion-odometers.json")), "--out", s(&fused)]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&fused).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema"], "matchbox.pseudogroup/1");
    // re-parsing the emitted spec gives the same report twice over
    let first = run(&["audit", s(&fused), "--alpha", "2"]);
    let copy = dir.path().join("copy.json");
    std::fs::write(&copy, &text).unwrap();
    let second = run(&["audit", s(&copy), "--alpha", "2"]);
    assert_eq!(first.0, 0);
    let strip = |o: &str| {
        let mut v: Value = serde_json::from_str(o).unwrap();
        v["params"]["spec"] = Value::Null;
        v
    };
    assert_eq!(strip(&first.1), strip(&second.1));
    assert_eq!(strip(&first.1)["report"]["violations"], 0);
}

#[test]
fn csv_headers() {
    let header = |args: &[&str]| run(args).1.lines().next().unwrap_or_default().to_string();
    assert_eq!(header(&["treespace", "2", "2", "--format", "csv"]), "k,count,dimension_slope");
    assert_eq!(header(&["dimension", s(&spec("dyadic-fiber.json")), "--format", "csv"]), "scale,count");
    assert_eq!(
        header(&["entropy", s(&spec("odometer-small.json")), "--epsilon", "1/2", "--ell", "2", "--format", "csv"]),
        "epsilon,ell,count,mode"
    );
    assert_eq!(
        header(&["audit", s(&spec("odometer-small.json")), "--alpha", "1", "--format", "csv"]),
        "word,length,pairs,distortion,bound,violations"
    );
}

#[test]
fn treespace_radius_one_counts_eleven() {
    let (code, out) = run(&["treespace", "2", "1", "--format", "csv"]);
    assert_eq!(code, 0);
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("1,11,"), "{row}");
    let slope: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((slope - 11f64.log2()).abs() < 1e-9);
}

#[test]
fn dimension_of_the_dyadic_fiber() {
    let (code, out) = run(&["dimension", s(&spec("dyadic-fiber.json"))]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let slope = v["report"]["slope"].as_f64().unwrap();
    assert!((slope - 2f64.ln() / 3f64.ln()).abs() < 0.02, "{slope}");
}

#[test]
fn enumeration_cache_is_used_on_the_second_run() {
    let dir = tempfile::tempdir().unwrap();
    let go = || {
        Command::new(env!("CARGO_BIN_EXE_matchbox"))
            .args(["treespace", "2", "2"])
            .env("MATCHBOX_CACHE_DIR", dir.path())
            .output()
            .unwrap()
    };
    let first: Value = serde_json::from_slice(&go().stdout).unwrap();
    let file = dir.path().join("treespace-n2-k2.json");
    assert!(file.exists());
    let cached: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(cached["schema"], "matchbox.treespace-cache/1");
    let second: Value = serde_json::from_slice(&go().stdout).unwrap();
    let sources = |v: &Value| -> Vec<(u64, String)> {
        v["report"]["enumeration"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["count"].as_u64().unwrap(), e["source"].as_str().unwrap().to_string()))
            .collect()
    };
    let (a, b) = (sources(&first), sources(&second));
    assert_eq!(a.iter().map(|x| x.0).collect::<Vec<_>>(), b.iter().map(|x| x.0).collect::<Vec<_>>());
    assert!(b.iter().any(|x| x.1 == "cache"));
    assert!(a.iter().all(|x| x.1 != "cache"));
}
