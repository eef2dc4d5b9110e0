use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rgax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgax"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rgax(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn pllm_with_same_seed_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "pllm", "--n", "200", "--seed", "7", "--out", "a.csv"]);
    ok(dir.path(), &["simulate", "pllm", "--n", "200", "--seed", "7", "--out", "b.csv"]);
    ok(dir.path(), &["simulate", "pllm", "--n", "200", "--seed", "8", "--out", "c.csv"]);
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert!(dir.path().join("a.csv.manifest.json").exists());
}

#[test]
fn adjust_bh_example() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.csv"), "actor,p\na,0.01\nb,0.02\nc,0.03\nd,0.04\n").unwrap();
    let out = ok(dir.path(), &["adjust", "--pvalues", "p.csv", "--method", "bh"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "actor,p,p_adjusted\na,0.01,0.04\nb,0.02,0.04\nc,0.03,0.04\nd,0.04,0.04\n");
}

#[test]
fn usage_and_data_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| rgax(d, args).status.code();
    assert_eq!(code(&["train-outcome", "--events", "x.csv", "--family", "nope", "--out", "m.json"]), Some(2));
    fs::write(d.join("p.csv"), "p\n0.5\n").unwrap();
    assert_eq!(code(&["adjust", "--pvalues", "p.csv", "--method", "bonferroni"]), Some(2));
    assert_eq!(code(&["evaluate", "--events", "missing.csv", "--metric", "gax", "--train", "--out", "e"]), Some(3));

    ok(d, &["simulate", "league", "--matches", "60", "--out", "m.csv"]);
    let out = rgax(d, &["team-strength", "--matches", "m.csv", "--asof", "2019-01-01", "--out", "t"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("after the reference date"));
}

#[test]
fn team_strength_writes_default_period() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "league", "--matches", "200", "--seed", "3", "--out", "m.csv"]);
    ok(dir.path(), &["team-strength", "--matches", "m.csv", "--out", "t"]);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("t/strengths.json")).unwrap()).unwrap();
    assert_eq!(json["period_days"], 500.0);
    assert_eq!(json["att"].as_object().unwrap().len(), 6);
    assert!(dir.path().join("t/strengths.csv").exists());
    assert!(dir.path().join("t/manifest.json").exists());
}

#[test]
fn evaluate_writes_all_artifacts_and_plots_regenerate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "pllm", "--n", "400", "--seed", "1", "--out", "shots.csv"]);
    ok(
        d,
        &[
            "evaluate", "--events", "shots.csv", "--discipline", "shot", "--features", "z1,z2,z3", "--metric", "gax", "--train",
            "--outcome-family", "logistic", "--propensity", "logistic", "--out", "gax",
        ],
    );
    for f in ["report.json", "report.csv", "scatter.csv", "intervals.csv", "scatter.svg", "intervals.svg", "manifest.json", "outcome-model.json"] {
        assert!(d.join("gax").join(f).exists(), "{f} missing");
    }
    ok(d, &["plot", "scatter", "--data", "gax/scatter.csv", "--out", "again.svg"]);
    assert_eq!(fs::read(d.join("gax/scatter.svg")).unwrap(), fs::read(d.join("again.svg")).unwrap());
    ok(d, &["plot", "intervals", "--data", "gax/intervals.csv", "--out", "again-int.svg"]);
    assert_eq!(fs::read(d.join("gax/intervals.svg")).unwrap(), fs::read(d.join("again-int.svg")).unwrap());

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(d.join("gax/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn gsax_flips_the_sign_of_gax() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // every shot on target, so the same rows feed both metrics
    let mut csv = String::from("outcome,actor_id,on_target,dist\n");
    for i in 0..120 {
        let dist = 5.0 + (i * 7 % 23) as f64;
        let goal = u8::from((i * 13) % 5 < 2);
        csv.push_str(&format!("{goal},k{},true,{dist}\n", i % 3));
    }
    fs::write(d.join("ot.csv"), csv).unwrap();
    let common = [
        "--events", "ot.csv", "--discipline", "shot-on-target", "--features", "dist", "--train", "--outcome-family", "logistic",
        "--propensity", "logistic",
    ];
    let run = |metric: &str, out: &str| {
        let mut args = vec!["evaluate", "--metric", metric, "--out", out];
        args.extend(common);
        ok(d, &args);
        let r: serde_json::Value = serde_json::from_slice(&fs::read(d.join(out).join("report.json")).unwrap()).unwrap();
        let mut v: Vec<(String, f64)> = r["actors"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| (a["actor_id"].as_str().unwrap().to_string(), a["classical"].as_f64().unwrap()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let gax = run("gax", "g");
    let gsax = run("gsax", "k");
    assert_eq!(gax.len(), 3);
    for ((a, x), (b, y)) in gax.iter().zip(&gsax) {
        assert_eq!(a, b);
        assert_eq!(*x, -*y);
    }
}
