use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adpress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adpress"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = adpress(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn stepwise_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = d.join("corpus");
    let store = d.join("store");
    ok(&[
        "--seed",
        "5",
        "synth",
        "corpus",
        "--pages",
        "1000",
        "--out",
        p(&corpus),
    ]);

    let glob = format!("{}/*.jsonl", corpus.display());
    let out = ok(&["ingest", "--input", &glob, "--store", p(&store)]);
    let stats = String::from_utf8(out.stdout).unwrap();
    assert!(stats.starts_with("source,"), "{stats}");
    assert!(stats.contains("Telegraph"));

    // A second ingest skips everything; without --dedup it says so.
    let again = adpress(&["ingest", "--input", &glob, "--store", p(&store)]);
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("0 editions added"));
    let strict = adpress(&["ingest", "--input", &glob, "--store", p(&store), "--strict"]);
    assert_eq!(strict.status.code(), Some(3));

    let matches = d.join("matches.jsonl");
    ok(&["classify", "--store", p(&store), "--out", p(&matches)]);
    assert!(fs::read_to_string(&matches).unwrap().lines().count() > 0);

    let priced = d.join("priced.csv");
    ok(&["price", "--store", p(&store), "--out", p(&priced)]);
    assert_eq!(
        header(&priced),
        "segment_id,category,area_fraction,scaling_factor,weighted_ad_ratio,cost,unpriceable"
    );

    for kind in [
        "placement",
        "cdf",
        "parity",
        "timeseries",
        "weekday",
        "breakdown",
        "topics",
    ] {
        let out = d.join(format!("{kind}.csv"));
        ok(&[
            "report",
            kind,
            "--store",
            p(&store),
            "--matches",
            p(&matches),
            "--out",
            p(&out),
        ]);
        assert!(!header(&out).is_empty(), "{kind}");
    }

    let panel = d.join("panel.csv");
    ok(&[
        "panel",
        "--store",
        p(&store),
        "--matches",
        p(&matches),
        "--out",
        p(&panel),
    ]);
    assert_eq!(
        header(&panel),
        "entity,source,period,weighted_ad_ratio,sentiment_total,article_count,popularity"
    );

    let result = d.join("result.json");
    ok(&[
        "regress",
        "--panel",
        p(&panel),
        "--dep",
        "count",
        "--fe",
        "both",
        "--out",
        p(&result),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(json["coefficients"][0]["name"], "weighted_ad_ratio");
    assert!(json["intercept"].is_null());
    assert!(json["entity_count"].as_u64().unwrap() > 0);
}

#[test]
fn regress_recovers_planted_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    ok(&[
        "--seed",
        "9",
        "synth",
        "panel",
        "--outcome",
        "count",
        "--beta",
        "0.2232",
        "--entities",
        "20",
        "--out",
        p(&panel),
    ]);
    let out = ok(&[
        "regress",
        "--panel",
        p(&panel),
        "--dep",
        "count",
        "--fe",
        "both",
    ]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = &json["coefficients"][0];
    let (b, se) = (
        c["estimate"].as_f64().unwrap(),
        c["std_error"].as_f64().unwrap(),
    );
    assert!((b - 0.2232).abs() < 3.0 * se, "{b} ± {se}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let cfg = d.join("bad.toml");
    fs::write(
        &cfg,
        "stages = [\"ingest\", \"plot\"]\nstore = \"s\"\noutput = \"o\"\n",
    )
    .unwrap();
    assert_eq!(
        adpress(&["run", "--config", p(&cfg)]).status.code(),
        Some(2)
    );

    let missing = format!("{}/none/*.jsonl", d.display());
    assert_eq!(
        adpress(&["ingest", "--input", &missing, "--store", p(&d.join("s"))])
            .status
            .code(),
        Some(3)
    );

    // Regressor constant within every group: singular once group effects go.
    let panel = d.join("flat.csv");
    fs::write(
        &panel,
        "entity,source,period,weighted_ad_ratio,sentiment_total,article_count,popularity\n\
         A,S,2020-01,1,0,1,\nA,S,2020-02,1,1,2,\nB,S,2020-01,2,0,3,\nB,S,2020-02,2,0,1,\n",
    )
    .unwrap();
    let out = adpress(&[
        "regress",
        "--panel",
        p(&panel),
        "--dep",
        "count",
        "--fe",
        "group",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weighted_ad_ratio"));

    assert_eq!(
        adpress(&["regress", "--panel", p(&panel), "--fe", "sideways"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(adpress(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "store = \"store\"\noutput = \"out\"\n[synth]\nseed = 1\npages = 1000\n",
    )
    .unwrap();
    let first = ok(&["--jobs", "2", "run", "--config", p(&cfg)]);
    let m1: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(m1["stages"].as_array().unwrap().len(), 5);
    let snapshot: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.display().to_string(), fs::read(&p).unwrap()))
        .collect();
    assert!(snapshot.len() >= 12);

    let second = ok(&["run", "--config", p(&cfg)]);
    let m2: serde_json::Value = serde_json::from_slice(&second.stdout).unwrap();
    for (a, b) in m1["stages"]
        .as_array()
        .unwrap()
        .iter()
        .zip(m2["stages"].as_array().unwrap())
    {
        assert_eq!(a["digest"], b["digest"]);
    }
    for (path, bytes) in snapshot {
        assert_eq!(fs::read(&path).unwrap(), bytes, "{path}");
    }
}
