mod common;

use std::path::Path;

use common::{run, stderr, stdout, synthetic_records, write_jsonl};
use serde_json::Value;
use tempfile::TempDir;

/// Raw records plus an ingested corpus directory.
fn corpus(n: usize) -> (TempDir, String) {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("records.jsonl");
    write_jsonl(&raw, &synthetic_records(n, 7));
    let dir = tmp.path().join("corpus");
    let o = run(&["ingest", "--input", s(&raw), "--out", s(&dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = s(&dir).to_string();
    (tmp, dir)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["search", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope");
    let o = run(&["search", "--corpus", s(&missing), "--query", "x"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, "{not json\n").unwrap();
    let o = run(&["ingest", "--input", s(&bad), "--out", s(&tmp.path().join("c"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rejected"));
}

#[test]
fn ingest_rejects_invalid_lines_and_keeps_the_rest() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("mixed.jsonl");
    std::fs::write(
        &raw,
        concat!(
            r#"{"id": "1", "name_rus": "Кабан", "latitude": "55.76", "longitude": "49.13"}"#,
            "\n",
            r#"{"id": "2", "name_rus": "Ошибка", "latitude": "95.0", "longitude": "49.13"}"#,
            "\n",
        ),
    )
    .unwrap();
    let o = run(&["ingest", "--input", s(&raw), "--out", s(&tmp.path().join("c"))]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ingested 1 records"), "{}", stdout(&o));
    assert!(stderr(&o).contains("latitude"));
}

#[test]
fn search_formats_and_parameter_checks() {
    let (_tmp, dir) = corpus(60);
    let records = synthetic_records(60, 7);
    let gold = records.iter().find(|r| !r.name_rus.is_empty()).unwrap();
    let (lat, lon) = (
        gold.latitude.as_ref().unwrap().text.clone(),
        gold.longitude.as_ref().unwrap().text.clone(),
    );
    let q = format!("Где находится {}?", gold.name_rus);

    let o = run(&[
        "search",
        "--corpus",
        &dir,
        "--query",
        &q,
        "--lat",
        &lat,
        "--lon",
        &lon,
        "--format",
        "structured",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(body["method"], "hybrid");
    assert_eq!(body["hits"][0]["doc_id"], gold.id.as_str());
    assert_eq!(body["hits"][0]["distance_m"], 0.0);
    assert_eq!(body["alpha"], 0.1);
    assert_eq!(body["radius_m"], 50000.0);
    assert!(body["hits"].as_array().unwrap().len() <= 5);

    let o = run(&["search", "--corpus", &dir, "--query", &q, "--lat", &lat, "--lon", &lon]);
    assert!(stdout(&o).contains(&gold.id), "{}", stdout(&o));

    let o = run(&["search", "--corpus", &dir, "--query", &q, "--alpha", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha"));
    let o = run(&["search", "--corpus", &dir, "--query", &q, "--lat", "55"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["search", "--corpus", &dir, "--method", "spatial"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["search", "--corpus", &dir, "--query", &q, "--format", "structured"]);
    let body: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(body["notices"][0]["code"], "no-point");
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let (tmp, dir) = corpus(30);
    let cfg = tmp.path().join("engine.toml");
    std::fs::write(&cfg, format!("corpus = {dir:?}\nalpha = 0.5\nk = 2\n")).unwrap();
    let cfg = s(&cfg);
    let o = run(&[
        "--config",
        cfg,
        "search",
        "--query",
        "Река",
        "--lat",
        "55",
        "--lon",
        "50",
        "--format",
        "structured",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(body["alpha"], 0.5);
    assert_eq!(body["k"], 2);
    let o = run(&[
        "search",
        "--config",
        cfg,
        "--query",
        "Река",
        "--alpha",
        "0.9",
        "--format",
        "structured",
    ]);
    let body: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(body["alpha"], 0.9);

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "alpha = 3.0\n").unwrap();
    assert_eq!(
        run(&["--config", s(&bad), "search", "--query", "x"]).status.code(),
        Some(1)
    );
}

#[test]
fn index_then_answer() {
    let (_tmp, dir) = corpus(40);
    let o = run(&["index", "--corpus", &dir, "--dim", "128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(Path::new(&dir).join("vectors.tvec").exists());

    let records = synthetic_records(40, 7);
    let rec = &records[3];
    let name = rec.display_name();
    let (lat, lon) = (
        &rec.latitude.as_ref().unwrap().text,
        &rec.longitude.as_ref().unwrap().text,
    );
    let o = run(&[
        "answer",
        "--corpus",
        &dir,
        "--question",
        &format!("Какие координаты у {name}?"),
        "--lat",
        lat,
        "--lon",
        lon,
        "--format",
        "structured",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(body["doc_id"], rec.id.as_str());
    assert_eq!(body["answer"], rec.coordinates_text().unwrap());
    assert_eq!(body["category"], "coordinates");

    let o = run(&["doc", "--corpus", &dir, "--id", &rec.id]);
    assert!(stdout(&o).contains("Координаты: "));
    assert_eq!(run(&["doc", "--corpus", &dir, "--id", "nope"]).status.code(), Some(2));
}

#[test]
fn gen_qa_is_deterministic_and_reader_scores_it() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("records.jsonl");
    write_jsonl(&raw, &synthetic_records(80, 3));
    let p = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    for (train, val) in [("t1.json", "v1.json"), ("t2.json", "v2.json")] {
        let o = run(&[
            "gen-qa",
            "--input",
            s(&raw),
            "--out-train",
            &p(train),
            "--out-val",
            &p(val),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        std::fs::read(p("t1.json")).unwrap(),
        std::fs::read(p("t2.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(p("v1.json")).unwrap(),
        std::fs::read(p("v2.json")).unwrap()
    );
    let squad: Value = serde_json::from_slice(&std::fs::read(p("t1.json")).unwrap()).unwrap();
    assert_eq!(squad["version"], "1.1");

    let o = run(&[
        "eval-reader",
        "--qa",
        &p("v1.json"),
        "--normalize",
        "--report",
        &p("reader.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(p("reader.json")).unwrap()).unwrap();
    assert_eq!(report["exact_match"], 1.0);
    assert_eq!(report["f1"], 1.0);
    assert_eq!(report["normalized"], true);

    let o = run(&[
        "gen-qa",
        "--input",
        s(&raw),
        "--out-train",
        &p("t.jsonl"),
        "--out-val",
        &p("v.jsonl"),
        "--qa-format",
        "flat",
    ]);
    assert!(o.status.success());
    let first = std::fs::read_to_string(p("v.jsonl")).unwrap();
    let line: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let id = line["id"].as_str().unwrap().to_string();

    let preds = p("preds.json");
    std::fs::write(
        &preds,
        serde_json::json!({ id.clone(): line["answers"][0]["text"] }).to_string(),
    )
    .unwrap();
    let o = run(&[
        "eval-reader",
        "--qa",
        &p("v.jsonl"),
        "--predictions",
        &preds,
        "--report",
        &p("ext.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(p("ext.json")).unwrap()).unwrap();
    let n = report["count"].as_f64().unwrap();
    assert!((report["exact_match"].as_f64().unwrap() - 1.0 / n).abs() < 1e-12);
}

#[test]
fn eval_retrieval_and_grid_search() {
    let (tmp, dir) = corpus(150);
    let report = tmp.path().join("retrieval.json");
    let trace = tmp.path().join("trace.jsonl");
    let o = run(&[
        "eval-retrieval",
        "--corpus",
        &dir,
        "--n",
        "40",
        "--bootstrap",
        "200",
        "--report",
        s(&report),
        "--trace",
        s(&trace),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Hybrid"));
    let body: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(body["methods"].as_array().unwrap().len(), 4);
    assert_eq!(body["queries"], 40);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 160);

    let o = run(&[
        "eval-retrieval",
        "--corpus",
        &dir,
        "--methods",
        "hybrid,nope",
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "eval-retrieval",
        "--corpus",
        &dir,
        "--n",
        "5000",
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&[
        "grid-search",
        "--corpus",
        &dir,
        "--n-val",
        "30",
        "--n-test",
        "40",
        "--alphas",
        "0.1,0.5,0.9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("best alpha:"), "{out}");
    assert_eq!(out.lines().filter(|l| l.trim_start().starts_with("0.")).count(), 3);
}
