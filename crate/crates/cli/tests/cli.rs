use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use forestview_core::TrainParams;
use forestview_service::{router, Engine};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forestview")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn train(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut args = vec!["train", "builtin:glass", "--trees", "24", "-o", &path];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = train(dir.path(), "a.json", &["--seed", "3"]);
    let b = train(dir.path(), "b.json", &["--seed", "3"]);
    let c = train(dir.path(), "c.json", &["--seed", "4"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn csv_training_honors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let mut text = String::from("x,y,kind\n");
    for i in 0..40 {
        text.push_str(&format!("{},{},{}\n", i, (i * 7) % 11, if i < 20 { "lo" } else { "hi" }));
    }
    fs::write(&csv, text).unwrap();
    let out = dir.path().join("toy.json");
    ok(&["train", csv.to_str().unwrap(), "--label", "kind", "--trees", "5", "--max-depth", "2", "-o", out.to_str().unwrap()]);
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["trees"].as_array().unwrap().len(), 5);
    assert_eq!(doc["params"]["max_depth"], 2);
    assert_eq!(doc["dataset_schema"]["name"], "toy");
    assert_eq!(doc["dataset_schema"]["classes"], serde_json::json!(["hi", "lo"]));
}

#[test]
fn cluster_sizes_sum_to_tree_count() {
    let dir = tempfile::tempdir().unwrap();
    let forest = train(dir.path(), "f.json", &[]);
    for m in ["2", "3", "5", "100"] {
        let text = String::from_utf8(ok(&["cluster", &forest, "--min-size", m])).unwrap();
        let clusters: Vec<&str> = text
            .lines()
            .skip(2)
            .take_while(|l| !l.is_empty())
            .collect();
        let total: usize = clusters.iter().map(|l| l.split('\t').nth(1).unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, 24);
        let labels = text.split("\n\n").nth(1).unwrap().lines().skip(1).count();
        assert_eq!(labels, 24);
    }
    let text = String::from_utf8(ok(&["cluster", &forest])).unwrap();
    assert_eq!(text.matches("\t*\n").count(), 1);
}

#[test]
fn distances_table_is_square_and_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let forest = train(dir.path(), "f.json", &[]);
    let text = String::from_utf8(ok(&["distances", &forest])).unwrap();
    let m = forestview_core::DistanceMatrix::from_table(&text).unwrap();
    assert_eq!(m.len(), 24);
    for i in 0..24 {
        assert_eq!(m.get(i, i), 0.0);
        for j in 0..24 {
            assert_eq!(m.get(i, j), m.get(j, i));
        }
    }
}

#[test]
fn failures_exit_nonzero_with_context() {
    let out = run(&["cluster", "/no/such/forest.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/forest.json"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"format\": 7\n}").unwrap();
    let out = run(&["distances", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 2"), "{err}");

    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "a,b\n1,x\n2\n").unwrap();
    let out = run(&["train", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    assert!(!run(&["train"]).status.success());
    assert!(!run(&["cluster", "x", "--min-size", "many"]).status.success());
    let forest = train(dir.path(), "f.json", &[]);
    let out = run(&["export", &forest, "--filter", "RI:2..1", "-o", dir.path().join("e").to_str().unwrap()]);
    assert!(!out.status.success());
}

async fn get(app: &axum::Router, uri: &str) -> Vec<u8> {
    let req = Request::builder().uri(uri).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK, "{uri}");
    resp.into_body().collect().await.unwrap().to_bytes().to_vec()
}

#[tokio::test]
async fn export_matches_service_responses_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let forest = train(dir.path(), "f.json", &[]);
    let out = dir.path().join("export");
    let filters = ["Mg:2..4", "cell:Building-float->Building"];
    ok(&["export", &forest, "--min-size", "3", "--filter", filters[0], "--filter", filters[1], "-o", out.to_str().unwrap()]);

    let app = router(Arc::new(Engine::new(None, TrainParams::default())));
    let req = Request::builder()
        .method("POST")
        .uri("/api/sessions/forest")
        .body(Body::from(fs::read(&forest).unwrap()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let info: serde_json::Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    let id = info["id"].as_str().unwrap();

    let q = "m=3&filter=Mg:2..4&filter=cell:Building-float-%3EBuilding";
    let base = format!("/api/sessions/{id}");
    assert_eq!(fs::read(out.join("overview.json")).unwrap(), get(&app, &format!("{base}/overview")).await);
    assert_eq!(fs::read(out.join("projection.json")).unwrap(), get(&app, &format!("{base}/projection?m=3")).await);
    assert_eq!(fs::read(out.join("clusters.json")).unwrap(), get(&app, &format!("{base}/clusters?{q}")).await);
    let n = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("cluster-")).count();
    assert!(n >= 1);
    for c in 0..n {
        assert_eq!(
            fs::read(out.join(format!("cluster-{c}.json"))).unwrap(),
            get(&app, &format!("{base}/clusters/{c}?{q}")).await
        );
        assert_eq!(
            fs::read(out.join(format!("trees-{c}.json"))).unwrap(),
            get(&app, &format!("{base}/clusters/{c}/trees?m=3")).await
        );
    }
}
