use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use forestview_core::interchange::export_forest;
use forestview_core::stats::forest_confusion;
use forestview_core::{datasets, train_forest, Split, TrainParams};
use forestview_service::payload::{self, render};
use forestview_service::{router, Engine};

fn app() -> (Arc<Engine>, Router) {
    let engine = Arc::new(Engine::new(None, TrainParams { n_trees: 30, ..TrainParams::default() }));
    (Arc::clone(&engine), router(engine))
}

async fn call(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    call(app, "GET", uri, Vec::new()).await
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn create(app: &Router, uri: &str, body: Vec<u8>) -> String {
    let (status, bytes) = call(app, "POST", uri, body).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&bytes));
    json(&bytes)["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn builtin_session_serves_every_view() {
    let (engine, app) = app();
    let id = create(&app, "/api/sessions/builtin/penguin?max_depth=4", Vec::new()).await;

    let (status, bytes) = get(&app, &format!("/api/sessions/{id}/overview")).await;
    assert_eq!(status, StatusCode::OK);
    let ov = json(&bytes);
    assert_eq!(ov["schema"], "forestview.overview/v1");
    assert_eq!(ov["n_trees"], 30);
    assert_eq!(ov["features"].as_array().unwrap().len(), 6);
    let session = engine.get(&id).unwrap();
    let cm = forest_confusion(session.forest(), session.dataset(), Split::Test).unwrap();
    assert_eq!(ov["accuracy"].as_f64().unwrap(), cm.accuracy());
    let default_m = ov["curve"]["default_min_size"].as_u64().unwrap();

    let (status, bytes) = get(&app, &format!("/api/sessions/{id}/projection")).await;
    assert_eq!(status, StatusCode::OK);
    let proj = json(&bytes);
    assert_eq!(proj["schema"], "forestview.projection/v1");
    assert_eq!(proj["min_cluster_size"].as_u64().unwrap(), default_m);
    assert_eq!(proj["points"].as_array().unwrap().len(), 30);

    let (status, bytes) = get(&app, &format!("/api/sessions/{id}/clusters?m=3&filter=bill_length_mm:40..50")).await;
    assert_eq!(status, StatusCode::OK);
    let set = json(&bytes);
    let sizes: u64 = set["clusters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["members"].as_array().unwrap().len() as u64)
        .sum();
    assert_eq!(sizes, 30);
    assert_eq!(set["clusters"][0]["feature_plot"]["schema"], "forestview.feature-plot/v1");
    assert_eq!(set["clusters"][0]["rule_plot"]["schema"], "forestview.rule-plot/v1");

    // a single cluster view equals its entry in the full set
    let (status, bytes) = get(&app, &format!("/api/sessions/{id}/clusters/0?m=3&filter=bill_length_mm:40..50")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&bytes), set["clusters"][0]);

    let (status, bytes) = get(&app, &format!("/api/sessions/{id}/clusters/0/trees?m=3")).await;
    assert_eq!(status, StatusCode::OK);
    let trees = json(&bytes);
    let medoid = set["clusters"][0]["medoid"].as_u64().unwrap();
    assert_eq!(trees["trees"][0]["layout"]["tree"].as_u64().unwrap(), medoid);
    assert_eq!(trees["trees"][0]["layout"]["schema"], "forestview.tree-layout/v1");
    assert_eq!(
        trees["trees"].as_array().unwrap().len(),
        set["clusters"][0]["members"].as_array().unwrap().len()
    );

    // payloads are exactly what the shared builders render
    let f = payload::parse_filter(&session, ["bill_length_mm:40..50"]).unwrap();
    assert_eq!(render(&payload::clusters(&session, Some(3), &f).unwrap()).unwrap(), {
        get(&app, &format!("/api/sessions/{id}/clusters?m=3&filter=bill_length_mm:40..50")).await.1
    });
}

#[tokio::test]
async fn large_m_gives_one_cluster() {
    let (_, app) = app();
    let id = create(&app, "/api/sessions/builtin/glass?trees=12", Vec::new()).await;
    let (status, bytes) = get(&app, &format!("/api/sessions/{id}/clusters?m=1000")).await;
    assert_eq!(status, StatusCode::OK);
    let set = json(&bytes);
    assert_eq!(set["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(set["clusters"][0]["members"].as_array().unwrap().len(), 12);
    let (_, bytes) = get(&app, &format!("/api/sessions/{id}/projection?m=1000")).await;
    assert_eq!(json(&bytes)["hulls"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let (_, app) = app();
    let id = create(&app, "/api/sessions/builtin/penguin?trees=10", Vec::new()).await;

    let (status, bytes) = get(&app, "/api/sessions/nosuchsession/overview").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&bytes)["error"], "not_found");

    let (status, _) = get(&app, &format!("/api/sessions/{id}/clusters/99?m=2")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&app, &format!("/api/sessions/{id}/clusters/99/trees?m=2")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&app, "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    for bad in [
        "filter=bill_length_mm:50..40",
        "filter=nosuchfeature:1..2",
        "filter=cell:Adelie-%3ENobody",
        "filter=bill_length_mm:1",
        "m=0",
        "m=abc",
        "bogus=1",
    ] {
        let (status, bytes) = get(&app, &format!("/api/sessions/{id}/clusters?{bad}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert_eq!(json(&bytes)["error"], "bad_request");
    }
    let (status, _) = get(&app, &format!("/api/sessions/{id}/clusters/x")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "POST", "/api/sessions/builtin/iris", Vec::new()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/api/sessions/builtin/glass?trees=0", Vec::new()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn csv_upload_parse_failures_carry_row_diagnostics() {
    let (_, app) = app();
    let csv = b"a,b,label\n1,2,x\n3,,y\n5,6,x\n".to_vec();
    let (status, bytes) = call(&app, "POST", "/api/sessions/csv", csv).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body = json(&bytes);
    assert_eq!(body["diagnostic"]["line"], 3);
    assert_eq!(body["diagnostic"]["column"], "b");
    assert_eq!(body["diagnostic"]["value"], "");

    let ragged = b"a,b,label\n1,2,x\n3,y\n".to_vec();
    let (status, bytes) = call(&app, "POST", "/api/sessions/csv", ragged).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&bytes)["diagnostic"]["line"], 3);

    let (status, bytes) = call(&app, "POST", "/api/sessions/forest", b"{not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&bytes)["diagnostic"]["line"], 1);
}

#[tokio::test]
async fn csv_upload_trains_with_given_parameters() {
    let (engine, app) = app();
    let csv = datasets::builtin_csv("penguin").unwrap().as_bytes().to_vec();
    let id = create(&app, "/api/sessions/csv?label=species&trees=7&max_depth=3&seed=5&name=p", csv).await;
    let s = engine.get(&id).unwrap();
    assert_eq!(s.forest().len(), 7);
    assert!(s.forest().trees.iter().all(|t| t.max_depth() <= 3));
    assert_eq!(s.dataset().name, "p");
    let expected = datasets::penguin(0.3, 5).unwrap();
    assert_eq!(s.dataset().labels(), expected.labels());
}

#[tokio::test]
async fn forest_upload_with_and_without_rows() {
    let (_, app) = app();
    let d = datasets::glass(0.3, 0).unwrap();
    let forest = train_forest(&d, &TrainParams { n_trees: 8, ..TrainParams::default() }).unwrap();

    let full = create(&app, "/api/sessions/forest", export_forest(&forest, &d, true).unwrap()).await;
    let (_, bytes) = get(&app, &format!("/api/sessions/{full}/overview")).await;
    let ov = json(&bytes);
    assert!(ov["accuracy"].is_number());
    assert_eq!(ov["dataset"]["n_rows"], 214);

    let bare = create(&app, "/api/sessions/forest", export_forest(&forest, &d, false).unwrap()).await;
    let (status, bytes) = get(&app, &format!("/api/sessions/{bare}/overview")).await;
    assert_eq!(status, StatusCode::OK);
    let ov = json(&bytes);
    assert!(ov["accuracy"].is_null());
    assert!(ov["features"].as_array().unwrap().is_empty());
    for uri in ["projection", "clusters?filter=cell:Building-%3E*", "clusters/0/trees"] {
        let (status, _) = get(&app, &format!("/api/sessions/{bare}/{uri}")).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
    }
}

#[tokio::test]
async fn concurrent_reads_see_identical_payloads() {
    let (_, app) = app();
    let id = create(&app, "/api/sessions/builtin/glass?trees=40", Vec::new()).await;
    let uris: Vec<String> = (0..24)
        .map(|i| match i % 3 {
            0 => format!("/api/sessions/{id}/clusters?m=4"),
            1 => format!("/api/sessions/{id}/projection?m=4"),
            _ => format!("/api/sessions/{id}/overview"),
        })
        .collect();
    let handles: Vec<_> = uris
        .iter()
        .map(|u| {
            let (app, u) = (app.clone(), u.clone());
            tokio::spawn(async move { get(&app, &u).await })
        })
        .collect();
    let mut results = Vec::new();
    for h in handles {
        results.push(h.await.unwrap());
    }
    for (i, r) in results.iter().enumerate() {
        assert_eq!(r.0, StatusCode::OK);
        assert_eq!(r.1, results[i % 3].1);
    }
}

#[tokio::test]
async fn health_and_builtins() {
    let (_, app) = app();
    assert_eq!(get(&app, "/api/health").await.0, StatusCode::OK);
    let (_, bytes) = get(&app, "/api/builtins").await;
    assert_eq!(json(&bytes), serde_json::json!(["glass", "penguin"]));
}
