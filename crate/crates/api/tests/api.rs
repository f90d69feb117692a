use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use proptest::prelude::*;
use ruhs_api::{router, AppState, Comment, ServerOptions, TOKEN_HEADER};
use ruhs_core::annotate::rule_catalog;
use ruhs_core::{decide, RuleId};
use serde_json::{json, Value};
use tower::ServiceExt;

fn comments(n: usize) -> Vec<Comment> {
    (0..n)
        .map(|i| Comment {
            id: format!("c{i:04}"),
            text: format!("comment number {i}"),
        })
        .collect()
}

fn app(n: usize) -> Router {
    router(AppState::new(comments(n), None).unwrap(), &ServerOptions::default())
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value, axum::http::HeaderMap) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, body, headers)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b, _) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, b)
}

async fn post(app: &Router, uri: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
    let mut req = Request::post(uri).header(header::CONTENT_TYPE, "application/json");
    if let Some(t) = token {
        req = req.header(TOKEN_HEADER, t);
    }
    let (s, b, _) = send(app, req.body(Body::from(body.to_string())).unwrap()).await;
    (s, b)
}

async fn open(app: &Router, id: &str, queue: Option<Vec<String>>) -> String {
    let mut body = json!({"annotator": format!("ann-{id}"), "session_id": id});
    if let Some(q) = queue {
        body["queue"] = json!(q);
    }
    let (s, b) = post(app, "/api/session", None, body).await;
    assert_eq!(s, StatusCode::CREATED, "{b}");
    b["token"].as_str().unwrap().to_string()
}

async fn label(app: &Router, id: &str, token: &str, comment: &str, rules: &[&str]) -> (StatusCode, Value) {
    post(
        app,
        &format!("/api/session/{id}/label"),
        Some(token),
        json!({"comment_id": comment, "rules": rules}),
    )
    .await
}

#[tokio::test]
async fn catalog_lists_all_rules_with_etag() {
    let app = app(1);
    let (s, body, headers) = send(&app, Request::get("/api/catalog").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    let rules = body["rules"].as_array().unwrap();
    assert_eq!(rules.len(), rule_catalog().len());
    let ids: Vec<&str> = rules.iter().map(|r| r["id"].as_str().unwrap()).collect();
    let expected: Vec<String> = rule_catalog().iter().map(|r| r.id.to_string()).collect();
    assert_eq!(ids, expected);
    let etag = headers[header::ETAG].to_str().unwrap().to_string();

    let (s, body, _) = send(
        &app,
        Request::get("/api/catalog").header(header::IF_NONE_MATCH, &etag).body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_MODIFIED);
    assert_eq!(body, Value::Null);
}

#[tokio::test]
async fn catalog_stage_filter() {
    let app = app(1);
    let (s, body) = get(&app, "/api/catalog?stage=ComplexFine").await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = body["rules"].as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["CH1", "CH2", "CH3", "CO1", "CO2", "CO3"]);

    let (s, body) = get(&app, "/api/catalog?stage=Bogus").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
    assert!(body["message"].as_str().unwrap().contains("Bogus"));
}

#[tokio::test]
async fn label_flow_and_errors() {
    let app = app(3);
    let token = open(&app, "s1", None).await;

    let (s, body) = get(&app, "/api/session/s1/next").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["next"]["comment_id"], "c0000");
    assert_eq!(body["next"]["text"], "comment number 0");

    let (s, body) = label(&app, "s1", &token, "c0000", &["H2", "S1", "SO3"]).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["summary"], "Hostile/Simple/Offensive");
    assert_eq!(body["progress"]["decided"], 1);
    assert_eq!(body["progress"]["total"], 3);
    assert_eq!(body["next"]["comment_id"], "c0001");

    // Neutral with a structure rule attached.
    let (s, body) = label(&app, "s1", &token, "c0001", &["N1", "S1"]).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_path");

    // Client path disagreeing with its own rules.
    let (s, body) = post(
        &app,
        "/api/session/s1/label",
        Some(&token),
        json!({"comment_id": "c0001", "rules": ["N1"], "path": {"top": "Neutral", "structure": "Simple"}}),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{body}");

    let (s, body) = label(&app, "s1", &token, "c0002", &["N1"]).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["code"], "out_of_order");

    let (s, body) = label(&app, "s1", &token, "nope", &["N1"]).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "unknown_comment");

    let (s, body) = label(&app, "s1", &token, "c0000", &["N1"]).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["code"], "already_labeled");

    let (s, body) = post(
        &app,
        "/api/session/s1/label?amend=true",
        Some(&token),
        json!({"comment_id": "c0000", "rules": ["N1"]}),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["amended"], true);
    assert_eq!(body["summary"], "Neutral");
    assert_eq!(body["progress"]["decided"], 1);

    let (s, _) = label(&app, "s1", "wrong", "c0001", &["N1"]).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    let (s, body) = label(&app, "ghost", &token, "c0001", &["N1"]).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_session");
    assert_eq!(get(&app, "/api/session/ghost/next").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn completed_session_has_no_next() {
    let app = app(1);
    let token = open(&app, "one", None).await;
    let (s, body) = label(&app, "one", &token, "c0000", &["H1", "C2", "CH1"]).await;
    assert_eq!(s, StatusCode::OK);
    assert!(body.get("next").is_none());
    let (_, body) = get(&app, "/api/session/one").await;
    assert_eq!(body["complete"], true);
    assert_eq!(body["progress"]["fraction"], 1.0);
    assert!(body.get("next").is_none());
}

#[tokio::test]
async fn session_creation_errors() {
    let app = app(2);
    open(&app, "dup", None).await;
    let (s, body) = post(&app, "/api/session", None, json!({"annotator": "x", "session_id": "dup"})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["code"], "session_exists");
    let (s, _) = post(&app, "/api/session", None, json!({"annotator": "x", "session_id": "../etc"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&app, "/api/session", None, json!({"annotator": "x", "queue": ["zzz"]})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

/// Two annotators over 500 comments reproducing the hostile/neutral table
/// (393, 7, 13, 87).
#[tokio::test]
async fn agreement_reproduces_reference_kappa() {
    let app = app(500);
    let ta = open(&app, "a", None).await;
    let tb = open(&app, "b", None).await;
    let hostile = ["H1", "S1", "SO1"];
    let neutral = ["N1"];
    for i in 0..500 {
        let (x, y) = match i {
            0..=392 => (true, true),
            393..=399 => (true, false),
            400..=412 => (false, true),
            _ => (false, false),
        };
        let c = format!("c{i:04}");
        assert_eq!(label(&app, "a", &ta, &c, if x { &hostile } else { &neutral }).await.0, StatusCode::OK);
        assert_eq!(label(&app, "b", &tb, &c, if y { &hostile } else { &neutral }).await.0, StatusCode::OK);
    }
    let (s, body) = get(&app, "/api/agreement?a=a&b=b&level=top").await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["table"], json!({"a": 393, "b": 7, "c": 13, "d": 87}));
    let k = body["report"]["kappa"].as_f64().unwrap();
    assert!((k - 0.872).abs() < 5e-4, "{k}");
    assert_eq!(body["partial"], false);
    assert_eq!(body["compared"], 500);
    assert_eq!(body["disagreements"].as_array().unwrap().len(), 20);

    let (s, body) = get(&app, "/api/agreement?a=a&b=a").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["report"]["kappa"].as_f64().unwrap(), 1.0);
}

#[tokio::test]
async fn agreement_partial_and_disjoint() {
    let app = app(6);
    let ta = open(&app, "a", None).await;
    let tb = open(&app, "b", Some(vec!["c0003".into(), "c0004".into(), "c0005".into()])).await;
    let (s, body) = get(&app, "/api/agreement?a=a&b=b").await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["code"], "disjoint_sessions");

    for (i, r) in [["N1"], ["N2"], ["N1"], ["N3"]].iter().enumerate() {
        label(&app, "a", &ta, &format!("c{i:04}"), r).await;
    }
    let (s, _) = get(&app, "/api/agreement?a=a&b=b").await;
    assert_eq!(s, StatusCode::CONFLICT);

    label(&app, "b", &tb, "c0003", &["H1", "S1", "SH1"]).await;
    let (s, body) = get(&app, "/api/agreement?a=a&b=b").await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["partial"], true);
    assert_eq!(body["compared"], 1);
    assert_eq!(body["table"], json!({"a": 0, "b": 0, "c": 1, "d": 0}));

    assert_eq!(get(&app, "/api/agreement?a=a&b=zz").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/agreement?a=a&b=b&level=mid").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn partial_flag_over_intersection() {
    let app = app(4);
    let ta = open(&app, "a", None).await;
    let tb = open(&app, "b", None).await;
    let h: &[&str] = &["H1", "S1", "SO1"];
    let n: &[&str] = &["N1"];
    for (i, (x, y)) in [(h, h), (n, n), (h, n)].into_iter().enumerate() {
        let c = format!("c{i:04}");
        label(&app, "a", &ta, &c, x).await;
        label(&app, "b", &tb, &c, y).await;
    }
    label(&app, "a", &ta, "c0003", n).await;
    let (s, body) = get(&app, "/api/agreement?a=a&b=b").await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["partial"], true);
    assert_eq!(body["compared"], 3);
    assert_eq!(body["table"], json!({"a": 1, "b": 1, "c": 0, "d": 1}));
}

#[tokio::test]
async fn logs_replay_into_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let opts = ServerOptions {
        session_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let first = router(AppState::new(comments(4), opts.session_dir.clone()).unwrap(), &opts);
    let token = open(&first, "keep", None).await;
    label(&first, "keep", &token, "c0000", &["H1", "C1", "CO2", "CH1"]).await;
    label(&first, "keep", &token, "c0001", &["N2"]).await;
    post(
        &first,
        "/api/session/keep/label?amend=true",
        Some(&token),
        json!({"comment_id": "c0000", "rules": ["N1"]}),
    )
    .await;
    let (_, before) = get(&first, "/api/session/keep").await;

    let second = router(AppState::new(comments(4), opts.session_dir.clone()).unwrap(), &opts);
    let (s, after) = get(&second, "/api/session/keep").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(before, after);
    // The token survives the restart.
    let (s, body) = label(&second, "keep", &token, "c0002", &["N1"]).await;
    assert_eq!(s, StatusCode::OK, "{body}");
}

fn rule_ids() -> Vec<String> {
    rule_catalog().iter().map(|r| r.id.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// The service accepts a rule list exactly when the library does.
    #[test]
    fn api_validation_matches_decide(answers in prop::collection::vec(prop::sample::select(rule_ids()), 0..6)) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let (status, body) = rt.block_on(async {
            let app = app(1);
            let token = open(&app, "p", None).await;
            let rules: Vec<&str> = answers.iter().map(String::as_str).collect();
            label(&app, "p", &token, "c0000", &rules).await
        });
        let parsed: Vec<RuleId> = answers.iter().map(|r| r.parse().unwrap()).collect();
        match decide(&parsed) {
            Ok(path) => {
                prop_assert_eq!(status, StatusCode::OK);
                prop_assert_eq!(body["summary"].as_str().unwrap(), path.short());
            }
            Err(_) => prop_assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY),
        }
    }
}
