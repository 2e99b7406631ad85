use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use textscape::demo::make_demo;
use textscape::gbuffer::{render_gbuffer, IndexedScene};
use textscape::region::{propose_regions, NormalBoundaryMap, ProposalConfig, TextRegion2D};
use textscape::scene::{load_anchors, load_scene, CameraIntrinsics, EulerPose, IlluminationPreset};
use textscape_cli::{router, AppState};
use tower::ServiceExt;

const VIEW: &str = "x=1.5&y=5&z=1.6&yaw=0&pitch=0&roll=0&w=180&h=270&fx=250";

struct Fixture {
    _dir: tempfile::TempDir,
    scene: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let paths = make_demo(dir.path()).unwrap();
    Fixture {
        scene: paths.room_scene,
        _dir: dir,
    }
}

fn app(scene: &Path) -> axum::Router {
    router(Arc::new(AppState::load(scene).unwrap()))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(bytes)))
}

#[tokio::test]
async fn scene_info_describes_the_scene() {
    let f = fixture();
    let (status, body) = call(&app(&f.scene), "GET", "/scene/info", None).await;
    assert_eq!(status, StatusCode::OK);
    let info = json(&body);
    let scene = load_scene(&f.scene).unwrap();
    assert_eq!(info["triangles"], scene.triangle_count());
    assert_eq!(info["anchors"], 1);
    assert_eq!(info["outdoor"], false);
    assert_eq!(info["bounds_max"][0], 12.0);
}

#[tokio::test]
async fn preview_returns_png_of_requested_size() {
    let f = fixture();
    let (status, body) = call(&app(&f.scene), "GET", &format!("/preview?{VIEW}&preset=dark"), None).await;
    assert_eq!(status, StatusCode::OK);
    let img = image::load_from_memory_with_format(&body, image::ImageFormat::Png).unwrap();
    assert_eq!((img.width(), img.height()), (180, 270));
}

#[tokio::test]
async fn malformed_view_parameters_are_json_400s() {
    let f = fixture();
    let app = app(&f.scene);
    for uri in [
        "/preview?x=abc&y=0&z=0",
        "/preview?y=0&z=0",
        "/preview?x=0&y=0&z=0&preset=sunset",
        "/preview?x=0&y=0&z=0&w=0",
        "/preview?x=0&y=0&z=0&fx=-3",
        "/regions?x=0&y=0&z=0&seed=minus",
    ] {
        let (status, body) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(json(&body)["error"].is_string(), "{uri}");
    }
}

#[tokio::test]
async fn regions_match_offline_proposal_at_same_seed() {
    let f = fixture();
    let (status, body) = call(&app(&f.scene), "GET", &format!("/regions?{VIEW}&seed=42"), None).await;
    assert_eq!(status, StatusCode::OK);
    let served: Vec<TextRegion2D> = serde_json::from_slice(&body).unwrap();
    for r in json(&body).as_array().unwrap() {
        let keys: Vec<_> = r.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["x1", "x2", "y1", "y2"]);
    }

    let world = IndexedScene::new(load_scene(&f.scene).unwrap()).unwrap();
    let pose = EulerPose {
        position: [1.5, 5.0, 1.6],
        yaw: 0.0,
        pitch: 0.0,
        roll: 0.0,
    }
    .to_pose();
    let k = CameraIntrinsics::new(250.0, 250.0, 90.0, 135.0, 180, 270).unwrap();
    let g = render_gbuffer(&world, &pose, &k, &IlluminationPreset::normal()).unwrap();
    let config = ProposalConfig::default();
    let map = NormalBoundaryMap::from_gbuffer(&g, config.threshold).unwrap();
    let offline = propose_regions(&map, &config, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert!(!offline.is_empty());
    assert_eq!(served, offline);
}

#[tokio::test]
async fn anchors_round_trip_and_persist() {
    let f = fixture();
    let scene_bytes = std::fs::read(&f.scene).unwrap();
    let app = app(&f.scene);
    let (status, body) = call(
        &app,
        "POST",
        "/anchors",
        Some(r#"{"id": "door", "position": [2, 3, 1.5], "yaw": 10, "pitch": 0, "roll": 0, "label": "by the door"}"#),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    let (status, body) = call(
        &app,
        "POST",
        "/anchors",
        Some(r#"{"position": [3, 3, 1.5], "yaw": 0, "pitch": 5, "roll": 0}"#),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(json(&body)["id"], "a1");

    let (_, body) = call(&app, "GET", "/anchors", None).await;
    let ids: Vec<String> = json(&body)
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["a0", "door", "a1"]);

    let sidecar = f.scene.parent().unwrap().join("anchors.json");
    let stored = load_anchors(&sidecar).unwrap();
    assert_eq!(
        stored.iter().map(|a| a.id.as_str()).collect::<Vec<_>>(),
        ["a0", "door", "a1"]
    );
    assert_eq!(stored[1].label, "by the door");
    // A restarted service and a batch run both see the new anchor.
    let (_, body) = call(&self::app(&f.scene), "GET", "/anchors", None).await;
    assert_eq!(json(&body).as_array().unwrap().len(), 3);
    assert!(load_scene(&f.scene).unwrap().anchor("door").is_some());
    assert_eq!(std::fs::read(&f.scene).unwrap(), scene_bytes);
}

#[tokio::test]
async fn anchor_errors() {
    let f = fixture();
    let app = app(&f.scene);
    let (status, body) = call(
        &app,
        "POST",
        "/anchors",
        Some(r#"{"id": "a0", "position": [0, 0, 1], "yaw": 0, "pitch": 0, "roll": 0}"#),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(json(&body)["error"].is_string());
    let (status, body) = call(&app, "POST", "/anchors", Some(r#"{"position": [0, 0], "yaw": 0}"#)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(json(&body)["error"].is_string());
    let (status, body) = call(&app, "DELETE", "/anchors/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(json(&body)["error"].is_string());
}

#[tokio::test]
async fn delete_removes_anchor_from_list_and_file() {
    let f = fixture();
    let app = app(&f.scene);
    let (status, _) = call(&app, "DELETE", "/anchors/a0", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, body) = call(&app, "GET", "/anchors", None).await;
    assert!(json(&body).as_array().unwrap().is_empty());
    assert!(load_anchors(&f.scene.parent().unwrap().join("anchors.json"))
        .unwrap()
        .is_empty());
    let (status, _) = call(&app, "DELETE", "/anchors/a0", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
