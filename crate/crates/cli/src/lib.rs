//! HTTP preview and anchor service used by the anchor editing UI.
//!
//! Renders are read-only over the loaded scene. Anchor edits go to the
//! `anchors.json` sidecar next to the scene file, one writer at a time.

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use textscape::gbuffer::{render_gbuffer, IndexedScene};
use textscape::pipeline::regions_for_view;
use textscape::region::ProposalConfig;
use textscape::scene::{
    anchors_path, load_scene, save_anchors, CameraAnchor, CameraIntrinsics, EulerPose, IlluminationPreset, PresetName,
    SceneError,
};
use tokio::sync::RwLock;
use tower_http::cors::CorsLayer;

/// Largest preview edge accepted, in pixels.
pub const MAX_PREVIEW_EDGE: u32 = 4096;
pub const DEFAULT_PREVIEW_SIZE: (u32, u32) = (720, 1080);

pub struct AppState {
    world: IndexedScene,
    scene_path: PathBuf,
    anchors: RwLock<Vec<CameraAnchor>>,
}

impl AppState {
    pub fn load(scene_path: &Path) -> Result<Self, anyhow::Error> {
        let scene = load_scene(scene_path)?;
        let anchors = scene.anchors.clone();
        Ok(AppState {
            world: IndexedScene::new(scene)?,
            scene_path: scene_path.to_path_buf(),
            anchors: RwLock::new(anchors),
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

/// Pose and image parameters shared by `/preview` and `/regions`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewQuery {
    pub pose: EulerPose,
    pub intrinsics: CameraIntrinsics,
    pub preset: PresetName,
}

fn number<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, default: Option<T>) -> Result<T, ApiError> {
    match q.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::bad_request(format!("parameter {key}: cannot parse {raw:?}"))),
        None => default.ok_or_else(|| ApiError::bad_request(format!("missing parameter {key}"))),
    }
}

impl ViewQuery {
    /// `x`, `y`, `z` are required; angles default to zero, the image to
    /// 720x1080 with focal length `fx` (default 1000) and the preset to
    /// normal.
    pub fn parse(q: &HashMap<String, String>) -> Result<Self, ApiError> {
        let pose = EulerPose {
            position: [number(q, "x", None)?, number(q, "y", None)?, number(q, "z", None)?],
            yaw: number(q, "yaw", Some(0.0))?,
            pitch: number(q, "pitch", Some(0.0))?,
            roll: number(q, "roll", Some(0.0))?,
        };
        if !pose.is_finite() {
            return Err(ApiError::bad_request("pose values must be finite"));
        }
        let w: u32 = number(q, "w", Some(DEFAULT_PREVIEW_SIZE.0))?;
        let h: u32 = number(q, "h", Some(DEFAULT_PREVIEW_SIZE.1))?;
        if w == 0 || h == 0 || w > MAX_PREVIEW_EDGE || h > MAX_PREVIEW_EDGE {
            return Err(ApiError::bad_request(format!(
                "image size must be between 1 and {MAX_PREVIEW_EDGE} pixels per edge"
            )));
        }
        let fx: f64 = number(q, "fx", Some(textscape::scene::DEFAULT_FOCAL))?;
        let intrinsics = CameraIntrinsics::new(fx, fx, w as f64 / 2.0, h as f64 / 2.0, w, h)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let preset = match q.get("preset") {
            Some(p) => p
                .parse()
                .map_err(|e: SceneError| ApiError::bad_request(e.to_string()))?,
            None => PresetName::Normal,
        };
        Ok(ViewQuery {
            pose,
            intrinsics,
            preset,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneInfo {
    pub path: String,
    pub meshes: usize,
    pub triangles: usize,
    pub materials: Vec<String>,
    pub lights: usize,
    pub outdoor: bool,
    pub z_max: f64,
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    pub anchors: usize,
    pub presets: Vec<PresetName>,
}

/// Body of `POST /anchors`; a missing id is filled with the first free
/// `a<N>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewAnchor {
    #[serde(default)]
    pub id: Option<String>,
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    #[serde(default)]
    pub label: String,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("render task failed: {e}")))?
}

async fn scene_info(State(state): State<Arc<AppState>>) -> Json<SceneInfo> {
    let scene = &state.world.scene;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in scene.meshes.iter().flat_map(|m| m.mesh.vertices()) {
        for i in 0..3 {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let presets = PresetName::ALL
        .into_iter()
        .filter(|p| *p != PresetName::Fog || scene.outdoor)
        .collect();
    Json(SceneInfo {
        path: state.scene_path.display().to_string(),
        meshes: scene.meshes.len(),
        triangles: scene.triangle_count(),
        materials: scene.materials.keys().cloned().collect(),
        lights: scene.lights.len(),
        outdoor: scene.outdoor,
        z_max: scene.z_max,
        bounds_min: lo,
        bounds_max: hi,
        anchors: state.anchors.read().await.len(),
        presets,
    })
}

async fn preview(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let view = ViewQuery::parse(&q)?;
    let png = blocking(move || {
        let preset = IlluminationPreset::builtin(view.preset);
        let g = render_gbuffer(&state.world, &view.pose.to_pose(), &view.intrinsics, &preset)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let mut bytes = Vec::new();
        g.rgb_image()
            .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(bytes)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn regions(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let view = ViewQuery::parse(&q)?;
    let seed: u64 = number(&q, "seed", Some(0))?;
    let found = blocking(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        regions_for_view(
            &state.world,
            &view.pose.to_pose(),
            &view.intrinsics,
            &ProposalConfig::default(),
            &mut rng,
        )
        .map(|(_, _, regions)| regions)
        .map_err(|e| ApiError::internal(e.to_string()))
    })
    .await?;
    Ok(Json(found).into_response())
}

async fn list_anchors(State(state): State<Arc<AppState>>) -> Json<Vec<CameraAnchor>> {
    Json(state.anchors.read().await.clone())
}

async fn create_anchor(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let new: NewAnchor =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid anchor: {e}")))?;
    let mut anchors = state.anchors.write().await;
    let id = match new.id {
        Some(id) if id.trim().is_empty() => return Err(ApiError::bad_request("anchor id must not be empty")),
        Some(id) => id,
        None => (0..)
            .map(|n| format!("a{n}"))
            .find(|c| anchors.iter().all(|a| &a.id != c))
            .expect("unbounded search"),
    };
    if anchors.iter().any(|a| a.id == id) {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            message: format!("anchor {id:?} already exists"),
        });
    }
    let anchor = CameraAnchor {
        id,
        pose: EulerPose {
            position: new.position,
            yaw: new.yaw,
            pitch: new.pitch,
            roll: new.roll,
        },
        label: new.label,
    };
    if !anchor.pose.is_finite() {
        return Err(ApiError::bad_request("pose values must be finite"));
    }
    let mut updated = anchors.clone();
    updated.push(anchor.clone());
    save_anchors(&anchors_path(&state.scene_path), &updated).map_err(|e| ApiError::internal(e.to_string()))?;
    *anchors = updated;
    log::info!("saved anchor {}", anchor.id);
    Ok((StatusCode::CREATED, Json(anchor)).into_response())
}

async fn delete_anchor(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let mut anchors = state.anchors.write().await;
    let Some(pos) = anchors.iter().position(|a| a.id == id) else {
        return Err(ApiError {
            status: StatusCode::NOT_FOUND,
            message: format!("no anchor {id:?}"),
        });
    };
    let mut updated = anchors.clone();
    updated.remove(pos);
    save_anchors(&anchors_path(&state.scene_path), &updated).map_err(|e| ApiError::internal(e.to_string()))?;
    *anchors = updated;
    log::info!("deleted anchor {id}");
    Ok(StatusCode::NO_CONTENT.into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scene/info", get(scene_info))
        .route("/preview", get(preview))
        .route("/regions", get(regions))
        .route("/anchors", get(list_anchors).post(create_anchor))
        .route("/anchors/{id}", delete(delete_anchor))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves the API on `addr` until Ctrl-C.
pub async fn serve(scene_path: &Path, addr: SocketAddr) -> Result<(), anyhow::Error> {
    let state = Arc::new(AppState::load(scene_path)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on http://{}", scene_path.display(), listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
