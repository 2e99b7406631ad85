//! Batch dataset generation: configuration, seeded streams, the per-anchor
//! pipeline, ICDAR export and the manifest.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gbuffer::{render_gbuffer, GBuffer, IndexedScene, RenderError};
use crate::placement::{deform_text_mesh, lift_region, rectify, PlacedText, PlacementError, DEFAULT_GRID};
use crate::region::{propose_regions, NormalBoundaryMap, ProposalConfig, RegionError, TextRegion2D};
use crate::render::{
    annotate, compute_visibility, render_sample, sample_viewpoints, AnnotationPolicy, RenderedView, SampleWorld,
    ViewpointRanges, WordAnnotation,
};
use crate::scene::{
    load_scene, CameraAnchor, CameraIntrinsics, CameraPose, EulerPose, IlluminationPreset, PresetName, SceneError,
    DEFAULT_FOCAL, WORLD_UP,
};
use crate::text::{
    pick_text_color, rasterize_text, sample_text, Corpus, FontLibrary, TextError, TextStructure, TextStyle,
    MIN_GLYPH_HEIGHT,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGES_DIR: &str = "images";
pub const ANNOTATIONS_DIR: &str = "annotations";
pub const DEBUG_DIR: &str = "debug";
/// Transcription written for ignored words.
pub const IGNORE_TRANSCRIPTION: &str = "###";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot write {path}: {message}")]
    Image { path: String, message: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("malformed annotation line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsConfig {
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
}

impl Default for IntrinsicsConfig {
    fn default() -> Self {
        IntrinsicsConfig {
            width: 720,
            height: 1080,
            fx: None,
            fy: None,
            cx: None,
            cy: None,
        }
    }
}

impl IntrinsicsConfig {
    pub fn resolve(&self) -> Result<CameraIntrinsics, SceneError> {
        CameraIntrinsics::new(
            self.fx.unwrap_or(DEFAULT_FOCAL),
            self.fy.or(self.fx).unwrap_or(DEFAULT_FOCAL),
            self.cx.unwrap_or(self.width as f64 / 2.0),
            self.cy.unwrap_or(self.height as f64 / 2.0),
            self.width,
            self.height,
        )
    }
}

fn default_samples() -> usize {
    20
}

fn default_regions() -> [usize; 2] {
    [2, 6]
}

fn default_presets() -> Vec<PresetName> {
    PresetName::ALL.to_vec()
}

fn default_structures() -> Vec<TextStructure> {
    TextStructure::ALL.to_vec()
}

fn default_glyph_height() -> [f64; 2] {
    [MIN_GLYPH_HEIGHT, 72.0]
}

fn default_grid() -> [usize; 2] {
    [DEFAULT_GRID.0, DEFAULT_GRID.1]
}

/// Batch configuration. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub scenes: Vec<String>,
    pub corpus: String,
    pub fonts_dir: String,
    pub output_dir: String,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples_per_anchor: usize,
    /// Inclusive range for the number of text regions used per anchor.
    #[serde(default = "default_regions")]
    pub regions_per_view: [usize; 2],
    #[serde(default = "default_presets")]
    pub presets: Vec<PresetName>,
    /// Replacement parameters for built-in presets, matched by name.
    #[serde(default)]
    pub preset_overrides: Vec<IlluminationPreset>,
    #[serde(default)]
    pub intrinsics: IntrinsicsConfig,
    #[serde(default)]
    pub proposal: ProposalConfig,
    #[serde(default)]
    pub viewpoints: ViewpointRanges,
    #[serde(default)]
    pub annotation: AnnotationPolicy,
    #[serde(default = "default_structures")]
    pub structures: Vec<TextStructure>,
    /// Inclusive range of nominal glyph heights in pixels.
    #[serde(default = "default_glyph_height")]
    pub glyph_height: [f64; 2],
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|source| PipelineError::Json {
            path: "<config>".into(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let config: PipelineConfig = serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn presets_resolved(&self) -> Vec<IlluminationPreset> {
        self.presets
            .iter()
            .map(|name| {
                self.preset_overrides
                    .iter()
                    .find(|p| p.name == *name)
                    .copied()
                    .unwrap_or_else(|| IlluminationPreset::builtin(*name))
            })
            .collect()
    }

    pub fn validate(&self, base: &Path) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.scenes.is_empty() {
            return bad("at least one scene is required".into());
        }
        for s in &self.scenes {
            if !base.join(s).is_file() {
                return bad(format!("scene file not found: {s}"));
            }
        }
        if !base.join(&self.corpus).is_file() {
            return bad(format!("corpus not found: {}", self.corpus));
        }
        if !base.join(&self.fonts_dir).is_dir() {
            return bad(format!("fonts directory not found: {}", self.fonts_dir));
        }
        if self.samples_per_anchor == 0 {
            return bad("samples_per_anchor must be at least 1".into());
        }
        let [lo, hi] = self.regions_per_view;
        if lo == 0 || lo > hi {
            return bad(format!("regions_per_view must satisfy 1 <= lo <= hi, got [{lo}, {hi}]"));
        }
        if self.presets.is_empty() {
            return bad("at least one preset is required".into());
        }
        for p in self.presets_resolved() {
            p.validate()?;
        }
        if self.structures.is_empty() {
            return bad("at least one text structure is required".into());
        }
        let [g0, g1] = self.glyph_height;
        if !(g0 >= MIN_GLYPH_HEIGHT && g0 <= g1 && g1.is_finite()) {
            return bad(format!("glyph_height must satisfy {MIN_GLYPH_HEIGHT} <= lo <= hi"));
        }
        if self.grid[0] < 2 || self.grid[1] < 2 {
            return bad("decal grid must be at least 2x2".into());
        }
        if !(self.viewpoints.radius >= 0.0 && self.viewpoints.angle_deg >= 0.0) {
            return bad("viewpoint ranges must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.annotation.keep_threshold) {
            return bad("keep_threshold must lie in [0, 1]".into());
        }
        self.proposal.validate()?;
        self.intrinsics.resolve()?;
        let mut ids = BTreeSet::new();
        for s in &self.scenes {
            if !ids.insert(scene_id(Path::new(s))) {
                return bad(format!("two scenes share the id {:?}", scene_id(Path::new(s))));
            }
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Scene id: the directory name for `.../<name>/scene.json`, else the file
/// stem.
pub fn scene_id(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    if stem == "scene" {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
            return dir.to_string();
        }
    }
    stem.to_string()
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Seed of an independent stream: the first eight bytes of
/// `SHA-256(master || len-prefixed parts)`. Streams for different parts
/// never depend on each other, so adding scenes or anchors leaves existing
/// outputs unchanged.
pub fn stream_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

pub fn stream_rng(master: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, parts))
}

/// G-buffer at `pose` under normal lighting and the regions proposed on it.
pub fn regions_for_view(
    world: &IndexedScene,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    proposal: &ProposalConfig,
    rng: &mut impl Rng,
) -> Result<(GBuffer, NormalBoundaryMap, Vec<TextRegion2D>), PipelineError> {
    let g = render_gbuffer(world, pose, intrinsics, &IlluminationPreset::normal())?;
    let map = NormalBoundaryMap::from_gbuffer(&g, proposal.threshold)?;
    let regions = propose_regions(&map, proposal, rng)?;
    Ok((g, map, regions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub image: String,
    pub annotation: String,
    pub scene: String,
    pub anchor: String,
    pub pose: EulerPose,
    pub preset: PresetName,
    pub seed: u64,
    pub words: usize,
    pub ignored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedAnchor {
    pub scene: String,
    pub anchor: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool: String,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub records: Vec<SampleRecord>,
    pub skipped: Vec<SkippedAnchor>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Optional debug outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpFlags {
    pub gbuffer: bool,
    pub regions: bool,
    pub decals: bool,
}

/// One ICDAR line: `x1,y1,...,y4,transcription`, with `###` for ignored
/// words.
pub fn icdar_line(a: &WordAnnotation) -> String {
    let mut s = a.quad.iter().map(i32::to_string).collect::<Vec<_>>().join(",");
    s.push(',');
    s.push_str(if a.ignore {
        IGNORE_TRANSCRIPTION
    } else {
        &a.transcription
    });
    s
}

pub fn format_icdar(annotations: &[WordAnnotation]) -> String {
    annotations.iter().map(|a| icdar_line(a) + "\n").collect()
}

pub fn export_icdar(annotations: &[WordAnnotation], path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, format_icdar(annotations)).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcdarRecord {
    pub quad: [i32; 8],
    pub transcription: String,
}

impl IcdarRecord {
    pub fn ignored(&self) -> bool {
        self.transcription == IGNORE_TRANSCRIPTION
    }
}

/// Parses ICDAR text; the transcription is everything after the eighth
/// comma, so it may itself contain commas.
pub fn parse_icdar(text: &str) -> Result<Vec<IcdarRecord>, PipelineError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(9, ',');
        let mut quad = [0i32; 8];
        for q in &mut quad {
            let field = parts.next().ok_or_else(|| PipelineError::Parse {
                line: i + 1,
                message: "fewer than eight coordinates".into(),
            })?;
            *q = field.trim().parse().map_err(|_| PipelineError::Parse {
                line: i + 1,
                message: format!("bad coordinate {field:?}"),
            })?;
        }
        let transcription = parts.next().ok_or_else(|| PipelineError::Parse {
            line: i + 1,
            message: "missing transcription".into(),
        })?;
        out.push(IcdarRecord {
            quad,
            transcription: transcription.to_string(),
        });
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn save_png(img: &image::RgbImage, path: &Path) -> Result<(), PipelineError> {
    img.save(path).map_err(|e| PipelineError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Inputs shared by every scene of a run.
pub struct Resources {
    pub corpus: Corpus,
    pub fonts: FontLibrary,
    pub intrinsics: CameraIntrinsics,
    pub presets: Vec<IlluminationPreset>,
}

impl Resources {
    pub fn load(config: &PipelineConfig, base: &Path) -> Result<Self, PipelineError> {
        Ok(Resources {
            corpus: Corpus::load(&base.join(&config.corpus))?,
            fonts: FontLibrary::load_dir(&base.join(&config.fonts_dir))?,
            intrinsics: config.intrinsics.resolve()?,
            presets: config.presets_resolved(),
        })
    }

    /// Presets usable in a scene; fog only applies outdoors.
    pub fn presets_for(&self, outdoor: bool) -> Vec<IlluminationPreset> {
        let presets: Vec<_> = self
            .presets
            .iter()
            .filter(|p| p.name != PresetName::Fog || outdoor)
            .copied()
            .collect();
        if presets.is_empty() {
            vec![IlluminationPreset::normal()]
        } else {
            presets
        }
    }
}

/// Anchor view analysis and the text placed from it.
pub struct AnchorSetup {
    pub gbuffer: GBuffer,
    pub boundary: NormalBoundaryMap,
    pub regions: Vec<TextRegion2D>,
    pub placed: Vec<PlacedText>,
}

/// Proposes regions at the anchor and places text in a random subset of
/// them, drawing from the anchor's own stream.
pub fn prepare_anchor(
    config: &PipelineConfig,
    res: &Resources,
    world: &IndexedScene,
    scene: &str,
    anchor: &CameraAnchor,
) -> Result<AnchorSetup, PipelineError> {
    let mut rng = stream_rng(config.seed, &[scene, &anchor.id, "anchor"]);
    let pose = anchor.pose.to_pose();
    let (gbuffer, boundary, regions) = regions_for_view(world, &pose, &res.intrinsics, &config.proposal, &mut rng)?;
    let placed = if regions.is_empty() {
        Vec::new()
    } else {
        place_texts(
            config,
            res,
            world,
            &gbuffer,
            &pose,
            &anchor.id,
            regions.clone(),
            &mut rng,
        )?
    };
    Ok(AnchorSetup {
        gbuffer,
        boundary,
        regions,
        placed,
    })
}

/// One rendered and annotated variation of an anchor view.
pub struct Sample {
    pub pose: EulerPose,
    pub preset: IlluminationPreset,
    pub seed: u64,
    pub view: RenderedView,
    pub annotations: Vec<WordAnnotation>,
}

/// Renders sample `k` of an anchor from its own stream.
pub fn render_anchor_sample(
    config: &PipelineConfig,
    res: &Resources,
    world: &SampleWorld,
    scene: &str,
    anchor: &CameraAnchor,
    k: usize,
) -> Result<Sample, PipelineError> {
    let index = k.to_string();
    let seed = stream_seed(config.seed, &[scene, &anchor.id, "sample", &index]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let any_visible = |pose: &EulerPose| {
        let pose = pose.to_pose();
        world.decals.iter().enumerate().any(|(d, p)| {
            p.words
                .iter()
                .any(|w| compute_visibility(world, d, w, &pose, &res.intrinsics) > 0.0)
        })
    };
    let pose = sample_viewpoints(&anchor.pose, 1, &config.viewpoints, &mut rng, any_visible)[0];
    let preset = *res
        .presets_for(world.base.scene.outdoor)
        .choose(&mut rng)
        .expect("non-empty");
    let cam = pose.to_pose();
    let view = render_sample(world, &cam, &res.intrinsics, &preset)?;
    let annotations = annotate(world, &cam, &res.intrinsics, &config.annotation);
    Ok(Sample {
        pose,
        preset,
        seed,
        view,
        annotations,
    })
}

/// Text decals for one anchor view, built from regions drawn out of
/// `proposed`.
#[allow(clippy::too_many_arguments)]
fn place_texts(
    config: &PipelineConfig,
    res: &Resources,
    world: &IndexedScene,
    g: &GBuffer,
    pose: &CameraPose,
    anchor: &str,
    mut proposed: Vec<TextRegion2D>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PlacedText>, PipelineError> {
    let [lo, hi] = config.regions_per_view;
    let count = rng.gen_range(lo..=hi);
    proposed.shuffle(rng);
    proposed.truncate(count);
    let mut placed = Vec::new();
    for region in proposed {
        let structure = *config.structures.choose(rng).expect("validated non-empty");
        let content = sample_text(&res.corpus, structure, rng);
        let crop =
            image::imageops::crop_imm(&g.rgb_image(), region.x1, region.y1, region.width(), region.height()).to_image();
        let [g0, g1] = config.glyph_height;
        let style = TextStyle {
            font: rng.gen_range(0..res.fonts.len()),
            glyph_height: if g0 < g1 { rng.gen_range(g0..=g1) } else { g0 },
            color: pick_text_color(&crop, rng),
        };
        let texture = match rasterize_text(&content, &style, &res.fonts, region.width(), region.height()) {
            Ok(t) => t,
            Err(TextError::RegionTooSmall { .. }) => {
                log::debug!("anchor {anchor}: text does not fit region {region:?}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let Some(quad) = lift_region(&region, g, &res.intrinsics, pose, world)? else {
            log::debug!("anchor {anchor}: region {region:?} could not be lifted");
            continue;
        };
        let Some(rect) = rectify(&quad, &WORLD_UP, &pose.right()) else {
            log::debug!("anchor {anchor}: region {region:?} is degenerate in 3D");
            continue;
        };
        placed.push(deform_text_mesh(
            &rect,
            &world.accel,
            (config.grid[0], config.grid[1]),
            texture,
            region,
            anchor,
        )?);
    }
    Ok(placed)
}

/// Runs the whole pipeline and writes images, annotations and the manifest
/// below the configured output directory (relative to `base`). Previous
/// outputs in that directory are replaced.
pub fn run_pipeline(config: &PipelineConfig, base: &Path, dump: DumpFlags) -> Result<DatasetManifest, PipelineError> {
    config.validate(base)?;
    let res = Resources::load(config, base)?;
    let out = base.join(&config.output_dir);
    for dir in [IMAGES_DIR, ANNOTATIONS_DIR, DEBUG_DIR] {
        let d = out.join(dir);
        if d.exists() {
            std::fs::remove_dir_all(&d).map_err(io_err(&d))?;
        }
    }
    let (images, annotations) = (out.join(IMAGES_DIR), out.join(ANNOTATIONS_DIR));
    std::fs::create_dir_all(&images).map_err(io_err(&images))?;
    std::fs::create_dir_all(&annotations).map_err(io_err(&annotations))?;
    let debug = out.join(DEBUG_DIR);
    if dump.gbuffer || dump.regions || dump.decals {
        std::fs::create_dir_all(&debug).map_err(io_err(&debug))?;
    }

    let mut manifest = DatasetManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: config.digest(),
        seed: config.seed,
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for scene_path in &config.scenes {
        let scene_path = base.join(scene_path);
        let sid = scene_id(&scene_path);
        let world = IndexedScene::new(load_scene(&scene_path)?)?;
        log::info!(
            "scene {sid}: {} triangles, {} anchors",
            world.scene.triangle_count(),
            world.scene.anchors.len()
        );
        for anchor in world.scene.anchors.clone() {
            run_anchor(config, &res, &world, &sid, &anchor, &out, dump, &mut manifest)?;
        }
    }
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[allow(clippy::too_many_arguments)]
fn run_anchor(
    config: &PipelineConfig,
    res: &Resources,
    world: &IndexedScene,
    sid: &str,
    anchor: &CameraAnchor,
    out: &Path,
    dump: DumpFlags,
    manifest: &mut DatasetManifest,
) -> Result<(), PipelineError> {
    let tag = format!("{}_{}", file_safe(sid), file_safe(&anchor.id));
    let setup = prepare_anchor(config, res, world, sid, anchor)?;
    let debug = out.join(DEBUG_DIR);
    if dump.gbuffer {
        setup.gbuffer.save_debug(&debug, &tag)?;
    }
    if dump.regions {
        let p = debug.join(format!("{tag}_boundary.png"));
        setup.boundary.to_image().save(&p).map_err(|e| PipelineError::Image {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        write_json(&debug.join(format!("{tag}_regions.json")), &setup.regions)?;
    }
    let skip = |manifest: &mut DatasetManifest, reason: &str| {
        log::warn!("scene {sid} anchor {}: skipped, {reason}", anchor.id);
        manifest.skipped.push(SkippedAnchor {
            scene: sid.to_string(),
            anchor: anchor.id.clone(),
            reason: reason.to_string(),
        });
    };
    if setup.regions.is_empty() {
        skip(manifest, "no text regions in view");
        return Ok(());
    }
    if setup.placed.is_empty() {
        skip(manifest, "no region could hold text");
        return Ok(());
    }
    if dump.decals {
        for (i, p) in setup.placed.iter().enumerate() {
            let path = debug.join(format!("{tag}_decal{i}.obj"));
            std::fs::write(&path, p.to_obj()).map_err(io_err(&path))?;
        }
    }
    let sample_world = SampleWorld::new(world, setup.placed)?;
    let render_one = |k: usize| -> Result<SampleRecord, PipelineError> {
        let Sample {
            pose,
            preset,
            seed,
            view,
            annotations: anns,
        } = render_anchor_sample(config, res, &sample_world, sid, anchor, k)?;
        let name = format!("{tag}_{k:03}");
        let image = format!("{IMAGES_DIR}/{name}.png");
        let annotation = format!("{ANNOTATIONS_DIR}/gt_{name}.txt");
        save_png(&view.image, &out.join(&image))?;
        export_icdar(&anns, &out.join(&annotation))?;
        if config.annotation.char_quads {
            write_json(&out.join(ANNOTATIONS_DIR).join(format!("{name}.json")), &anns)?;
        }
        log::info!("{image}: {} words, preset {}", anns.len(), preset.name);
        Ok(SampleRecord {
            image,
            annotation,
            scene: sid.to_string(),
            anchor: anchor.id.clone(),
            pose,
            preset: preset.name,
            seed,
            words: anns.len(),
            ignored: anns.iter().filter(|a| a.ignore).count(),
        })
    };
    // Samples own their streams and output paths, so workers can take them
    // in any order; records are gathered back in sample order.
    let n = config.samples_per_anchor;
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<(usize, Result<SampleRecord, PipelineError>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if k >= n {
                            break done;
                        }
                        done.push((k, render_one(k)));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sample worker panicked"))
            .collect()
    });
    results.sort_by_key(|(k, _)| *k);
    for (_, record) in results {
        manifest.records.push(record?);
    }
    Ok(())
}
