//! Procedural demo worlds: a furnished room and an outdoor street, each
//! written as a loadable scene directory with anchors, plus a corpus, the
//! bundled font and ready-to-run pipeline configs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::geometry::{TriMesh, Vec3};
use crate::pipeline::{IntrinsicsConfig, PipelineConfig, PipelineError};
use crate::scene::{save_anchors, CameraAnchor, EulerPose, FogSettings, Light, Material, Scene, SceneMesh};
use crate::text::EMBEDDED_FONT;

const CORPUS: &str = "\
Open daily from nine to five
Exit
Fresh bread and coffee
Mind the step
Platform two
Library quiet zone
No parking
Welcome home
Spring sale now on
Room 204
Push to open
Fire extinguisher
Meeting in progress
Garden centre
Keep left
Lost and found
Hardware and tools
Please wait here
Cinema tonight
Bicycle repairs
";

/// Paths written by [`make_demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct DemoPaths {
    pub room_scene: PathBuf,
    pub street_scene: PathBuf,
    pub room_config: PathBuf,
    pub street_config: PathBuf,
}

fn mesh(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> TriMesh {
    TriMesh::new(vertices, triangles, None, None).expect("demo geometry is valid")
}

/// Quad `o, o+a, o+a+b, o+b` facing along `a x b`.
fn quad(o: Vec3, a: Vec3, b: Vec3) -> TriMesh {
    mesh(vec![o, o + a, o + a + b, o + b], vec![[0, 1, 2], [0, 2, 3]])
}

/// Axis-aligned box without a bottom face, wound outward.
fn open_box(min: Vec3, max: Vec3) -> TriMesh {
    let d = max - min;
    let (x, y, z) = (Vec3::x() * d.x, Vec3::y() * d.y, Vec3::z() * d.z);
    let faces = [
        quad(min, z, y),
        quad(min + x, y, z),
        quad(min, x, z),
        quad(min + y, z, x),
        quad(min + z, x, y),
    ];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for f in faces {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(f.vertices());
        triangles.extend(f.triangles().iter().map(|t| t.map(|k| k + base)));
    }
    mesh(vertices, triangles)
}

/// Smooth-shaded open cylinder standing on `base`.
fn cylinder(base: Vec3, radius: f64, height: f64, segments: u32) -> TriMesh {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    for k in 0..segments {
        let a = std::f64::consts::TAU * k as f64 / segments as f64;
        let n = Vec3::new(a.cos(), a.sin(), 0.0);
        vertices.push(base + n * radius);
        vertices.push(base + n * radius + Vec3::z() * height);
        normals.extend([n, n]);
    }
    let mut triangles = Vec::new();
    for k in 0..segments {
        let (b0, t0) = (2 * k, 2 * k + 1);
        let (b1, t1) = (2 * ((k + 1) % segments), 2 * ((k + 1) % segments) + 1);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
    }
    TriMesh::new(vertices, triangles, Some(normals), None).expect("demo geometry is valid")
}

fn checker(size: u32, cells: u32, a: [u8; 3], b: [u8; 3]) -> RgbImage {
    let cell = size / cells;
    RgbImage::from_fn(size, size, |x, y| {
        if (x / cell + y / cell).is_multiple_of(2) {
            Rgb(a)
        } else {
            Rgb(b)
        }
    })
}

fn scene_mesh(path: &str, material: &str, mesh: TriMesh) -> SceneMesh {
    SceneMesh {
        path: path.to_string(),
        material: material.to_string(),
        mesh,
    }
}

fn anchor(id: &str, position: [f64; 3], yaw: f64, pitch: f64, label: &str) -> CameraAnchor {
    CameraAnchor {
        id: id.to_string(),
        pose: EulerPose {
            position,
            yaw,
            pitch,
            roll: 0.0,
        },
        label: label.to_string(),
    }
}

/// A 12 x 10 x 4 room with a checkered floor, a crate, a pillar and a
/// notice board on the far wall.
pub fn room_scene() -> Scene {
    let (w, d, h) = (12.0, 10.0, 4.0);
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    let floor = TriMesh::new(
        vec![Vec3::zeros(), x * w, x * w + y * d, y * d],
        vec![[0, 1, 2], [0, 2, 3]],
        None,
        Some(vec![[0.0, 0.0], [6.0, 0.0], [6.0, 5.0], [0.0, 5.0]]),
    )
    .expect("demo geometry is valid");
    let meshes = vec![
        scene_mesh("meshes/floor.obj", "floor", floor),
        scene_mesh("meshes/ceiling.obj", "ceiling", quad(z * h, y * d, x * w)),
        scene_mesh("meshes/wall_east.obj", "plaster", quad(x * w, z * h, y * d)),
        scene_mesh("meshes/wall_west.obj", "plaster", quad(Vec3::zeros(), y * d, z * h)),
        scene_mesh(
            "meshes/wall_south.obj",
            "plaster_warm",
            quad(Vec3::zeros(), z * h, x * w),
        ),
        scene_mesh("meshes/wall_north.obj", "plaster_warm", quad(y * d, x * w, z * h)),
        scene_mesh(
            "meshes/board.obj",
            "board",
            quad(Vec3::new(w - 0.05, 3.5, 1.0), z * 1.6, y * 3.0),
        ),
        scene_mesh(
            "meshes/crate.obj",
            "wood",
            open_box(Vec3::new(8.0, 1.5, 0.0), Vec3::new(9.5, 3.0, 1.2)),
        ),
        scene_mesh(
            "meshes/pillar.obj",
            "stone",
            cylinder(Vec3::new(7.0, 7.5, 0.0), 0.6, h, 48),
        ),
    ];
    let mut materials = BTreeMap::new();
    materials.insert(
        "floor".to_string(),
        Material {
            texture: Some("textures/checker.png".into()),
            ..Material::diffuse_color([0.6, 0.6, 0.6])
        },
    );
    materials.insert("ceiling".into(), Material::diffuse_color([0.92, 0.92, 0.9]));
    materials.insert("plaster".into(), Material::diffuse_color([0.85, 0.83, 0.78]));
    materials.insert("plaster_warm".into(), Material::diffuse_color([0.8, 0.72, 0.62]));
    materials.insert("board".into(), Material::diffuse_color([0.25, 0.35, 0.3]));
    materials.insert("wood".into(), Material::diffuse_color([0.55, 0.38, 0.2]));
    materials.insert("stone".into(), Material::diffuse_color([0.7, 0.7, 0.72]));
    let lights = vec![
        Light::Directional {
            direction: Vec3::new(0.4, 0.3, -1.0).normalize().into(),
            color: [1.0, 0.97, 0.9],
            intensity: 0.5,
        },
        Light::Point {
            position: [5.0, 5.0, 3.6],
            color: [1.0, 0.95, 0.85],
            intensity: 0.7,
        },
        Light::Ambient {
            color: [1.0, 1.0, 1.0],
            intensity: 1.2,
        },
    ];
    let anchors = vec![anchor("a0", [1.5, 5.0, 1.6], 0.0, 0.0, "facing the notice board")];
    Scene::new(meshes, materials, lights, FogSettings::NONE, 50.0, anchors).expect("demo scene is valid")
}

/// A street between two rows of buildings.
pub fn street_scene() -> Scene {
    let mut meshes = vec![scene_mesh(
        "meshes/ground.obj",
        "asphalt",
        quad(Vec3::new(-10.0, -20.0, 0.0), Vec3::x() * 80.0, Vec3::y() * 40.0),
    )];
    let blocks = [
        (5.0, 12.0, 6.0, 9.0),
        (14.0, 22.0, 6.0, 14.0),
        (24.0, 30.0, 6.0, 7.0),
        (6.0, 15.0, -14.0, 8.0),
        (17.0, 27.0, -14.0, 12.0),
    ];
    for (i, &(x0, x1, y0, height)) in blocks.iter().enumerate() {
        let min = Vec3::new(x0, y0, 0.0);
        let max = Vec3::new(x1, y0 + 8.0, height);
        let material = if i % 2 == 0 { "brick" } else { "concrete" };
        meshes.push(scene_mesh(
            &format!("meshes/building{i}.obj"),
            material,
            open_box(min, max),
        ));
    }
    let mut materials = BTreeMap::new();
    materials.insert("asphalt".to_string(), Material::diffuse_color([0.3, 0.3, 0.32]));
    materials.insert("brick".into(), Material::diffuse_color([0.62, 0.32, 0.25]));
    materials.insert("concrete".into(), Material::diffuse_color([0.75, 0.74, 0.7]));
    let lights = vec![
        Light::Directional {
            direction: Vec3::new(-0.3, 0.5, -0.8).normalize().into(),
            color: [1.0, 0.98, 0.92],
            intensity: 0.9,
        },
        Light::Ambient {
            color: [0.9, 0.95, 1.0],
            intensity: 1.2,
        },
    ];
    let anchors = vec![
        anchor("s0", [2.0, 0.0, 1.7], 20.0, 5.0, "left frontage"),
        anchor("s1", [4.0, 0.0, 1.7], -25.0, 5.0, "right frontage"),
    ];
    let mut scene =
        Scene::new(meshes, materials, lights, FogSettings::NONE, 100.0, anchors).expect("demo scene is valid");
    scene.outdoor = true;
    scene
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn save_scene(scene: &Scene, dir: &Path) -> Result<PathBuf, PipelineError> {
    let path = scene.save(dir)?;
    save_anchors(&dir.join(crate::scene::ANCHORS_FILE), &scene.anchors)?;
    Ok(path)
}

fn demo_config(scene: &str, output: &str) -> PipelineConfig {
    let mut config = PipelineConfig::from_json(
        r#"{"scenes": [], "corpus": "corpus.txt", "fonts_dir": "fonts", "output_dir": "", "seed": 7}"#,
    )
    .expect("defaults parse");
    config.scenes = vec![scene.to_string()];
    config.output_dir = output.to_string();
    config.intrinsics = IntrinsicsConfig {
        fx: Some(800.0),
        ..IntrinsicsConfig::default()
    };
    config
}

/// Writes both demo worlds, a corpus, the bundled font and one pipeline
/// config per world into `out`.
pub fn make_demo(out: &Path) -> Result<DemoPaths, PipelineError> {
    let room_dir = out.join("room");
    let room_scene = save_scene(&room_scene(), &room_dir)?;
    let textures = room_dir.join("textures");
    std::fs::create_dir_all(&textures).map_err(|source| PipelineError::Io {
        path: textures.display().to_string(),
        source,
    })?;
    let tex_path = textures.join("checker.png");
    checker(256, 8, [200, 196, 188], [70, 68, 66])
        .save(&tex_path)
        .map_err(|e| PipelineError::Image {
            path: tex_path.display().to_string(),
            message: e.to_string(),
        })?;
    let street_scene = save_scene(&street_scene(), &out.join("street"))?;

    write(&out.join("corpus.txt"), CORPUS.as_bytes())?;
    let fonts = out.join("fonts");
    std::fs::create_dir_all(&fonts).map_err(|source| PipelineError::Io {
        path: fonts.display().to_string(),
        source,
    })?;
    write(&fonts.join("DejaVuSans.ttf"), EMBEDDED_FONT)?;

    let room_config = out.join("config.json");
    let street_config = out.join("street_config.json");
    for (path, config) in [
        (&room_config, demo_config("room/scene.json", "output/room")),
        (&street_config, demo_config("street/scene.json", "output/street")),
    ] {
        let mut text = serde_json::to_string_pretty(&config).expect("config serializes");
        text.push('\n');
        write(path, text.as_bytes())?;
    }
    Ok(DemoPaths {
        room_scene,
        street_scene,
        room_config,
        street_config,
    })
}
