mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textscape::gbuffer::{dequantize_depth, render_gbuffer, IndexedScene, VOID_DEPTH};
use textscape::geometry::{Ray, Vec3};
use textscape::scene::{unproject, CameraIntrinsics, CameraPose, IlluminationPreset, Light, PresetName};

fn sun(direction: [f64; 3], intensity: f64) -> Light {
    Light::Directional {
        direction,
        color: [1.0, 1.0, 1.0],
        intensity,
    }
}

#[test]
fn nothing_in_view_is_all_void() {
    let world = IndexedScene::new(scene_of(vec![plane_z(-5.0, 2.0)], vec![])).unwrap();
    let intr = CameraIntrinsics::centered(40, 30);
    let g = render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).unwrap();
    assert!(g.hit_mask.iter().all(|h| !h));
    assert!(g.depth_q.iter().all(|&q| q == VOID_DEPTH));
    assert!(g.depth_f.iter().all(|d| d.is_infinite()));
}

#[test]
fn facing_plane_encodes_toward_camera() {
    let world = IndexedScene::new(scene_of(vec![plane_z(5.0, 100.0)], vec![])).unwrap();
    let intr = CameraIntrinsics::new(50.0, 50.0, 20.0, 15.0, 40, 30).unwrap();
    let g = render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).unwrap();
    for i in 0..g.hit_mask.len() {
        assert!(g.hit_mask[i]);
        assert!((g.normal_f[i] - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert_eq!(g.normal_8[i], [128, 128, 0]);
        assert!((g.depth_f[i] - 5.0).abs() < 1e-9);
        assert_eq!(g.depth_q[i], 102);
    }
}

#[test]
fn zero_area_image_is_rejected() {
    let world = IndexedScene::new(scene_of(vec![plane_z(5.0, 1.0)], vec![])).unwrap();
    let mut intr = CameraIntrinsics::centered(10, 10);
    intr.width = 0;
    assert!(render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).is_err());
}

#[test]
fn bright_preset_doubles_single_light_shading() {
    // Light travelling along +z hits the plane head-on, so the diffuse
    // term is albedo * k_d * intensity everywhere.
    let world = IndexedScene::new(scene_of(vec![plane_z(5.0, 100.0)], vec![sun([0.0, 0.0, 1.0], 0.9)])).unwrap();
    let intr = CameraIntrinsics::centered(16, 12);
    let normal = render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).unwrap();
    let bright = render_gbuffer(
        &world,
        &axis_camera(),
        &intr,
        &IlluminationPreset::builtin(PresetName::Bright),
    )
    .unwrap();
    let shaded: f64 = 0.8 * 0.7 * 0.9;
    let byte = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
    assert!(normal.rgb.iter().all(|&c| c == byte(shaded)));
    assert!(bright.rgb.iter().all(|&c| c == byte(2.0 * shaded)));

    let dark = render_gbuffer(
        &world,
        &axis_camera(),
        &intr,
        &IlluminationPreset::builtin(PresetName::Dark),
    )
    .unwrap();
    assert!(dark.rgb.iter().all(|&c| c == byte(0.35 * shaded)));
}

#[test]
fn fog_blends_toward_fog_color_with_depth() {
    let world = IndexedScene::new(scene_of(
        vec![plane_z(10.0, 100.0)],
        vec![Light::Ambient {
            color: [1.0; 3],
            intensity: 1.0,
        }],
    ))
    .unwrap();
    let intr = CameraIntrinsics::centered(8, 8);
    let fog = IlluminationPreset::builtin(PresetName::Fog);
    let g = render_gbuffer(&world, &axis_camera(), &intr, &fog).unwrap();
    let keep = (-IlluminationPreset::FOG_DENSITY * 10.0).exp();
    let surface = 0.8 * 0.3;
    for k in 0..3 {
        let want = keep * surface + (1.0 - keep) * IlluminationPreset::FOG_COLOR[k];
        assert_eq!(g.rgb[k], (want * 255.0).round() as u8);
    }
}

#[test]
fn unprojected_depth_lies_on_geometry() {
    let sphere = translated(&uv_sphere(1.5, 24, 48), Vec3::new(0.3, -0.2, 6.0));
    let world = IndexedScene::new(scene_of(vec![sphere, plane_z(9.0, 20.0)], vec![])).unwrap();
    let pose = CameraPose::from_euler_deg(Vec3::new(0.0, 0.0, 0.0), 0.0, 90.0, 0.0);
    // Pitch 90 points the camera up the world z axis, toward the scene.
    assert!((pose.forward() - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    let intr = CameraIntrinsics::new(60.0, 60.0, 32.0, 24.0, 64, 48).unwrap();
    let g = render_gbuffer(&world, &pose, &intr, &IlluminationPreset::normal()).unwrap();
    let mut checked = 0;
    for y in 0..g.height {
        for x in 0..g.width {
            let i = g.index(x, y);
            if !g.hit_mask[i] {
                continue;
            }
            let p = unproject([x as f64 + 0.5, y as f64 + 0.5], g.depth_f[i], &intr, &pose).unwrap();
            let hit = world.accel.raycast(&Ray::through(pose.position, p).unwrap()).unwrap();
            assert!((hit.point - p).norm() < 1e-4, "pixel ({x},{y})");
            assert!((g.normal_f[i].norm() - 1.0).abs() < 1e-4);
            let err = g.depth_f[i] - dequantize_depth(g.depth_q[i], 50.0);
            assert!((0.0..50.0 / 1024.0).contains(&err));
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn rendering_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let meshes = (0..5)
        .map(|_| {
            let c = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(4.0..8.0),
            );
            translated(&uv_sphere(rng.gen_range(0.3..1.0), 8, 12), c)
        })
        .collect();
    let world = IndexedScene::new(scene_of(
        meshes,
        vec![
            sun([0.0, 0.6, 0.8], 1.0),
            Light::Ambient {
                color: [1.0; 3],
                intensity: 0.5,
            },
        ],
    ))
    .unwrap();
    let intr = CameraIntrinsics::new(40.0, 40.0, 24.0, 16.0, 48, 32).unwrap();
    let a = render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).unwrap();
    let b = render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).unwrap();
    assert_eq!(a, b);
    assert!(a.hit_mask.iter().any(|&h| h) && a.hit_mask.iter().any(|&h| !h));
}

#[test]
fn debug_dump_writes_three_pngs() {
    let world = IndexedScene::new(scene_of(vec![plane_z(5.0, 1.0)], vec![])).unwrap();
    let intr = CameraIntrinsics::centered(12, 10);
    let g = render_gbuffer(&world, &axis_camera(), &intr, &IlluminationPreset::normal()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    g.save_debug(dir.path(), "a0").unwrap();
    for name in ["a0_rgb.png", "a0_normal.png", "a0_depth.png"] {
        assert!(dir.path().join(name).is_file());
    }
    let depth = image::open(dir.path().join("a0_depth.png")).unwrap().into_luma16();
    assert_eq!(depth.as_raw(), &g.depth_q);
}
