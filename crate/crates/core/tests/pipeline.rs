mod common;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textscape::demo::make_demo;
use textscape::gbuffer::IndexedScene;
use textscape::pipeline::{
    format_icdar, parse_icdar, regions_for_view, run_pipeline, scene_id, stream_seed, DatasetManifest, DumpFlags,
    IntrinsicsConfig, PipelineConfig, PipelineError, MANIFEST_FILE,
};
use textscape::render::WordAnnotation;
use textscape::scene::{load_scene, CameraIntrinsics};

fn small_config(dir: &Path, scenes: &[&str], output: &str, seed: u64) -> PipelineConfig {
    let (mut config, _) = PipelineConfig::load(&dir.join("config.json")).unwrap();
    config.scenes = scenes.iter().map(|s| s.to_string()).collect();
    config.output_dir = output.to_string();
    config.seed = seed;
    config.samples_per_anchor = 2;
    config.intrinsics = IntrinsicsConfig {
        width: 360,
        height: 540,
        fx: Some(400.0),
        ..IntrinsicsConfig::default()
    };
    config
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn stream_seeds_are_stable_and_separated() {
    let a = stream_seed(7, &["room", "a0", "sample", "0"]);
    assert_eq!(a, stream_seed(7, &["room", "a0", "sample", "0"]));
    assert_ne!(a, stream_seed(8, &["room", "a0", "sample", "0"]));
    assert_ne!(a, stream_seed(7, &["room", "a0", "sample", "1"]));
    // Length prefixes keep part boundaries significant.
    assert_ne!(stream_seed(7, &["ab", "c"]), stream_seed(7, &["a", "bc"]));
}

#[test]
fn scene_ids_come_from_directory_or_stem() {
    assert_eq!(scene_id(Path::new("worlds/room/scene.json")), "room");
    assert_eq!(scene_id(Path::new("worlds/lobby.json")), "lobby");
}

#[test]
fn icdar_round_trip_keeps_commas_and_marks_ignored_words() {
    let anns = vec![
        WordAnnotation {
            quad: [1, 2, 30, 2, 30, 12, 1, 12],
            transcription: "Hello,".into(),
            visibility: 1.0,
            ignore: false,
            chars: None,
            word_id: 1,
        },
        WordAnnotation {
            quad: [5, 6, 7, 6, 7, 8, 5, 8],
            transcription: "tiny".into(),
            visibility: 0.1,
            ignore: true,
            chars: None,
            word_id: 2,
        },
    ];
    let text = format_icdar(&anns);
    assert_eq!(text, "1,2,30,2,30,12,1,12,Hello,\n5,6,7,6,7,8,5,8,###\n");
    let parsed = parse_icdar(&text).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[0].quad, anns[0].quad);
    assert_eq!(parsed[0].transcription, "Hello,");
    assert!(parsed[1].ignored());
    assert!(matches!(
        parse_icdar("1,2,3\n"),
        Err(PipelineError::Parse { line: 1, .. })
    ));
    assert!(matches!(
        parse_icdar("1,2,3,4,5,6,7,x,w\n"),
        Err(PipelineError::Parse { .. })
    ));
}

#[test]
fn config_validation_reports_problems() {
    let dir = tempfile::tempdir().unwrap();
    make_demo(dir.path()).unwrap();
    let (config, base) = PipelineConfig::load(&dir.path().join("config.json")).unwrap();
    config.validate(&base).unwrap();

    let mut bad = config.clone();
    bad.scenes = vec!["missing/scene.json".into()];
    assert!(matches!(bad.validate(&base), Err(PipelineError::Config(_))));
    let mut bad = config.clone();
    bad.regions_per_view = [3, 2];
    assert!(bad.validate(&base).is_err());
    let mut bad = config.clone();
    bad.glyph_height = [4.0, 10.0];
    assert!(bad.validate(&base).is_err());
    let mut bad = config.clone();
    bad.scenes = vec!["room/scene.json".into(), "room/scene.json".into()];
    assert!(bad.validate(&base).is_err());
    let mut bad = config;
    bad.samples_per_anchor = 0;
    assert!(bad.validate(&base).is_err());
    assert!(PipelineConfig::from_json(r#"{"scenes": [], "bogus": 1}"#).is_err());
}

#[test]
fn config_digest_tracks_content() {
    let dir = tempfile::tempdir().unwrap();
    make_demo(dir.path()).unwrap();
    let (config, _) = PipelineConfig::load(&dir.path().join("config.json")).unwrap();
    let mut other = config.clone();
    assert_eq!(config.digest(), other.digest());
    other.seed += 1;
    assert_ne!(config.digest(), other.digest());
    assert_eq!(config.digest().len(), 64);
}

#[test]
fn demo_scenes_load_and_offer_regions() {
    let dir = tempfile::tempdir().unwrap();
    let paths = make_demo(dir.path()).unwrap();
    let room = load_scene(&paths.room_scene).unwrap();
    assert!(room.texture("floor").is_some());
    assert!(!room.outdoor);
    let street = load_scene(&paths.street_scene).unwrap();
    assert!(street.outdoor);
    let k = CameraIntrinsics::new(400.0, 400.0, 180.0, 270.0, 360, 540).unwrap();
    for scene in [room, street] {
        let world = IndexedScene::new(scene).unwrap();
        for anchor in &world.scene.anchors {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let (_, _, regions) =
                regions_for_view(&world, &anchor.pose.to_pose(), &k, &Default::default(), &mut rng).unwrap();
            assert!(!regions.is_empty(), "anchor {} has no regions", anchor.id);
        }
    }
}

#[test]
fn pipeline_writes_consistent_dataset() {
    let dir = tempfile::tempdir().unwrap();
    make_demo(dir.path()).unwrap();
    let mut config = small_config(dir.path(), &["room/scene.json"], "out", 11);
    config.annotation.char_quads = true;
    let dump = DumpFlags {
        gbuffer: true,
        regions: true,
        decals: true,
    };
    let manifest = run_pipeline(&config, dir.path(), dump).unwrap();
    let out = dir.path().join("out");
    assert_eq!(manifest, DatasetManifest::load(&out.join(MANIFEST_FILE)).unwrap());
    assert_eq!(manifest.config_digest, config.digest());
    assert!(manifest.skipped.is_empty());
    assert_eq!(manifest.records.len(), 2);
    let count = |d: &str| {
        std::fs::read_dir(out.join(d))
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == "png" || x == "txt")
            })
            .count()
    };
    assert_eq!(count("images"), 2);
    assert_eq!(count("annotations"), 2);
    let mut total_words = 0;
    for rec in &manifest.records {
        let img = image::open(out.join(&rec.image)).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (360, 540));
        let text = String::from_utf8(read(&out.join(&rec.annotation))).unwrap();
        assert!(!text.contains('\r'));
        let parsed = parse_icdar(&text).unwrap();
        assert_eq!(parsed.len(), rec.words);
        assert_eq!(parsed.iter().filter(|r| r.ignored()).count(), rec.ignored);
        for r in &parsed {
            for c in r.quad.chunks(2) {
                assert!((0..360).contains(&c[0]) && (0..540).contains(&c[1]), "{:?}", r.quad);
            }
        }
        total_words += rec.words;
    }
    assert!(total_words > 0, "no words were annotated");
    let debug: Vec<_> = std::fs::read_dir(out.join("debug"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    let has = |suffix: &str| debug.iter().any(|n| n.to_string_lossy().ends_with(suffix));
    assert!(has("_boundary.png") && has("_regions.json") && has(".obj"));
}

#[test]
fn pipeline_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    make_demo(dir.path()).unwrap();
    let a = run_pipeline(
        &small_config(dir.path(), &["room/scene.json"], "a", 5),
        dir.path(),
        DumpFlags::default(),
    )
    .unwrap();
    let b = run_pipeline(
        &small_config(dir.path(), &["room/scene.json"], "b", 5),
        dir.path(),
        DumpFlags::default(),
    )
    .unwrap();
    assert_eq!(a.records, b.records);
    for rec in &a.records {
        assert_eq!(
            read(&dir.path().join("a").join(&rec.image)),
            read(&dir.path().join("b").join(&rec.image))
        );
        assert_eq!(
            read(&dir.path().join("a").join(&rec.annotation)),
            read(&dir.path().join("b").join(&rec.annotation))
        );
    }
    let c = run_pipeline(
        &small_config(dir.path(), &["room/scene.json"], "c", 6),
        dir.path(),
        DumpFlags::default(),
    )
    .unwrap();
    let differs = a
        .records
        .iter()
        .zip(&c.records)
        .any(|(x, y)| read(&dir.path().join("a").join(&x.image)) != read(&dir.path().join("c").join(&y.image)));
    assert!(differs);
}

#[test]
fn adding_a_scene_leaves_existing_outputs_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    make_demo(dir.path()).unwrap();
    let one = run_pipeline(
        &small_config(dir.path(), &["room/scene.json"], "one", 3),
        dir.path(),
        DumpFlags::default(),
    )
    .unwrap();
    let both = run_pipeline(
        &small_config(dir.path(), &["room/scene.json", "street/scene.json"], "both", 3),
        dir.path(),
        DumpFlags::default(),
    )
    .unwrap();
    for rec in &one.records {
        let twin = both.records.iter().find(|r| r.image == rec.image).expect("record kept");
        assert_eq!(twin.seed, rec.seed);
        assert_eq!(
            read(&dir.path().join("one").join(&rec.image)),
            read(&dir.path().join("both").join(&rec.image))
        );
    }
    assert!(both.records.iter().any(|r| r.scene == "street"));
}

#[test]
fn rerun_replaces_previous_outputs() {
    let dir = tempfile::tempdir().unwrap();
    make_demo(dir.path()).unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(out.join("images")).unwrap();
    std::fs::write(out.join("images").join("stale.png"), b"x").unwrap();
    run_pipeline(
        &small_config(dir.path(), &["room/scene.json"], "out", 1),
        dir.path(),
        DumpFlags::default(),
    )
    .unwrap();
    assert!(!out.join("images").join("stale.png").exists());
}
