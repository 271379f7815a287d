use riskcot::config::PipelineConfig;
use riskcot::detector::{ClusterParams, DetectorConfig};
use riskcot::eval::{evaluate_suite, to_csv};
use riskcot::pipeline::Pipeline;
use riskcot::reasoner::SpeedDecision;
use riskcot::scenario::{generate, generate_suite, Manifest, ScenarioSpec, Template};
use riskcot::scene::io::{read_scene, write_scene, CloudFormat};
use riskcot::scene::Maneuver;

/// ASCII clouds round-trip exactly; binary clouds store f32, so only the
/// decisions are compared.
#[test]
fn written_scenes_analyze_like_in_memory_ones() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(PipelineConfig::default()).unwrap();
    for (i, t) in Template::ALL.into_iter().enumerate() {
        let scene = generate(&ScenarioSpec {
            n_objects: 2,
            ..ScenarioSpec::new(t, 30 + i as u64)
        })
        .unwrap();
        let format = if i % 2 == 0 { CloudFormat::Ascii } else { CloudFormat::Binary };
        let path = write_scene(dir.path(), t.name(), &scene, format).unwrap();
        let back = read_scene(&path).unwrap();
        let a = pipeline.run(&scene).unwrap().1;
        let b = pipeline.run(&back).unwrap().1;
        if format == CloudFormat::Ascii {
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap(), "{}", t.name());
        } else {
            assert_eq!((a.trace.speed, a.trace.path), (b.trace.speed, b.trace.path), "{}", t.name());
            assert_eq!(a.objects.len(), b.objects.len());
        }
    }
}

#[test]
fn evaluation_ignores_manifest_order() {
    let dir = tempfile::tempdir().unwrap();
    let base = ScenarioSpec::new(Template::EmptyRoad, 0);
    let (path, manifest) = generate_suite(&Template::ALL, 2, 3, &base, dir.path(), CloudFormat::Binary).unwrap();
    let pipeline = Pipeline::new(PipelineConfig::default()).unwrap();
    let (forward, _) = evaluate_suite(&path, &manifest, &pipeline, 3).unwrap();
    let mut scenes = manifest.scenes.clone();
    scenes.reverse();
    scenes.rotate_left(5);
    let (shuffled, _) = evaluate_suite(&path, &Manifest { scenes }, &pipeline, 1).unwrap();
    assert_eq!(to_csv(&forward), to_csv(&shuffled));
}

/// The clustering detector sees only sensor-facing surfaces and estimates
/// no velocity, so moving scenes are not expected to match the templates.
/// Hazards that do not depend on motion must still be handled.
#[test]
fn geometric_detector_runs_the_full_pipeline() {
    let pipeline = Pipeline::new(PipelineConfig {
        detector: DetectorConfig::Geometric(ClusterParams::default()),
        ..PipelineConfig::default()
    })
    .unwrap();
    for seed in 0..5 {
        let empty = generate(&ScenarioSpec::new(Template::EmptyRoad, seed)).unwrap();
        let (detected, a) = pipeline.run(&empty).unwrap();
        assert!(detected.objects.is_empty());
        assert_eq!((a.trace.speed, a.trace.path), (SpeedDecision::SpeedLimit, Maneuver::Straight));

        let ped = generate(&ScenarioSpec::new(Template::PedestrianCrossing, seed)).unwrap();
        let (detected, a) = pipeline.run(&ped).unwrap();
        assert!(!detected.objects.is_empty());
        assert_eq!(a.trace.speed, SpeedDecision::Brake, "seed {seed}: {}", a.trace.explanation);
    }
}
