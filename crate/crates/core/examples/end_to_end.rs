//! One scene through every stage: generate, write and reload, detect, assess,
//! build the graph, refine and reason.

use riskcot::config::PipelineConfig;
use riskcot::pipeline::Pipeline;
use riskcot::scenario::{generate, ScenarioSpec, Template};
use riskcot::scene::io::{read_scene, write_scene, CloudFormat};

fn main() -> riskcot::Result<()> {
    let dir = std::env::temp_dir().join("riskcot-end-to-end");
    let spec = ScenarioSpec {
        n_objects: 2,
        ..ScenarioSpec::new(Template::StaticVehicleAhead, 42)
    };
    let path = write_scene(&dir, "scene", &generate(&spec)?, CloudFormat::Ascii)?;
    let scene = read_scene(&path)?;
    println!("{}: {} points", path.display(), scene.cloud.len());

    let pipeline = Pipeline::new(PipelineConfig::default())?;
    let (detected, analysis) = pipeline.run(&scene)?;
    println!(
        "{} objects, {} graph edges, max refined U {:.3}",
        detected.objects.len(),
        analysis.graph.edges.len(),
        analysis.refined.iter().map(|r| r.refined_uncertainty).fold(0.0, f64::max)
    );
    for step in analysis.trace.fired() {
        println!("fired {:?}: {}", step.rule, step.conclusion);
    }
    println!("decision {:?} / {:?}", analysis.trace.speed, analysis.trace.path);
    println!("{}", analysis.trace.explanation);
    Ok(())
}
