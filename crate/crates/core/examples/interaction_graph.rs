//! Interaction graph, Monte Carlo network prediction and neighbor-fused refinement.

use riskcot::config::PipelineConfig;
use riskcot::interaction::refine;
use riskcot::pipeline::Pipeline;
use riskcot::scenario::{generate, ScenarioSpec, Template};

fn main() -> riskcot::Result<()> {
    let pipeline = Pipeline::new(PipelineConfig::default())?;
    let scene = pipeline.detect(&generate(&ScenarioSpec {
        n_objects: 2,
        ..ScenarioSpec::new(Template::DenseTraffic, 9)
    })?)?;
    let assessments = pipeline.assess(&scene);
    let graph = pipeline.graph(&scene);
    println!("{} nodes, {} edges", graph.nodes.len(), graph.edges.len());
    for e in &graph.edges {
        println!("  {:?} -> {:?}  energy {:.3}  attention {:.3}", e.src, e.dst, e.energy, e.attention);
    }
    let prediction = pipeline.predict(&scene, &assessments, &graph)?;
    let refined = refine(&scene.objects, &assessments, &graph, &prediction, &pipeline.config().uncertainty)?;
    for (a, r) in assessments.iter().zip(&refined) {
        println!(
            "  {:?}  U {:.3} -> {:.3}  label {:?}  epistemic {:.3}",
            r.object_id,
            a.uncertainty,
            r.refined_uncertainty,
            r.interaction_label,
            r.max_epistemic_std()
        );
    }
    Ok(())
}
