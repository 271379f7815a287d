//! Per-object entropy, orientation deviation, proximity risk and tier.

use riskcot::config::PipelineConfig;
use riskcot::pipeline::Pipeline;
use riskcot::scenario::{generate, ScenarioSpec, Template};

fn main() -> riskcot::Result<()> {
    let pipeline = Pipeline::new(PipelineConfig::default())?;
    for template in [Template::PedestrianCrossing, Template::DenseTraffic] {
        let scene = pipeline.detect(&generate(&ScenarioSpec::new(template, 2))?)?;
        println!("{}", template.name());
        for a in pipeline.assess(&scene) {
            println!(
                "  {:?} {:<10} H {:.3}  dev {:5.1} deg  U {:.3}  d {:5.1} m  risk {:.3} {:?}{}",
                a.object_id,
                a.class.noun(),
                a.entropy,
                a.deviation.to_degrees(),
                a.uncertainty,
                a.min_distance,
                a.risk,
                a.tier,
                if a.flagged { "  flagged" } else { "" }
            );
        }
    }
    Ok(())
}
