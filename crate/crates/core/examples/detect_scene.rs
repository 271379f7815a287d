//! Oracle and geometric detectors on the same scene.

use riskcot::detector::{ClusterParams, DetectorConfig, NoiseModel};
use riskcot::scenario::{generate, ScenarioSpec, Template};

fn main() -> riskcot::Result<()> {
    let scene = generate(&ScenarioSpec {
        n_objects: 3,
        ..ScenarioSpec::new(Template::DenseTraffic, 5)
    })?;
    let gt = scene.ground_truth.as_deref().unwrap_or_default();
    println!("{} ground-truth objects", gt.len());
    for (name, cfg) in [
        ("oracle", DetectorConfig::Oracle(NoiseModel::default())),
        ("geometric", DetectorConfig::Geometric(ClusterParams::default())),
    ] {
        let objects = cfg.build().detect(&scene)?;
        println!("{name}: {} objects", objects.len());
        for o in &objects {
            let c = o.bbox.center;
            println!(
                "  {:?} {:<10} at ({:5.1}, {:5.1})  {:.1} x {:.1} m  {} points",
                o.id,
                o.class().noun(),
                c.x,
                c.y,
                o.bbox.length,
                o.bbox.width,
                o.support_points.len()
            );
        }
    }
    Ok(())
}
