//! Rule cascade with its numbered trace and explanation, for every template.

use riskcot::config::PipelineConfig;
use riskcot::detector::{DetectorConfig, NoiseModel};
use riskcot::pipeline::Pipeline;
use riskcot::reasoner::render_trace;
use riskcot::scenario::{generate, ScenarioSpec, Template};

fn main() -> riskcot::Result<()> {
    let pipeline = Pipeline::new(PipelineConfig {
        detector: DetectorConfig::Oracle(NoiseModel::noiseless()),
        ..PipelineConfig::default()
    })?;
    for template in Template::ALL {
        let (_, analysis) = pipeline.run(&generate(&ScenarioSpec::new(template, 1))?)?;
        println!("== {} (expected {:?})", template.name(), template.expected());
        print!("{}", render_trace(&analysis.trace));
        println!();
    }
    Ok(())
}
