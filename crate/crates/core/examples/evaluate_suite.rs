//! Generate a suite, evaluate it with the noisy oracle and write the reports.
//!
//! ```text
//! cargo run --example evaluate_suite -- [out_dir]
//! ```

use std::path::PathBuf;

use riskcot::config::PipelineConfig;
use riskcot::eval::{evaluate_suite, text_table, write_reports};
use riskcot::pipeline::Pipeline;
use riskcot::scenario::{generate_suite, ScenarioSpec, Template};
use riskcot::scene::io::CloudFormat;

fn main() -> riskcot::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("riskcot-eval"), PathBuf::from);
    let base = ScenarioSpec {
        n_objects: 2,
        ..ScenarioSpec::new(Template::EmptyRoad, 0)
    };
    let (manifest_path, manifest) = generate_suite(&Template::ALL, 5, 100, &base, &dir.join("scenes"), CloudFormat::Binary)?;
    let pipeline = Pipeline::new(PipelineConfig::default())?;
    let (result, outcomes) = evaluate_suite(&manifest_path, &manifest, &pipeline, 0)?;
    print!("{}", text_table(&result));
    let files = write_reports(&dir.join("report"), &result, Some(&outcomes))?;
    println!("\nmetrics {}", files.metrics_csv.display());
    Ok(())
}
