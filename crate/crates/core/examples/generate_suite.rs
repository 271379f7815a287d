//! Write a scenario suite and its manifest.
//!
//! ```text
//! cargo run --example generate_suite -- [out_dir] [per_template]
//! ```

use std::path::PathBuf;

use riskcot::scenario::{generate_suite, ScenarioSpec, Template};
use riskcot::scene::io::CloudFormat;

fn main() -> riskcot::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map_or_else(|| std::env::temp_dir().join("riskcot-suite"), PathBuf::from);
    let per_template = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let base = ScenarioSpec::new(Template::EmptyRoad, 0);
    let (path, manifest) = generate_suite(&Template::ALL, per_template, 0, &base, &dir, CloudFormat::Binary)?;
    for e in &manifest.scenes {
        println!("{:<32} {:?} / {:?}", e.scene, e.expected.speed, e.expected.path);
    }
    println!("manifest {}", path.display());
    Ok(())
}
