use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, ScenarioSpec, Template};
use crate::error::{Error, Result};
use crate::reasoner::SpeedDecision;
use crate::scene::io::{write_scene, CloudFormat};
use crate::scene::Maneuver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedDecision {
    pub speed: SpeedDecision,
    pub path: Maneuver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Scene JSON path, relative to the manifest file.
    pub scene: String,
    pub template: Template,
    pub seed: u64,
    pub expected: ExpectedDecision,
}

/// A generated suite: `{"scenes": [{"scene", "template", "seed", "expected"}]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub scenes: Vec<ManifestEntry>,
}

impl Manifest {
    /// Scene path of `entry` resolved against the manifest location.
    pub fn resolve(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
        match manifest_path.parent() {
            Some(dir) => dir.join(&entry.scene),
            None => PathBuf::from(&entry.scene),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generates `per_template` scenes for each template with seeds
/// `seed, seed + 1, ...`, writes them under `dir`, and writes
/// `dir/manifest.json`. `base` supplies the non-template spec fields.
pub fn generate_suite(
    templates: &[Template],
    per_template: usize,
    seed: u64,
    base: &ScenarioSpec,
    dir: &Path,
    format: CloudFormat,
) -> Result<(PathBuf, Manifest)> {
    let specs: Vec<ScenarioSpec> = templates
        .iter()
        .flat_map(|&template| {
            (0..per_template as u64).map(move |i| ScenarioSpec {
                template,
                seed: seed + i,
                ..*base
            })
        })
        .collect();
    let scenes: Vec<_> = specs.par_iter().map(generate).collect::<Result<_>>()?;
    let mut manifest = Manifest::default();
    for (spec, scene) in specs.iter().zip(&scenes) {
        let stem = format!("{}_{:04}", spec.template.name(), spec.seed);
        write_scene(dir, &stem, scene, format)?;
        manifest.scenes.push(ManifestEntry {
            scene: format!("{stem}.json"),
            template: spec.template,
            seed: spec.seed,
            expected: spec.template.expected(),
        });
    }
    let path = dir.join("manifest.json");
    write_manifest(&path, &manifest)?;
    Ok((path, manifest))
}
