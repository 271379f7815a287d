//! Voxelize a generated cloud, normalize coordinates and intensities, and
//! prepare a camera frame.

use riskcot::preprocess::{
    image_resize_normalize, normalize_coords, normalize_intensity, voxelize, ImageTensor, NormalizationConfig,
    VoxelSize, IMAGENET_MEAN, IMAGENET_STD,
};
use riskcot::scenario::{generate, ScenarioSpec, Template};

fn main() -> riskcot::Result<()> {
    let scene = generate(&ScenarioSpec::new(Template::DenseTraffic, 3))?;
    let cfg = NormalizationConfig::default();
    println!("{} points", scene.cloud.len());

    let grid = voxelize(&scene.cloud, VoxelSize::new(0.5, 0.5, 0.5)?);
    let densest = grid.cells.iter().max_by_key(|(_, c)| c.count).map(|(k, c)| (*k, c.count));
    println!("{} occupied voxels, densest {:?}", grid.cells.len(), densest);

    let coords = normalize_coords(&scene.cloud, cfg.max_range)?;
    let max = coords.iter().map(|v| v.norm()).fold(0.0, f64::max);
    println!("largest normalized radius {max:.3}");
    let p = scene.cloud.points[0];
    println!("intensity {:.3} -> {:.3}", p.intensity, normalize_intensity(p.intensity, &cfg));

    let frame = ImageTensor::constant(64, 48, [0.5, 0.4, 0.3])?;
    let input = image_resize_normalize(&frame, IMAGENET_MEAN, IMAGENET_STD)?;
    println!("camera tensor {}x{}, first value {:.4}", input.width, input.height, input.get(0, 0, 0));
    Ok(())
}
