//! LiDAR voxelization and normalization, plus camera image normalization.

pub mod image;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{PointCloud, Vec3};

pub use image::{image_resize_normalize, ImageTensor, IMAGENET_MEAN, IMAGENET_STD};

/// Edge lengths `(dx, dy, dz)` of a voxel in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct VoxelSize([f64; 3]);

impl VoxelSize {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        if [dx, dy, dz].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!(
                "voxel size must be positive, got ({dx}, {dy}, {dz})"
            )));
        }
        Ok(VoxelSize([dx, dy, dz]))
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for VoxelSize {
    fn default() -> Self {
        VoxelSize([0.2, 0.2, 0.2])
    }
}

impl TryFrom<[f64; 3]> for VoxelSize {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        VoxelSize::new(v[0], v[1], v[2])
    }
}

impl From<VoxelSize> for [f64; 3] {
    fn from(v: VoxelSize) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoxelCell {
    pub centroid: Vec3,
    pub mean_intensity: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoxelGrid {
    pub voxel_size: VoxelSize,
    pub cells: BTreeMap<[i64; 3], VoxelCell>,
}

impl VoxelGrid {
    pub fn total_count(&self) -> usize {
        self.cells.values().map(|c| c.count).sum()
    }

    pub fn cell_bounds(&self, index: [i64; 3]) -> ([f64; 3], [f64; 3]) {
        let s = self.voxel_size.get();
        let lo = [0, 1, 2].map(|k| index[k] as f64 * s[k]);
        let hi = [0, 1, 2].map(|k| (index[k] + 1) as f64 * s[k]);
        (lo, hi)
    }
}

/// Buckets points into voxels and aggregates each voxel to its centroid and mean intensity.
///
/// Member points are summed in a canonical order, so the result does not depend
/// on the order of the input cloud.
pub fn voxelize(cloud: &PointCloud, size: VoxelSize) -> VoxelGrid {
    let s = size.get();
    let mut members: BTreeMap<[i64; 3], Vec<[f64; 4]>> = BTreeMap::new();
    for p in &cloud.points {
        let key = [
            (p.x / s[0]).floor() as i64,
            (p.y / s[1]).floor() as i64,
            (p.z / s[2]).floor() as i64,
        ];
        members.entry(key).or_default().push([p.x, p.y, p.z, p.intensity]);
    }
    let cells = members
        .into_iter()
        .map(|(key, mut pts)| {
            pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
            let n = pts.len() as f64;
            let mut sum = [0.0; 4];
            for p in &pts {
                for k in 0..4 {
                    sum[k] += p[k];
                }
            }
            let cell = VoxelCell {
                centroid: Vec3::new(sum[0] / n, sum[1] / n, sum[2] / n),
                mean_intensity: sum[3] / n,
                count: pts.len(),
            };
            (key, cell)
        })
        .collect();
    VoxelGrid {
        voxel_size: size,
        cells,
    }
}

/// Intensity clamp thresholds and the coordinate normalization range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationConfig {
    pub intensity_min: f64,
    pub intensity_max: f64,
    pub max_range: f64,
    #[serde(default)]
    pub voxel_size: VoxelSize,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            intensity_min: 0.0,
            intensity_max: 255.0,
            max_range: 100.0,
            voxel_size: VoxelSize::default(),
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity_max > self.intensity_min) {
            return Err(Error::Config(format!(
                "intensity_max ({}) must exceed intensity_min ({})",
                self.intensity_max, self.intensity_min
            )));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Config(format!(
                "max_range must be > 0, got {}",
                self.max_range
            )));
        }
        Ok(())
    }
}

/// Min-max normalization, clamped to `[0, 1]`.
pub fn normalize_intensity(intensity: f64, cfg: &NormalizationConfig) -> f64 {
    ((intensity - cfg.intensity_min) / (cfg.intensity_max - cfg.intensity_min)).clamp(0.0, 1.0)
}

/// Divides coordinates by `max_range`; returns beyond `max_range` are dropped.
pub fn normalize_coords(cloud: &PointCloud, max_range: f64) -> Result<Vec<Vec3>> {
    if !(max_range > 0.0) {
        return Err(Error::Config(format!("max_range must be > 0, got {max_range}")));
    }
    Ok(cloud
        .points
        .iter()
        .filter(|p| p.range() <= max_range)
        .map(|p| p.position() * (1.0 / max_range))
        .collect())
}
