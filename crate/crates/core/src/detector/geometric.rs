use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DetectorPort;
use crate::error::{Error, Result};
use crate::scene::{wrap_angle, ClassDistribution, LidarPoint, ObjectClass, ObjectId, OrientedBox, Scene, TrackedObject, Vec3};

const MIN_EXTENT: f64 = 0.05;
const DOMINANT_MASS: f64 = 0.7;
const FLAT_HEIGHT_VARIANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    /// Points at or below this height are treated as ground.
    pub ground_z_max: f64,
    pub neighbor_radius: f64,
    pub min_points: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            ground_z_max: 0.15,
            neighbor_radius: 0.5,
            min_points: 5,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.neighbor_radius > 0.0) {
            return Err(Error::Config(format!(
                "neighbor_radius must be > 0, got {}",
                self.neighbor_radius
            )));
        }
        if self.min_points == 0 {
            return Err(Error::Config("min_points must be >= 1".into()));
        }
        Ok(())
    }
}

pub struct GeometricDetector {
    params: ClusterParams,
}

impl GeometricDetector {
    pub fn new(params: ClusterParams) -> Self {
        GeometricDetector { params }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, so the forest shape does not matter for the labels
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Fixed-radius connected components over `indices`, via a uniform grid hash.
pub(crate) fn euclidean_clusters(points: &[LidarPoint], indices: &[usize], radius: f64) -> Vec<Vec<usize>> {
    let cell = |p: &LidarPoint| {
        [
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (slot, &i) in indices.iter().enumerate() {
        grid.entry(cell(&points[i])).or_default().push(slot);
    }
    let r2 = radius * radius;
    let mut sets = DisjointSet::new(indices.len());
    for (slot, &i) in indices.iter().enumerate() {
        let p = &points[i];
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &other in bucket {
                        if other <= slot {
                            continue;
                        }
                        let q = &points[indices[other]];
                        let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                        if d2 <= r2 {
                            sets.union(slot, other);
                        }
                    }
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for slot in 0..indices.len() {
        let root = sets.find(slot);
        groups.entry(root).or_default().push(indices[slot]);
    }
    groups.into_values().collect()
}

fn lexicographic(a: &LidarPoint, b: &LidarPoint) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
        .then(a.intensity.total_cmp(&b.intensity))
}

/// Yaw from the principal axis of the xy covariance; extents from the rotated min/max.
///
/// `points` must already be in canonical (sorted) order.
/// Clusters whose lowest return sits within `ground_reach` of the ground band are
/// assumed to rest on the ground and extended down to z = 0.
pub(crate) fn fit_box(points: &[LidarPoint], ground_reach: Option<f64>) -> OrientedBox {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (mx, my) = (mx / n, my / n);
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - mx, p.y - my);
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    let mut yaw = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    // no velocity from a single frame, so the pi ambiguity resolves toward +x
    if yaw.cos() < 0.0 {
        yaw += std::f64::consts::PI;
    }
    let yaw = wrap_angle(yaw).expect("finite yaw");
    let (s, c) = yaw.sin_cos();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        let local = [c * p.x + s * p.y, -s * p.x + c * p.y, p.z];
        for k in 0..3 {
            lo[k] = lo[k].min(local[k]);
            hi[k] = hi[k].max(local[k]);
        }
    }
    if let Some(reach) = ground_reach {
        if lo[2] <= reach {
            lo[2] = lo[2].min(0.0);
        }
    }
    let mid = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
    let center = Vec3::new(c * mid[0] - s * mid[1], s * mid[0] + c * mid[1], mid[2]);
    OrientedBox::new(
        center,
        (hi[0] - lo[0]).max(MIN_EXTENT),
        (hi[1] - lo[1]).max(MIN_EXTENT),
        (hi[2] - lo[2]).max(MIN_EXTENT),
        yaw,
    )
    .expect("positive extents")
}

/// Dimension heuristic: flat clusters are static clutter, small footprints are
/// pedestrians (or poles when tall), mid-size are cyclists, the rest vehicles.
pub(crate) fn classify_dimensions(bbox: &OrientedBox, height_variance: f64) -> ClassDistribution {
    let diagonal = bbox.length.hypot(bbox.width);
    let class = if height_variance < FLAT_HEIGHT_VARIANCE {
        ObjectClass::StaticObstacle
    } else if diagonal < 1.2 && bbox.height < 2.2 {
        ObjectClass::Pedestrian
    } else if diagonal < 1.2 {
        ObjectClass::StaticObstacle
    } else if diagonal < 2.5 {
        ObjectClass::Cyclist
    } else {
        ObjectClass::Vehicle
    };
    ClassDistribution::dominant(class, DOMINANT_MASS)
}

impl DetectorPort for GeometricDetector {
    fn detect(&self, scene: &Scene) -> Result<Vec<TrackedObject>> {
        let points = &scene.cloud.points;
        let above: Vec<usize> = (0..points.len())
            .filter(|&i| points[i].z > self.params.ground_z_max)
            .collect();
        if above.is_empty() {
            return Ok(Vec::new());
        }
        let mut clusters: Vec<(Vec<LidarPoint>, Vec<usize>)> =
            euclidean_clusters(points, &above, self.params.neighbor_radius)
                .into_iter()
                .filter(|c| c.len() >= self.params.min_points)
                .map(|mut idx| {
                    idx.sort_unstable();
                    let mut pts: Vec<LidarPoint> = idx.iter().map(|&i| points[i]).collect();
                    pts.sort_by(lexicographic);
                    (pts, idx)
                })
                .collect();
        clusters.sort_by(|a, b| lexicographic(&a.0[0], &b.0[0]));

        Ok(clusters
            .into_iter()
            .enumerate()
            .map(|(k, (pts, idx))| {
                let bbox = fit_box(&pts, Some(self.params.ground_z_max + self.params.neighbor_radius));
                let n = pts.len() as f64;
                let mz = pts.iter().map(|p| p.z).sum::<f64>() / n;
                let var_z = pts.iter().map(|p| (p.z - mz).powi(2)).sum::<f64>() / n;
                TrackedObject {
                    id: ObjectId(k as u32 + 1),
                    bbox,
                    velocity: Vec3::ZERO,
                    class_dist: classify_dimensions(&bbox, var_z),
                    support_points: idx,
                }
            })
            .collect())
    }
}
