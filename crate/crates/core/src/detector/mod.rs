//! Object detection behind a pluggable port.
//!
//! Two detectors ship: [`OracleDetector`] perturbs scene ground truth with a
//! configurable noise model, and [`GeometricDetector`] clusters non-ground
//! returns and fits a yaw-oriented box to each cluster.

mod geometric;
mod oracle;

pub use geometric::{ClusterParams, GeometricDetector};
pub use oracle::{NoiseModel, OracleDetector};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scene::{box_iou, wrap_angle, OrientedBox, Scene, TrackedObject};

/// Minimum IoU for a prediction/ground-truth pair to count as a match.
pub const MATCH_IOU_THRESHOLD: f64 = 0.1;

pub trait DetectorPort {
    fn detect(&self, scene: &Scene) -> Result<Vec<TrackedObject>>;
}

/// Detector selection as it appears in the pipeline config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    Oracle(NoiseModel),
    Geometric(ClusterParams),
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::Oracle(NoiseModel::default())
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorConfig::Oracle(n) => n.validate(),
            DetectorConfig::Geometric(p) => p.validate(),
        }
    }

    pub fn build(&self) -> Box<dyn DetectorPort + Send + Sync> {
        match *self {
            DetectorConfig::Oracle(noise) => Box::new(OracleDetector::new(noise)),
            DetectorConfig::Geometric(params) => Box::new(GeometricDetector::new(params)),
        }
    }
}

/// Greedy one-to-one matching by descending IoU; pairs below `threshold` are left unmatched.
///
/// Returns `(pred_index, gt_index)` pairs.
pub fn greedy_match(pred: &[OrientedBox], gt: &[OrientedBox], threshold: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let iou = box_iou(p, g);
            if iou >= threshold {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_pred = vec![false; pred.len()];
    let mut used_gt = vec![false; gt.len()];
    let mut out = Vec::new();
    for (_, i, j) in candidates {
        if !used_pred[i] && !used_gt[j] {
            used_pred[i] = true;
            used_gt[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Mean squared error over `(x, y, z, l, w, h, yaw)` for matched pairs, yaw error wrapped.
///
/// `None` when there are no pairs.
pub fn box_regression_error(
    pred: &[OrientedBox],
    gt: &[OrientedBox],
    matching: &[(usize, usize)],
) -> Option<f64> {
    if matching.is_empty() {
        return None;
    }
    let total: f64 = matching
        .iter()
        .map(|&(i, j)| {
            let a = pred[i].params();
            let b = gt[j].params();
            let mut sq = 0.0;
            for k in 0..6 {
                sq += (a[k] - b[k]).powi(2);
            }
            sq + wrap_angle(a[6] - b[6]).expect("finite yaw").powi(2)
        })
        .sum();
    Some(total / matching.len() as f64)
}
