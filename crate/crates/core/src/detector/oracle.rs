use serde::{Deserialize, Serialize};

use super::DetectorPort;
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::{ClassDistribution, ObjectClass, ObjectId, OrientedBox, Scene, TrackedObject, Vec3};

/// Probability floor applied before renormalizing a sharpened class distribution.
const PROB_FLOOR: f64 = 1e-9;
const MIN_EXTENT: f64 = 0.05;
/// Horizontal slack when collecting a ground-truth box's support points.
const SUPPORT_MARGIN: f64 = 0.15;
/// Support points must sit this far above the box bottom, which keeps ground returns out.
const SUPPORT_LIFT: f64 = 0.02;

/// Error model of the ground-truth oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub pos_std: f64,
    pub dim_std: f64,
    pub yaw_std: f64,
    /// Softmax temperature applied to the one-hot label; larger means flatter.
    pub class_temperature: f64,
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            pos_std: 0.1,
            dim_std: 0.05,
            yaw_std: 0.02,
            class_temperature: 0.3,
            dropout_prob: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            pos_std: 0.0,
            dim_std: 0.0,
            yaw_std: 0.0,
            class_temperature: 1e-3,
            dropout_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pos_std", self.pos_std), ("dim_std", self.dim_std), ("yaw_std", self.yaw_std)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.class_temperature > 0.0) {
            return Err(Error::Config(format!(
                "class_temperature must be > 0, got {}",
                self.class_temperature
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::Config(format!(
                "dropout_prob must lie in [0, 1), got {}",
                self.dropout_prob
            )));
        }
        Ok(())
    }

    /// One-hot label softened by a temperature softmax, floored at `1e-9`.
    pub fn class_distribution(&self, class: ObjectClass) -> ClassDistribution {
        let logits: [f64; ObjectClass::COUNT] =
            std::array::from_fn(|i| if i == class.index() { 1.0 / self.class_temperature } else { 0.0 });
        let max = logits.iter().copied().fold(f64::MIN, f64::max);
        let w = logits.map(|l| ((l - max).exp()).max(PROB_FLOOR));
        ClassDistribution::from_weights(w).expect("positive weights")
    }
}

pub struct OracleDetector {
    noise: NoiseModel,
}

impl OracleDetector {
    pub fn new(noise: NoiseModel) -> Self {
        OracleDetector { noise }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.seed = seed;
        self
    }
}

impl DetectorPort for OracleDetector {
    fn detect(&self, scene: &Scene) -> Result<Vec<TrackedObject>> {
        let gt = scene
            .ground_truth
            .as_ref()
            .ok_or_else(|| Error::Precondition("oracle detection needs scene ground truth".into()))?;
        let n = &self.noise;
        let mut r = rng::seeded(n.seed);
        let mut out = Vec::with_capacity(gt.len());
        for (k, g) in gt.iter().enumerate() {
            // Fixed draw order per object, so one object's dropout never shifts another's noise.
            let keep = rng::uniform(&mut r, 0.0, 1.0) >= n.dropout_prob;
            let eps: [f64; 7] = std::array::from_fn(|_| rng::normal(&mut r));
            if !keep {
                continue;
            }
            let b = g.bbox;
            let bbox = OrientedBox::new(
                Vec3::new(
                    b.center.x + n.pos_std * eps[0],
                    b.center.y + n.pos_std * eps[1],
                    b.center.z + n.pos_std * eps[2],
                ),
                (b.length + n.dim_std * eps[3]).max(MIN_EXTENT),
                (b.width + n.dim_std * eps[4]).max(MIN_EXTENT),
                (b.height + n.dim_std * eps[5]).max(MIN_EXTENT),
                b.yaw + n.yaw_std * eps[6],
            )?;
            let bottom = b.z_range().0;
            let support_points = scene
                .cloud
                .points
                .iter()
                .enumerate()
                .filter(|(_, p)| p.z >= bottom + SUPPORT_LIFT && b.contains_inflated(p.position(), SUPPORT_MARGIN))
                .map(|(i, _)| i)
                .collect();
            out.push(TrackedObject {
                id: ObjectId(k as u32 + 1),
                bbox,
                velocity: g.velocity,
                class_dist: n.class_distribution(g.class),
                support_points,
            });
        }
        Ok(out)
    }
}
