//! Classification and orientation uncertainty, proximity risk, and risk tiers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{box_corners, wrap_angle, ClassDistribution, EgoState, ObjectClass, ObjectId, PointCloud, TrackedObject};

/// Weights of the uncertainty mix and the review threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyConfig {
    pub entropy_weight: f64,
    pub deviation_weight: f64,
    /// Scale entropy by `ln K` and deviation by `pi` so both lie in `[0, 1]`.
    pub normalized: bool,
    pub threshold: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            entropy_weight: 0.5,
            deviation_weight: 0.5,
            normalized: true,
            threshold: 0.8,
        }
    }
}

impl UncertaintyConfig {
    pub fn validate(&self) -> Result<()> {
        let (w1, w2) = (self.entropy_weight, self.deviation_weight);
        if !(w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0) {
            return Err(Error::Config(format!(
                "uncertainty weights must be non-negative with positive sum, got ({w1}, {w2})"
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!(
                "uncertainty threshold must be > 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    /// Distance scale of the exponential decay, meters.
    pub decay_length: f64,
    pub tier_high: f64,
    pub tier_moderate: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            decay_length: 20.0,
            tier_high: 0.6,
            tier_moderate: 0.3,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay_length > 0.0) {
            return Err(Error::Config(format!(
                "risk decay length must be > 0, got {}",
                self.decay_length
            )));
        }
        if !(0.0 < self.tier_moderate && self.tier_moderate < self.tier_high && self.tier_high < 1.0) {
            return Err(Error::Config(format!(
                "risk tiers must satisfy 0 < moderate ({}) < high ({}) < 1",
                self.tier_moderate, self.tier_high
            )));
        }
        Ok(())
    }

    pub fn tier(&self, risk: f64) -> RiskTier {
        if risk >= self.tier_high {
            RiskTier::High
        } else if risk >= self.tier_moderate {
            RiskTier::Moderate
        } else {
            RiskTier::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RiskTier {
    High,
    Moderate,
    Low,
}

impl RiskTier {
    pub fn name(self) -> &'static str {
        match self {
            RiskTier::High => "High",
            RiskTier::Moderate => "Moderate",
            RiskTier::Low => "Low",
        }
    }

    pub fn color(self) -> &'static str {
        match self {
            RiskTier::High => "red",
            RiskTier::Moderate => "orange",
            RiskTier::Low => "yellow",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [RiskTier::High, RiskTier::Moderate, RiskTier::Low]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

// Serialized as {"name": "High", "color": "red"}.
impl Serialize for RiskTier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("RiskTier", 2)?;
        st.serialize_field("name", self.name())?;
        st.serialize_field("color", self.color())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for RiskTier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Named {
            name: String,
            #[allow(dead_code)]
            color: Option<String>,
        }
        let n = Named::deserialize(d)?;
        RiskTier::from_name(&n.name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown risk tier {}", n.name)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectAssessment {
    pub object_id: ObjectId,
    pub class: ObjectClass,
    /// Shannon entropy in nats.
    pub entropy: f64,
    /// Wrapped yaw deviation in `[0, pi]`.
    pub deviation: f64,
    pub uncertainty: f64,
    pub min_distance: f64,
    pub risk: f64,
    pub tier: RiskTier,
    pub flagged: bool,
}

/// `-sum p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &ClassDistribution) -> f64 {
    entropy_of(p.probs())
}

/// Entropy of a raw probability slice. Errors if it is not a distribution.
pub fn entropy_checked(p: &[f64]) -> Result<f64> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > ClassDistribution::TOLERANCE {
        return Err(Error::Domain(format!("not a probability distribution: {p:?}")));
    }
    Ok(entropy_of(p))
}

fn entropy_of(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum();
    h.max(0.0)
}

pub fn max_entropy() -> f64 {
    (ObjectClass::COUNT as f64).ln()
}

/// `|wrap(pred - reference)|`, in `[0, pi]`.
pub fn deviation_angle(pred: f64, reference: f64) -> Result<f64> {
    Ok(wrap_angle(pred - reference)?.abs())
}

pub fn combined_uncertainty(entropy: f64, deviation: f64, cfg: &UncertaintyConfig) -> f64 {
    let (h, d) = if cfg.normalized {
        (entropy / max_entropy(), deviation / PI)
    } else {
        (entropy, deviation)
    };
    cfg.entropy_weight * h + cfg.deviation_weight * d
}

/// Nearest return to the ego origin.
pub fn min_distance(points: impl IntoIterator<Item = crate::scene::Vec3>) -> Option<f64> {
    points.into_iter().map(|p| p.norm()).reduce(f64::min)
}

/// Nearest support point of `obj`, or its nearest box corner when it has no support.
pub fn object_min_distance(obj: &TrackedObject, cloud: &PointCloud) -> f64 {
    min_distance(
        obj.support_points
            .iter()
            .filter_map(|&i| cloud.points.get(i))
            .map(|p| p.position()),
    )
    .or_else(|| min_distance(box_corners(&obj.bbox)))
    .expect("a box always has corners")
}

pub fn proximity_risk(min_distance: f64, cfg: &RiskConfig) -> f64 {
    (-min_distance / cfg.decay_length).exp()
}

pub fn assess_object(
    obj: &TrackedObject,
    cloud: &PointCloud,
    ego: &EgoState,
    ucfg: &UncertaintyConfig,
    rcfg: &RiskConfig,
) -> ObjectAssessment {
    let entropy = shannon_entropy(&obj.class_dist);
    let deviation = deviation_angle(obj.bbox.yaw, ego.lane_heading).expect("validated angles");
    let uncertainty = combined_uncertainty(entropy, deviation, ucfg);
    let d = object_min_distance(obj, cloud);
    let risk = proximity_risk(d, rcfg);
    ObjectAssessment {
        object_id: obj.id,
        class: obj.class(),
        entropy,
        deviation,
        uncertainty,
        min_distance: d,
        risk,
        tier: rcfg.tier(risk),
        flagged: uncertainty > ucfg.threshold,
    }
}

/// One assessment per object, in input order.
pub fn assess(
    objects: &[TrackedObject],
    cloud: &PointCloud,
    ego: &EgoState,
    ucfg: &UncertaintyConfig,
    rcfg: &RiskConfig,
) -> Vec<ObjectAssessment> {
    objects
        .iter()
        .map(|o| assess_object(o, cloud, ego, ucfg, rcfg))
        .collect()
}
