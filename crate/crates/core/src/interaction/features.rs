use crate::error::{Error, Result};
use crate::scene::{EgoState, ObjectClass, TrackedObject};
use crate::uncertainty::ObjectAssessment;

use super::graph::EGO_CLASS;

/// `[center(3), velocity(3), dims(3), sin yaw, cos yaw, class_dist(K), R, U]`.
pub const FEATURE_DIM: usize = 13 + ObjectClass::COUNT;

/// Per-entry divisors applied before features enter the network, so every
/// input is O(1) at urban scales.
pub const FEATURE_SCALE: [f64; FEATURE_DIM] = [
    50.0, 50.0, 5.0, // center, m
    20.0, 20.0, 20.0, // velocity, m/s
    5.0, 5.0, 5.0, // l, w, h, m
    1.0, 1.0, // sin, cos
    1.0, 1.0, 1.0, 1.0, // class probabilities
    1.0, 1.0, // risk, uncertainty
];

/// Footprint given to the ego node, meters.
const EGO_DIMS: [f64; 3] = [4.5, 1.8, 1.5];

pub fn node_features(obj: &TrackedObject, assessment: &ObjectAssessment) -> Result<[f64; FEATURE_DIM]> {
    if assessment.object_id != obj.id {
        return Err(Error::Precondition(format!(
            "assessment {} does not belong to object {}",
            assessment.object_id, obj.id
        )));
    }
    let b = &obj.bbox;
    let (s, c) = b.yaw.sin_cos();
    let mut f = [0.0; FEATURE_DIM];
    f[..11].copy_from_slice(&[
        b.center.x, b.center.y, b.center.z, obj.velocity.x, obj.velocity.y, obj.velocity.z, b.length, b.width,
        b.height, s, c,
    ]);
    f[11..11 + ObjectClass::COUNT].copy_from_slice(obj.class_dist.probs());
    f[FEATURE_DIM - 2] = assessment.risk;
    f[FEATURE_DIM - 1] = assessment.uncertainty;
    Ok(f)
}

/// The ego node: origin, its own velocity, a car-sized box, certain class, risk 1.
pub fn ego_features(ego: &EgoState) -> [f64; FEATURE_DIM] {
    let v = ego.velocity();
    let (s, c) = ego.heading.sin_cos();
    let mut f = [0.0; FEATURE_DIM];
    f[..11].copy_from_slice(&[
        ego.position.x, ego.position.y, ego.position.z, v.x, v.y, v.z, EGO_DIMS[0], EGO_DIMS[1], EGO_DIMS[2], s, c,
    ]);
    f[11 + EGO_CLASS.index()] = 1.0;
    f[FEATURE_DIM - 2] = 1.0;
    f
}

/// Node features in graph order (objects, then ego), scaled for the network.
pub fn scaled_features(
    objects: &[TrackedObject],
    assessments: &[ObjectAssessment],
    ego: &EgoState,
) -> Result<Vec<Vec<f64>>> {
    if objects.len() != assessments.len() {
        return Err(Error::Precondition(format!(
            "{} assessments for {} objects",
            assessments.len(),
            objects.len()
        )));
    }
    let mut rows = Vec::with_capacity(objects.len() + 1);
    for (o, a) in objects.iter().zip(assessments) {
        rows.push(node_features(o, a)?);
    }
    rows.push(ego_features(ego));
    Ok(rows
        .into_iter()
        .map(|r| r.iter().zip(FEATURE_SCALE).map(|(v, s)| v / s).collect())
        .collect())
}
