//! Object interaction graph and Bayesian message-passing refinement.
//!
//! Objects and the ego vehicle become graph nodes; directed edges connect
//! nodes within `edge_radius` and carry the interaction energy
//! `e = l1*D + l2*dV + l3*I`. A Bayesian graph network (Gaussian weight
//! posteriors, Monte Carlo forward passes) predicts an interaction label per
//! node, and its predictive spread is reported as epistemic uncertainty.
//! Class distributions are refined separately by attention-weighted
//! log-linear pooling of neighbor evidence.

mod bgnn;
mod features;
mod fusion;
mod graph;
pub mod params_io;
mod train;

pub use bgnn::{forward_mc, BayesianLayer, BgnnParams, GraphTensor, McPrediction};
pub use features::{ego_features, node_features, scaled_features, FEATURE_DIM, FEATURE_SCALE};
pub use fusion::{fuse_refine, refine_uncertainty, FUSION_FLOOR};
pub use graph::{build_graph, interaction_energy, interaction_intensity, GraphNode, InteractionEdge, InteractionGraph, NodeId};
pub use train::{
    accuracy, elbo_loss, synthetic_interaction_set, train, Adam, ElboConfig, ElboOutput, TrainConfig, TrainReport,
    TrainingExample,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ClassDistribution, ObjectId, TrackedObject};
use crate::uncertainty::{ObjectAssessment, UncertaintyConfig};

/// Sign applied to the energy inside the attention softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionSign {
    /// `a_ij ~ exp(+e_ij / T)`: higher energy couples more strongly.
    #[default]
    Positive,
    /// `a_ij ~ exp(-e_ij / T)`.
    Negative,
}

impl AttentionSign {
    pub fn factor(self) -> f64 {
        match self {
            AttentionSign::Positive => 1.0,
            AttentionSign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    /// Weight of the distance term; `None` means `1 / edge_radius`.
    pub distance_weight: Option<f64>,
    pub speed_weight: f64,
    pub intensity_weight: f64,
    pub edge_radius: f64,
    pub attention_sign: AttentionSign,
    pub attention_temperature: f64,
    pub layers: usize,
    pub embed_dim: usize,
    pub mc_samples: usize,
    pub prior_std: f64,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig {
            distance_weight: None,
            speed_weight: 0.1,
            intensity_weight: 1.0,
            edge_radius: 30.0,
            attention_sign: AttentionSign::Positive,
            attention_temperature: 1.0,
            layers: 3,
            embed_dim: 128,
            mc_samples: 30,
            prior_std: 1.0,
        }
    }
}

impl InteractionConfig {
    pub fn lambda1(&self) -> f64 {
        self.distance_weight.unwrap_or(1.0 / self.edge_radius)
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.lambda1(), self.speed_weight, self.intensity_weight];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("energy weights must be finite and >= 0, got {weights:?}")));
        }
        for (name, v) in [
            ("edge_radius", self.edge_radius),
            ("attention_temperature", self.attention_temperature),
            ("prior_std", self.prior_std),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("layers", self.layers),
            ("embed_dim", self.embed_dim),
            ("mc_samples", self.mc_samples),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InteractionLabel {
    Yield,
    Follow,
    Ignore,
}

impl InteractionLabel {
    pub const COUNT: usize = 3;
    pub const ALL: [InteractionLabel; 3] = [InteractionLabel::Yield, InteractionLabel::Follow, InteractionLabel::Ignore];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedEstimate {
    pub object_id: ObjectId,
    pub refined_class_dist: ClassDistribution,
    pub refined_uncertainty: f64,
    /// Std of each interaction-label probability across Monte Carlo samples.
    pub epistemic_std: Vec<f64>,
    pub interaction_label: InteractionLabel,
}

impl RefinedEstimate {
    pub fn max_epistemic_std(&self) -> f64 {
        self.epistemic_std.iter().copied().fold(0.0, f64::max)
    }
}

/// Fuses neighbor evidence into each object's class distribution and attaches
/// the network's predictive label and spread.
///
/// Evidence for object `i` is every in-edge from another object node, weighted
/// by its attention. The ego node carries no class evidence.
pub fn refine(
    objects: &[TrackedObject],
    assessments: &[ObjectAssessment],
    graph: &InteractionGraph,
    prediction: &McPrediction,
    ucfg: &UncertaintyConfig,
) -> Result<Vec<RefinedEstimate>> {
    if assessments.len() != objects.len() {
        return Err(Error::Precondition(format!(
            "{} assessments for {} objects",
            assessments.len(),
            objects.len()
        )));
    }
    if prediction.prob_mean.len() != graph.nodes.len() {
        return Err(Error::Precondition("prediction does not cover the graph nodes".into()));
    }
    let mut out = Vec::with_capacity(objects.len());
    for (obj, assessment) in objects.iter().zip(assessments) {
        if assessment.object_id != obj.id {
            return Err(Error::Precondition(format!(
                "assessment {} does not match object {}",
                assessment.object_id, obj.id
            )));
        }
        let node = graph
            .node_index(NodeId::Object(obj.id))
            .ok_or_else(|| Error::Precondition(format!("object {} missing from graph", obj.id)))?;
        let evidence: Vec<(ClassDistribution, f64)> = graph
            .edges
            .iter()
            .filter(|e| e.dst == NodeId::Object(obj.id))
            .filter_map(|e| match e.src {
                NodeId::Object(src) => objects.iter().find(|o| o.id == src).map(|o| (o.class_dist, e.attention)),
                NodeId::Ego => None,
            })
            .collect();
        let fused = fuse_refine(&obj.class_dist, &evidence);
        let probs = &prediction.prob_mean[node];
        let label = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(b.cmp(&a)))
            .and_then(InteractionLabel::from_index)
            .unwrap_or(InteractionLabel::Ignore);
        out.push(RefinedEstimate {
            object_id: obj.id,
            refined_class_dist: fused,
            refined_uncertainty: refine_uncertainty(assessment, &fused, ucfg),
            epistemic_std: prediction.prob_std[node].clone(),
            interaction_label: label,
        });
    }
    Ok(out)
}
