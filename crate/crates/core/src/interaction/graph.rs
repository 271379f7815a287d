use serde::{Deserialize, Serialize};

use super::InteractionConfig;
use crate::scene::{EgoState, ObjectClass, ObjectId, TrackedObject, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Ego,
    Object(ObjectId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub heading: f64,
    pub class: ObjectClass,
}

/// Directed edge: `src` sends a message to `dst`, weighted by `attention`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub distance: f64,
    pub delta_v: f64,
    pub intensity: f64,
    pub energy: f64,
    pub attention: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InteractionGraph {
    /// Objects in input order, then the ego node.
    pub nodes: Vec<GraphNode>,
    /// Grouped by destination in node order, sources in node order.
    pub edges: Vec<InteractionEdge>,
}

impl InteractionGraph {
    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// For each node, its in-edges as `(source index, attention)`.
    pub fn in_edges(&self) -> Vec<Vec<(usize, f64)>> {
        let index: std::collections::HashMap<NodeId, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[index[&e.dst]].push((index[&e.src], e.attention));
        }
        adj
    }
}

pub fn interaction_energy(distance: f64, delta_v: f64, intensity: f64, cfg: &InteractionConfig) -> f64 {
    cfg.lambda1() * distance + cfg.speed_weight * delta_v + cfg.intensity_weight * intensity
}

fn class_pair_factor(a: ObjectClass, b: ObjectClass) -> f64 {
    use ObjectClass::*;
    match (a, b) {
        (Vehicle, Pedestrian) | (Pedestrian, Vehicle) => 1.0,
        (Vehicle, Vehicle) => 0.8,
        _ => 0.5,
    }
}

/// `0.5 (1 + cos(heading_i - bearing_ij))` times a class-pair factor: largest when
/// `i` faces `j`.
pub fn interaction_intensity(i: &GraphNode, j: &GraphNode) -> f64 {
    let d = j.position - i.position;
    let bearing = d.y.atan2(d.x);
    0.5 * (1.0 + (i.heading - bearing).cos()) * class_pair_factor(i.class, j.class)
}

pub(crate) const EGO_CLASS: ObjectClass = ObjectClass::Vehicle;

pub fn build_graph(objects: &[TrackedObject], ego: &EgoState, cfg: &InteractionConfig) -> InteractionGraph {
    let mut nodes: Vec<GraphNode> = objects
        .iter()
        .map(|o| GraphNode {
            id: NodeId::Object(o.id),
            position: o.bbox.center,
            velocity: o.velocity,
            heading: o.bbox.yaw,
            class: o.class(),
        })
        .collect();
    nodes.push(GraphNode {
        id: NodeId::Ego,
        position: ego.position,
        velocity: ego.velocity(),
        heading: ego.heading,
        class: EGO_CLASS,
    });

    let sign = cfg.attention_sign.factor();
    let mut edges = Vec::new();
    for dst in &nodes {
        let start = edges.len();
        for src in &nodes {
            if src.id == dst.id {
                continue;
            }
            let distance = (src.position - dst.position).norm();
            if distance > cfg.edge_radius {
                continue;
            }
            let delta_v = (src.velocity - dst.velocity).norm();
            let intensity = interaction_intensity(dst, src);
            edges.push(InteractionEdge {
                src: src.id,
                dst: dst.id,
                distance,
                delta_v,
                intensity,
                energy: interaction_energy(distance, delta_v, intensity, cfg),
                attention: 0.0,
            });
        }
        let group = &mut edges[start..];
        let logits: Vec<f64> = group
            .iter()
            .map(|e| sign * e.energy / cfg.attention_temperature)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (e, w) in group.iter_mut().zip(weights) {
            e.attention = w / total;
        }
    }
    InteractionGraph { nodes, edges }
}
