use std::cmp::Ordering;

use super::{AdjacentLanes, Evidence, LeadVehicle, ReasonerConfig, RiskFactor, RiskFactorKind, Side};
use crate::interaction::{InteractionGraph, NodeId, RefinedEstimate};
use crate::scene::{footprint_overlap_area, EgoState, ObjectClass, Point2, PointCloud, TrackedObject, Vec3};
use crate::uncertainty::{ObjectAssessment, RiskTier, UncertaintyConfig};

/// Everything the reasoner looks at for one scene. `assessments` and `refined`
/// are parallel to `objects` (refined may be empty when no network ran).
#[derive(Debug, Clone, Copy)]
pub struct ReasoningInput<'a> {
    pub ego: &'a EgoState,
    pub cloud: &'a PointCloud,
    pub objects: &'a [TrackedObject],
    pub assessments: &'a [ObjectAssessment],
    pub refined: &'a [RefinedEstimate],
    pub graph: &'a InteractionGraph,
}

/// World-frame point of ego-local `(x, y)`.
fn to_world(ego: &EgoState, x: f64, y: f64) -> Point2 {
    let (s, c) = ego.heading.sin_cos();
    Point2 {
        x: ego.position.x + c * x - s * y,
        y: ego.position.y + s * x + c * y,
    }
}

/// Ego-local `(x, y)` of a world point.
fn to_local(ego: &EgoState, p: Vec3) -> (f64, f64) {
    let (s, c) = ego.heading.sin_cos();
    let (dx, dy) = (p.x - ego.position.x, p.y - ego.position.y);
    (c * dx + s * dy, -s * dx + c * dy)
}

fn rect(ego: &EgoState, x0: f64, x1: f64, y0: f64, y1: f64) -> [Point2; 4] {
    [
        to_world(ego, x0, y0),
        to_world(ego, x1, y0),
        to_world(ego, x1, y1),
        to_world(ego, x0, y1),
    ]
}

/// The lane-wide rectangle ahead of the ego, counter-clockwise.
pub fn corridor_polygon(ego: &EgoState, cfg: &ReasonerConfig) -> [Point2; 4] {
    let h = cfg.corridor_half_width;
    rect(ego, 0.0, cfg.corridor_length, -h, h)
}

pub fn in_corridor(obj: &TrackedObject, ego: &EgoState, cfg: &ReasonerConfig) -> bool {
    footprint_overlap_area(&obj.bbox.footprint(), &corridor_polygon(ego, cfg)) > 0.0
}

fn lane_polygon(ego: &EgoState, side: Side, cfg: &ReasonerConfig) -> [Point2; 4] {
    let (h, w) = (cfg.corridor_half_width, cfg.lane_width);
    let (y0, y1) = match side {
        Side::Left => (h, h + w),
        Side::Right => (-h - w, -h),
    };
    rect(ego, -cfg.lane_clear_behind, cfg.corridor_length, y0, y1)
}

pub fn adjacent_lanes(input: &ReasoningInput<'_>, cfg: &ReasonerConfig) -> AdjacentLanes {
    let clear = |side| {
        let lane = lane_polygon(input.ego, side, cfg);
        !input
            .objects
            .iter()
            .any(|o| footprint_overlap_area(&o.bbox.footprint(), &lane) > 0.0)
    };
    AdjacentLanes {
        left_clear: clear(Side::Left),
        right_clear: clear(Side::Right),
    }
}

fn forward_speed(obj: &TrackedObject, ego: &EgoState) -> f64 {
    let (s, c) = ego.heading.sin_cos();
    obj.velocity.x * c + obj.velocity.y * s
}

/// Nearest in-corridor vehicle moving forward faster than `lead_min_speed`.
pub fn find_lead(input: &ReasoningInput<'_>, cfg: &ReasonerConfig) -> Option<LeadVehicle> {
    input
        .objects
        .iter()
        .zip(input.assessments)
        .filter(|(o, _)| o.class() == ObjectClass::Vehicle && in_corridor(o, input.ego, cfg))
        .map(|(o, a)| (o, a, forward_speed(o, input.ego)))
        .filter(|&(_, _, v)| v > cfg.lead_min_speed)
        .min_by(|a, b| a.1.min_distance.total_cmp(&b.1.min_distance).then(a.0.id.cmp(&b.0.id)))
        .map(|(o, a, v)| LeadVehicle {
            object_id: o.id,
            distance: a.min_distance,
            speed: v,
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDensity {
    pub x_start: f64,
    pub x_end: f64,
    pub side: Side,
    pub count: usize,
    /// Ground returns per square meter.
    pub density: f64,
}

fn is_ground(z: f64, cfg: &ReasonerConfig) -> bool {
    z <= cfg.ground_z_max
}

/// Ground density of each half-lane corridor cell that ends before `horizon`
/// (ego-local x), together with the ambient density.
///
/// Ambient density is measured on the strip just behind the sensor, which no
/// object ahead can shadow; when that strip is empty the median cell density is
/// used instead.
pub fn occlusion_cells(cloud: &PointCloud, ego: &EgoState, horizon: f64, cfg: &ReasonerConfig) -> (Vec<CellDensity>, f64) {
    let h = cfg.corridor_half_width;
    let len = cfg.occlusion_cell_length;
    let n_cells = (cfg.corridor_length / len).ceil() as usize;
    let mut counts = vec![[0usize; 2]; n_cells];
    let rear_half_width = h + cfg.lane_width;
    let mut rear = 0usize;
    for p in &cloud.points {
        if !is_ground(p.z, cfg) {
            continue;
        }
        let (x, y) = to_local(ego, p.position());
        if (-len..0.0).contains(&x) && y.abs() <= rear_half_width {
            rear += 1;
        }
        if !(0.0..cfg.corridor_length).contains(&x) || y.abs() > h {
            continue;
        }
        let k = ((x / len) as usize).min(n_cells - 1);
        counts[k][usize::from(y < 0.0)] += 1;
    }
    let mut cells = Vec::new();
    for (k, pair) in counts.iter().enumerate() {
        let x_start = k as f64 * len;
        let x_end = (x_start + len).min(cfg.corridor_length);
        if x_end > horizon {
            break;
        }
        let area = (x_end - x_start) * h;
        for (side, &count) in [Side::Left, Side::Right].into_iter().zip(pair) {
            cells.push(CellDensity {
                x_start,
                x_end,
                side,
                count,
                density: count as f64 / area,
            });
        }
    }
    let ambient = if rear > 0 {
        rear as f64 / (len * 2.0 * rear_half_width)
    } else {
        let mut d: Vec<f64> = cells.iter().map(|c| c.density).collect();
        d.sort_by(f64::total_cmp);
        match d.len() {
            0 => 0.0,
            n if n % 2 == 1 => d[n / 2],
            n => 0.5 * (d[n / 2 - 1] + d[n / 2]),
        }
    };
    (cells, ambient)
}

/// Ego-local distance to the near face of the nearest in-corridor vehicle,
/// moving or not; the ground behind a tracked vehicle is known to be hidden by
/// it and is not judged.
fn free_space_horizon(input: &ReasoningInput<'_>, cfg: &ReasonerConfig) -> f64 {
    input
        .objects
        .iter()
        .filter(|o| o.class() == ObjectClass::Vehicle && in_corridor(o, input.ego, cfg))
        .map(|o| {
            o.bbox
                .footprint()
                .iter()
                .map(|p| to_local(input.ego, Vec3::new(p.x, p.y, 0.0)).0)
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min)
}

fn object_evidence(o: &TrackedObject, a: &ObjectAssessment) -> Evidence {
    Evidence::Object {
        object_id: o.id,
        class: a.class,
        min_distance: a.min_distance,
        risk: a.risk,
        uncertainty: a.uncertainty,
        speed: o.velocity.norm(),
    }
}

fn ego_edges<'a>(graph: &'a InteractionGraph, o: &TrackedObject) -> impl Iterator<Item = Evidence> + 'a {
    let id = NodeId::Object(o.id);
    graph
        .edges
        .iter()
        .enumerate()
        .filter(move |(_, e)| e.src == id && e.dst == NodeId::Ego)
        .map(|(index, e)| Evidence::Edge {
            index,
            energy: e.energy,
            attention: e.attention,
        })
}

/// Collision risks (High tier, in corridor), occluded corridor cells, and
/// unpredictable objects (flagged, or network spread above threshold).
pub fn extract_risk_factors(input: &ReasoningInput<'_>, cfg: &ReasonerConfig, ucfg: &UncertaintyConfig) -> Vec<RiskFactor> {
    let mut out = Vec::new();
    for (o, a) in input.objects.iter().zip(input.assessments) {
        if a.tier == RiskTier::High && in_corridor(o, input.ego, cfg) {
            let mut evidence = vec![object_evidence(o, a)];
            evidence.extend(ego_edges(input.graph, o));
            out.push(RiskFactor {
                kind: RiskFactorKind::CollisionRisk,
                object_id: Some(o.id),
                magnitude: a.risk,
                evidence,
            });
        }
    }

    let horizon = free_space_horizon(input, cfg);
    let (cells, ambient) = occlusion_cells(input.cloud, input.ego, horizon, cfg);
    if ambient > 0.0 {
        for c in cells {
            let ratio = c.density / ambient;
            if ratio < cfg.occlusion_ratio {
                out.push(RiskFactor {
                    kind: RiskFactorKind::Occlusion,
                    object_id: None,
                    magnitude: (1.0 - ratio).clamp(0.0, 1.0),
                    evidence: vec![Evidence::CorridorCell {
                        x_start: c.x_start,
                        x_end: c.x_end,
                        side: c.side,
                        density: c.density,
                        ambient,
                    }],
                });
            }
        }
    }

    for (o, a) in input.objects.iter().zip(input.assessments) {
        let refined = input.refined.iter().find(|r| r.object_id == o.id);
        let spread = refined.map_or(0.0, RefinedEstimate::max_epistemic_std);
        let spread_high = spread > cfg.epistemic_threshold;
        if a.flagged || spread_high {
            let mut evidence = vec![object_evidence(o, a)];
            if spread_high {
                evidence.push(Evidence::Epistemic {
                    object_id: o.id,
                    max_std: spread,
                });
            }
            out.push(RiskFactor {
                kind: RiskFactorKind::UnpredictableObject,
                object_id: Some(o.id),
                magnitude: (a.uncertainty / ucfg.threshold).min(1.0),
                evidence,
            });
        }
    }
    out.sort_by(|a, b| a.kind.cmp(&b.kind).then(Ordering::Equal));
    out
}
