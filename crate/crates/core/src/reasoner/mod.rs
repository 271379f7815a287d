//! Rule-cascade decision making with an evidence trace.
//!
//! Risk factors (collision risk in the ego corridor, occluded corridor ground,
//! unpredictable objects) are extracted from an assessed scene, then a fixed
//! priority cascade picks one speed and one path decision. Every rule is
//! evaluated and recorded with the evidence it looked at; the first rule that
//! passes decides. The explanation is rendered from the trace by templates.

mod explain;
mod factors;

pub use explain::{action_phrase, explain, render_trace};
pub use factors::{
    adjacent_lanes, corridor_polygon, extract_risk_factors, find_lead, in_corridor, occlusion_cells, CellDensity,
    ReasoningInput,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{EgoState, Maneuver, ObjectClass, ObjectId};
use crate::uncertainty::UncertaintyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReasonerConfig {
    /// Corridor extent ahead of the ego, meters.
    pub corridor_length: f64,
    pub corridor_half_width: f64,
    pub lane_width: f64,
    /// How far behind the ego an adjacent lane must be clear, meters.
    pub lane_clear_behind: f64,
    pub brake_level: f64,
    pub slow_level: f64,
    pub follow_gap: f64,
    /// Corridor ground density below this fraction of ambient counts as occluded.
    pub occlusion_ratio: f64,
    pub occlusion_cell_length: f64,
    pub ground_z_max: f64,
    pub epistemic_threshold: f64,
    /// Minimum forward speed of a lead vehicle, m/s.
    pub lead_min_speed: f64,
    /// Maximum speed of an obstacle treated as static, m/s.
    pub static_speed: f64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            corridor_length: 40.0,
            corridor_half_width: 1.75,
            lane_width: 3.5,
            lane_clear_behind: 10.0,
            brake_level: 0.7,
            slow_level: 0.4,
            follow_gap: 25.0,
            occlusion_ratio: 0.3,
            occlusion_cell_length: 5.0,
            ground_z_max: 0.15,
            epistemic_threshold: 0.2,
            lead_min_speed: 0.5,
            static_speed: 0.5,
        }
    }
}

impl ReasonerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("corridor_length", self.corridor_length),
            ("corridor_half_width", self.corridor_half_width),
            ("lane_width", self.lane_width),
            ("follow_gap", self.follow_gap),
            ("occlusion_cell_length", self.occlusion_cell_length),
            ("epistemic_threshold", self.epistemic_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0 < self.slow_level && self.slow_level < self.brake_level && self.brake_level <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < slow_level < brake_level <= 1, got {} and {}",
                self.slow_level, self.brake_level
            )));
        }
        if !(self.occlusion_ratio > 0.0 && self.occlusion_ratio < 1.0) {
            return Err(Error::Config(format!("occlusion_ratio must be in (0, 1), got {}", self.occlusion_ratio)));
        }
        for (name, v) in [
            ("lane_clear_behind", self.lane_clear_behind),
            ("lead_min_speed", self.lead_min_speed),
            ("static_speed", self.static_speed),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskFactorKind {
    CollisionRisk,
    Occlusion,
    UnpredictableObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// What a factor or a rule looked at. Object entries are snapshots of the
/// assessment they cite; edges are indices into the interaction graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Object {
        object_id: ObjectId,
        class: ObjectClass,
        min_distance: f64,
        risk: f64,
        uncertainty: f64,
        speed: f64,
    },
    Edge {
        index: usize,
        energy: f64,
        attention: f64,
    },
    Epistemic {
        object_id: ObjectId,
        max_std: f64,
    },
    CorridorCell {
        x_start: f64,
        x_end: f64,
        side: Side,
        density: f64,
        ambient: f64,
    },
    Lead {
        object_id: ObjectId,
        distance: f64,
        speed: f64,
    },
    Lane {
        side: Side,
        clear: bool,
    },
    Ego {
        speed: f64,
        intent: Maneuver,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFactor {
    pub kind: RiskFactorKind,
    pub object_id: Option<ObjectId>,
    pub magnitude: f64,
    pub evidence: Vec<Evidence>,
}

impl RiskFactor {
    /// The object snapshot this factor cites, if any.
    pub fn object(&self) -> Option<(ObjectId, ObjectClass, f64, f64)> {
        self.evidence.iter().find_map(|e| match *e {
            Evidence::Object {
                object_id,
                class,
                min_distance,
                speed,
                ..
            } => Some((object_id, class, min_distance, speed)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeedDecision {
    SpeedLimit,
    FollowAhead,
    SlowDown,
    SlowApproach,
    CautiousTurn,
    Brake,
}

impl SpeedDecision {
    /// Column order of the speed table.
    pub const ALL: [SpeedDecision; 6] = [
        SpeedDecision::SpeedLimit,
        SpeedDecision::FollowAhead,
        SpeedDecision::SlowDown,
        SpeedDecision::SlowApproach,
        SpeedDecision::CautiousTurn,
        SpeedDecision::Brake,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SpeedDecision::SpeedLimit => "Speed Limit",
            SpeedDecision::FollowAhead => "Follow Ahead",
            SpeedDecision::SlowDown => "Slow Down",
            SpeedDecision::SlowApproach => "Slow Approach",
            SpeedDecision::CautiousTurn => "Cautious Turn",
            SpeedDecision::Brake => "Brake",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

pub type PathDecision = Maneuver;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadVehicle {
    pub object_id: ObjectId,
    pub distance: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacentLanes {
    pub left_clear: bool,
    pub right_clear: bool,
}

impl AdjacentLanes {
    pub const BLOCKED: AdjacentLanes = AdjacentLanes {
        left_clear: false,
        right_clear: false,
    };

    /// Left is preferred when both are clear.
    pub fn preferred(&self) -> Option<Side> {
        if self.left_clear {
            Some(Side::Left)
        } else if self.right_clear {
            Some(Side::Right)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    CollisionBrake,
    StaticObstacleLaneChange,
    Occlusion,
    Unpredictable,
    TurnIntent,
    FollowLead,
    SpeedLimit,
    Decision,
}

impl RuleId {
    pub fn name(self) -> &'static str {
        match self {
            RuleId::CollisionBrake => "collision-brake",
            RuleId::StaticObstacleLaneChange => "static-obstacle-lane-change",
            RuleId::Occlusion => "occlusion",
            RuleId::Unpredictable => "unpredictable",
            RuleId::TurnIntent => "turn-intent",
            RuleId::FollowLead => "follow-lead",
            RuleId::SpeedLimit => "speed-limit",
            RuleId::Decision => "decision",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub rule: RuleId,
    pub passed: bool,
    pub evidence: Vec<Evidence>,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub steps: Vec<TraceStep>,
    pub speed: SpeedDecision,
    pub path: PathDecision,
    /// Lane taken when the path is a lane change.
    pub lane_change_side: Option<Side>,
    pub explanation: String,
}

impl DecisionTrace {
    /// Steps of rules that passed, in cascade order (the closing decision step excluded).
    pub fn fired(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps.iter().filter(|s| s.passed && s.rule != RuleId::Decision)
    }
}

fn ego_evidence(ego: &EgoState) -> Evidence {
    Evidence::Ego {
        speed: ego.speed,
        intent: ego.intent,
    }
}

fn strongest<'a>(factors: impl Iterator<Item = &'a RiskFactor>) -> Option<&'a RiskFactor> {
    factors.max_by(|a, b| {
        a.magnitude
            .total_cmp(&b.magnitude)
            // nearer object first on ties, then lower id, for a total order
            .then_with(|| {
                let da = a.object().map_or(f64::INFINITY, |o| o.2);
                let db = b.object().map_or(f64::INFINITY, |o| o.2);
                db.total_cmp(&da)
            })
            .then_with(|| b.object_id.cmp(&a.object_id))
    })
}

/// Evaluates the priority cascade. All seven rules are recorded; the first that
/// passes sets the decision, and a closing step names it.
///
/// 1. collision risk at or above `brake_level` -> Brake
/// 2. collision risk in `[slow_level, brake_level)` on a static obstacle with a
///    clear adjacent lane -> SlowDown and LaneChange
/// 3. any occluded corridor cell -> SlowApproach
/// 4. any unpredictable object, or a collision risk at or above `slow_level`
///    that rule 2 could not resolve -> SlowDown
/// 5. ego intends to turn -> CautiousTurn
/// 6. lead vehicle within `follow_gap` -> FollowAhead
/// 7. otherwise -> SpeedLimit
pub fn decide(
    factors: &[RiskFactor],
    ego: &EgoState,
    lead: Option<&LeadVehicle>,
    lanes: &AdjacentLanes,
    cfg: &ReasonerConfig,
) -> DecisionTrace {
    let of = |kind| factors.iter().filter(move |f| f.kind == kind);
    let mut steps = Vec::with_capacity(8);
    let mut chosen: Option<(SpeedDecision, PathDecision, Option<Side>, usize)> = None;
    let mut record = |rule: RuleId, passed: bool, evidence: Vec<Evidence>, conclusion: String, outcome: Option<(SpeedDecision, PathDecision, Option<Side>)>| {
        let index = steps.len() + 1;
        if passed && chosen.is_none() {
            if let Some((s, p, side)) = outcome {
                chosen = Some((s, p, side, steps.len()));
            }
        }
        steps.push(TraceStep {
            index,
            rule,
            passed,
            evidence,
            conclusion,
        });
    };
    let cite = |fs: &[&RiskFactor]| -> Vec<Evidence> {
        let ev: Vec<Evidence> = fs.iter().flat_map(|f| f.evidence.iter().copied()).collect();
        if ev.is_empty() {
            vec![ego_evidence(ego)]
        } else {
            ev
        }
    };

    // 1
    let collisions: Vec<&RiskFactor> = of(RiskFactorKind::CollisionRisk).collect();
    let braking: Vec<&RiskFactor> = collisions.iter().copied().filter(|f| f.magnitude >= cfg.brake_level).collect();
    let brake = strongest(braking.iter().copied());
    record(
        RuleId::CollisionBrake,
        brake.is_some(),
        cite(&brake.map_or_else(|| collisions.clone(), |f| vec![f])),
        match brake {
            Some(f) => format!("collision risk {:.3} >= {:.2}: Brake", f.magnitude, cfg.brake_level),
            None => format!("no collision risk at or above {:.2}", cfg.brake_level),
        },
        Some((SpeedDecision::Brake, ego.intent, None)),
    );

    // 2
    let moderate: Vec<&RiskFactor> = collisions
        .iter()
        .copied()
        .filter(|f| f.magnitude >= cfg.slow_level && f.magnitude < cfg.brake_level)
        .collect();
    let static_moderate = strongest(
        moderate
            .iter()
            .copied()
            .filter(|f| f.object().is_some_and(|o| o.3 <= cfg.static_speed)),
    );
    let side = lanes.preferred();
    let lane_ev = [
        Evidence::Lane {
            side: Side::Left,
            clear: lanes.left_clear,
        },
        Evidence::Lane {
            side: Side::Right,
            clear: lanes.right_clear,
        },
    ];
    let rule2 = static_moderate.filter(|_| side.is_some());
    let mut ev2 = cite(&static_moderate.map_or_else(|| moderate.clone(), |f| vec![f]));
    ev2.extend(lane_ev);
    record(
        RuleId::StaticObstacleLaneChange,
        rule2.is_some(),
        ev2,
        match (static_moderate, side) {
            (Some(f), Some(s)) => format!(
                "static obstacle with collision risk {:.3}, {} lane clear: SlowDown and LaneChange",
                f.magnitude,
                s.name()
            ),
            (Some(_), None) => "static obstacle ahead but no adjacent lane is clear".to_string(),
            (None, _) => "no static obstacle with moderate collision risk".to_string(),
        },
        Some((SpeedDecision::SlowDown, Maneuver::LaneChange, side)),
    );

    // 3
    let occluded: Vec<&RiskFactor> = of(RiskFactorKind::Occlusion).collect();
    record(
        RuleId::Occlusion,
        !occluded.is_empty(),
        cite(&occluded),
        if occluded.is_empty() {
            "corridor ground fully observed".to_string()
        } else {
            format!("{} occluded corridor cell(s): SlowApproach", occluded.len())
        },
        Some((SpeedDecision::SlowApproach, ego.intent, None)),
    );

    // 4
    let unpredictable: Vec<&RiskFactor> = of(RiskFactorKind::UnpredictableObject).collect();
    let unresolved: Vec<&RiskFactor> = if rule2.is_some() { Vec::new() } else { moderate.clone() };
    let rule4: Vec<&RiskFactor> = unpredictable.iter().chain(&unresolved).copied().collect();
    record(
        RuleId::Unpredictable,
        !rule4.is_empty(),
        cite(&rule4),
        match (unpredictable.len(), unresolved.len()) {
            (0, 0) => "no unpredictable objects".to_string(),
            (u, 0) => format!("{u} unpredictable object(s): SlowDown"),
            (0, r) => format!("{r} unresolved collision risk(s): SlowDown"),
            (u, r) => format!("{u} unpredictable object(s) and {r} unresolved collision risk(s): SlowDown"),
        },
        Some((SpeedDecision::SlowDown, ego.intent, None)),
    );

    // 5
    let turning = ego.intent == Maneuver::Turn;
    record(
        RuleId::TurnIntent,
        turning,
        vec![ego_evidence(ego)],
        if turning {
            "ego intends to turn: CautiousTurn".to_string()
        } else {
            format!("ego intent is {}", ego.intent.label())
        },
        Some((SpeedDecision::CautiousTurn, ego.intent, None)),
    );

    // 6
    let following = lead.filter(|l| l.distance <= cfg.follow_gap);
    record(
        RuleId::FollowLead,
        following.is_some(),
        match lead {
            Some(l) => vec![Evidence::Lead {
                object_id: l.object_id,
                distance: l.distance,
                speed: l.speed,
            }],
            None => vec![ego_evidence(ego)],
        },
        match (lead, following) {
            (_, Some(l)) => format!("lead vehicle at {:.1} m within {:.1} m: FollowAhead", l.distance, cfg.follow_gap),
            (Some(l), None) => format!("lead vehicle at {:.1} m beyond {:.1} m", l.distance, cfg.follow_gap),
            (None, None) => "no lead vehicle".to_string(),
        },
        Some((SpeedDecision::FollowAhead, ego.intent, None)),
    );

    // 7
    let free = brake.is_none() && rule2.is_none() && occluded.is_empty() && rule4.is_empty() && !turning && following.is_none();
    record(
        RuleId::SpeedLimit,
        free,
        vec![ego_evidence(ego)],
        if free {
            "no hazards: SpeedLimit".to_string()
        } else {
            "a higher-priority rule applies".to_string()
        },
        Some((SpeedDecision::SpeedLimit, ego.intent, None)),
    );

    let (speed, path, lane_change_side, winner) = chosen.expect("speed-limit rule always decides");
    let winner_evidence = steps[winner].evidence.clone();
    let conclusion = format!(
        "decision {} / {} (rule {})",
        speed.label(),
        path.label(),
        steps[winner].rule.name()
    );
    steps.push(TraceStep {
        index: steps.len() + 1,
        rule: RuleId::Decision,
        passed: true,
        evidence: winner_evidence,
        conclusion,
    });
    let mut trace = DecisionTrace {
        steps,
        speed,
        path,
        lane_change_side,
        explanation: String::new(),
    };
    trace.explanation = explain(&trace, &[]);
    trace
}

/// Extracts factors and runs the cascade.
pub fn reason(input: &ReasoningInput<'_>, cfg: &ReasonerConfig, ucfg: &UncertaintyConfig) -> DecisionTrace {
    let factors = extract_risk_factors(input, cfg, ucfg);
    let lead = find_lead(input, cfg);
    let lanes = adjacent_lanes(input, cfg);
    let mut trace = decide(&factors, input.ego, lead.as_ref(), &lanes, cfg);
    trace.explanation = explain(&trace, input.assessments);
    trace
}

#[cfg(test)]
mod tests;
