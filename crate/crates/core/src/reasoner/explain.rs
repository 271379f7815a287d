use std::fmt::Write as _;

use super::{DecisionTrace, Evidence, RuleId, Side, SpeedDecision, TraceStep};
use crate::scene::{Maneuver, ObjectClass};
use crate::uncertainty::ObjectAssessment;

pub fn action_phrase(speed: SpeedDecision, path: Maneuver, side: Option<Side>) -> String {
    match (speed, path) {
        (SpeedDecision::Brake, _) => "braking".into(),
        (SpeedDecision::SlowDown, Maneuver::LaneChange) => match side {
            Some(s) => format!("slowing down and changing lanes {}", s.name()),
            None => "slowing down and changing lanes".into(),
        },
        (SpeedDecision::SlowDown, _) => "slowing down".into(),
        (SpeedDecision::SlowApproach, _) => "approaching slowly".into(),
        (SpeedDecision::CautiousTurn, _) => "turning cautiously".into(),
        (SpeedDecision::FollowAhead, _) => "following vehicle ahead".into(),
        (SpeedDecision::SpeedLimit, _) => "proceeding at speed limit".into(),
    }
}

/// Nearest cited object as (class, distance). A matching assessment, when
/// given, takes precedence over the snapshot.
fn nearest_object(step: &TraceStep, assessments: &[ObjectAssessment]) -> Option<(ObjectClass, f64)> {
    step.evidence
        .iter()
        .filter_map(|e| match *e {
            Evidence::Object {
                object_id,
                class,
                min_distance,
                ..
            } => Some(
                assessments
                    .iter()
                    .find(|a| a.object_id == object_id)
                    .map_or((class, min_distance), |a| (a.class, a.min_distance)),
            ),
            _ => None,
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn sentence(step: &TraceStep, trace: &DecisionTrace, assessments: &[ObjectAssessment]) -> Option<String> {
    let obj = || nearest_object(step, assessments);
    Some(match step.rule {
        RuleId::CollisionBrake => {
            let (c, d) = obj()?;
            format!("High risk due to nearby {} at {d:.1} m", c.noun())
        }
        RuleId::StaticObstacleLaneChange => {
            let (c, d) = obj()?;
            let side = trace.lane_change_side.map_or("adjacent", Side::name);
            format!("Static {} ahead at {d:.1} m with clear {side} lane", c.noun())
        }
        RuleId::Occlusion => {
            let (a, b) = step
                .evidence
                .iter()
                .filter_map(|e| match *e {
                    Evidence::CorridorCell { x_start, x_end, .. } => Some((x_start, x_end)),
                    _ => None,
                })
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (s, e)| (a.min(s), b.max(e)));
            if a.is_finite() {
                format!("Occluded view {a:.0} to {b:.0} m ahead")
            } else {
                "Occluded view ahead".into()
            }
        }
        RuleId::Unpredictable => match obj() {
            Some((c, d)) => format!("Unpredictable {} at {d:.1} m", c.noun()),
            None => "Unpredictable object nearby".into(),
        },
        RuleId::TurnIntent => "Turn intended".into(),
        RuleId::FollowLead => {
            let d = step.evidence.iter().find_map(|e| match *e {
                Evidence::Lead { distance, .. } => Some(distance),
                _ => None,
            })?;
            format!("Lead vehicle at {d:.1} m")
        }
        RuleId::SpeedLimit => "No hazards detected".into(),
        RuleId::Decision => return None,
    })
}

/// One sentence per fired rule, then the action taken.
///
/// `assessments` is optional context used to name cited objects; pass `&[]` to
/// rely on the snapshots stored in the trace.
pub fn explain(trace: &DecisionTrace, assessments: &[ObjectAssessment]) -> String {
    let sentences: Vec<String> = trace.fired().filter_map(|s| sentence(s, trace, assessments)).collect();
    let action = action_phrase(trace.speed, trace.path, trace.lane_change_side);
    if sentences.is_empty() {
        let mut a = action;
        if let Some(c) = a.get_mut(0..1) {
            c.make_ascii_uppercase();
        }
        return format!("{a}.");
    }
    format!("{}; {action}.", sentences.join(". "))
}

fn evidence_line(e: &Evidence) -> String {
    match *e {
        Evidence::Object {
            object_id,
            class,
            min_distance,
            risk,
            uncertainty,
            speed,
        } => format!("object {object_id} {class}: d={min_distance:.2} m R={risk:.3} U={uncertainty:.3} v={speed:.1} m/s"),
        Evidence::Edge {
            index,
            energy,
            attention,
        } => format!("edge #{index}: E={energy:.3} a={attention:.3}"),
        Evidence::Epistemic { object_id, max_std } => format!("object {object_id}: epistemic std {max_std:.3}"),
        Evidence::CorridorCell {
            x_start,
            x_end,
            side,
            density,
            ambient,
        } => format!(
            "cell {x_start:.0}-{x_end:.0} m {}: {density:.2} pts/m2 vs ambient {ambient:.2}",
            side.name()
        ),
        Evidence::Lead {
            object_id,
            distance,
            speed,
        } => format!("lead {object_id}: d={distance:.2} m v={speed:.1} m/s"),
        Evidence::Lane { side, clear } => {
            format!("{} lane {}", side.name(), if clear { "clear" } else { "occupied" })
        }
        Evidence::Ego { speed, intent } => format!("ego: v={speed:.1} m/s intent {}", intent.label()),
    }
}

/// Human-readable multi-line rendering of a trace.
pub fn render_trace(trace: &DecisionTrace) -> String {
    let mut out = String::new();
    for s in &trace.steps {
        let mark = if s.rule == RuleId::Decision {
            "=>"
        } else if s.passed {
            "PASS"
        } else {
            "----"
        };
        let _ = writeln!(out, "{:>2}. [{mark}] {}: {}", s.index, s.rule.name(), s.conclusion);
        for e in &s.evidence {
            let _ = writeln!(out, "      - {}", evidence_line(e));
        }
    }
    let _ = writeln!(out, "{}", trace.explanation);
    out
}
