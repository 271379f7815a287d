use super::*;
use crate::interaction::{build_graph, InteractionConfig, InteractionGraph};
use crate::scene::{ClassDistribution, LidarPoint, OrientedBox, PointCloud, TrackedObject, Vec3};
use crate::uncertainty::{assess, ObjectAssessment, RiskConfig};
use proptest::prelude::*;

fn ground(step: f64) -> PointCloud {
    let mut pts = Vec::new();
    let nx = (50.0 / step) as usize;
    let ny = (12.0 / step) as usize;
    for i in 0..nx {
        for j in 0..ny {
            let x = -5.0 + (i as f64 + 0.5) * step;
            let y = -6.0 + (j as f64 + 0.5) * step;
            pts.push(LidarPoint::new(x, y, 0.0, 0.5).unwrap());
        }
    }
    PointCloud::new("test", pts)
}

fn object(id: u32, class: ObjectClass, center: (f64, f64), dims: (f64, f64, f64), velocity: f64) -> TrackedObject {
    TrackedObject {
        id: ObjectId(id),
        bbox: OrientedBox::new(Vec3::new(center.0, center.1, dims.2 / 2.0), dims.0, dims.1, dims.2, 0.0).unwrap(),
        velocity: Vec3::new(velocity, 0.0, 0.0),
        class_dist: ClassDistribution::one_hot(class),
        support_points: Vec::new(),
    }
}

struct Fixture {
    ego: EgoState,
    cloud: PointCloud,
    objects: Vec<TrackedObject>,
    assessments: Vec<ObjectAssessment>,
    graph: InteractionGraph,
}

impl Fixture {
    fn new(ego: EgoState, cloud: PointCloud, objects: Vec<TrackedObject>) -> Self {
        let assessments = assess(&objects, &cloud, &ego, &UncertaintyConfig::default(), &RiskConfig::default());
        let graph = build_graph(&objects, &ego, &InteractionConfig::default());
        Fixture {
            ego,
            cloud,
            objects,
            assessments,
            graph,
        }
    }

    fn input(&self) -> ReasoningInput<'_> {
        ReasoningInput {
            ego: &self.ego,
            cloud: &self.cloud,
            objects: &self.objects,
            assessments: &self.assessments,
            refined: &[],
            graph: &self.graph,
        }
    }

    fn reason(&self) -> DecisionTrace {
        reason(&self.input(), &ReasonerConfig::default(), &UncertaintyConfig::default())
    }

    fn factors(&self) -> Vec<RiskFactor> {
        extract_risk_factors(&self.input(), &ReasonerConfig::default(), &UncertaintyConfig::default())
    }
}

/// Pedestrian whose nearest return sits exactly 5 m ahead.
fn pedestrian_scene() -> Fixture {
    let mut cloud = ground(0.25);
    let idx = cloud.points.len();
    cloud.points.push(LidarPoint::new(5.0, 0.0, 0.0, 0.5).unwrap());
    let mut ped = object(1, ObjectClass::Pedestrian, (5.3, 0.0), (0.6, 0.6, 1.7), 0.0);
    ped.support_points = vec![idx];
    Fixture::new(EgoState::straight(10.0), cloud, vec![ped])
}

#[test]
fn empty_road_has_no_factors() {
    let f = Fixture::new(EgoState::straight(10.0), ground(0.25), Vec::new());
    assert!(f.factors().is_empty());
    let t = f.reason();
    assert_eq!((t.speed, t.path), (SpeedDecision::SpeedLimit, Maneuver::Straight));
    assert_eq!(t.explanation, "No hazards detected; proceeding at speed limit.");
}

#[test]
fn close_pedestrian_is_a_collision_risk() {
    let f = pedestrian_scene();
    let factors = f.factors();
    let c: Vec<_> = factors.iter().filter(|x| x.kind == RiskFactorKind::CollisionRisk).collect();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].object_id, Some(ObjectId(1)));
    assert!((c[0].magnitude - (-0.25f64).exp()).abs() < 1e-12, "{:?}", c[0]);
    let t = f.reason();
    assert_eq!(t.speed, SpeedDecision::Brake);
    assert_eq!(t.path, Maneuver::Straight);
    assert_eq!(t.explanation, "High risk due to nearby pedestrian at 5.0 m; braking.");
}

#[test]
fn object_outside_corridor_is_not_a_collision_risk() {
    // 3.5 m away, high tier, but in the next lane
    let f = Fixture::new(
        EgoState::straight(10.0),
        ground(0.25),
        vec![object(1, ObjectClass::Vehicle, (4.0, 4.2), (4.0, 1.8, 1.5), 0.0)],
    );
    assert_eq!(f.assessments[0].tier, crate::uncertainty::RiskTier::High);
    assert!(!in_corridor(&f.objects[0], &f.ego, &ReasonerConfig::default()));
    assert!(f.factors().iter().all(|x| x.kind != RiskFactorKind::CollisionRisk));
}

#[test]
fn corridor_membership_uses_footprint_overlap() {
    let cfg = ReasonerConfig::default();
    let ego = EgoState::straight(0.0);
    // edge at y = 1.8, just outside
    let outside = object(1, ObjectClass::Vehicle, (10.0, 2.7), (4.0, 1.8, 1.5), 0.0);
    let touching = object(2, ObjectClass::Vehicle, (10.0, 2.5), (4.0, 1.8, 1.5), 0.0);
    let behind = object(3, ObjectClass::Vehicle, (-5.0, 0.0), (4.0, 1.8, 1.5), 0.0);
    assert!(!in_corridor(&outside, &ego, &cfg));
    assert!(in_corridor(&touching, &ego, &cfg));
    assert!(!in_corridor(&behind, &ego, &cfg));
}

#[test]
fn lead_vehicle_and_lanes() {
    let cfg = ReasonerConfig::default();
    let f = Fixture::new(
        EgoState::straight(10.0),
        ground(0.25),
        vec![
            object(1, ObjectClass::Vehicle, (30.0, 0.0), (4.5, 1.8, 1.5), 10.0),
            object(2, ObjectClass::Vehicle, (18.0, 0.2), (4.5, 1.8, 1.5), 9.0),
            object(3, ObjectClass::Vehicle, (8.0, 0.0), (4.5, 1.8, 1.5), 0.0),
            object(4, ObjectClass::Vehicle, (12.0, -3.5), (4.5, 1.8, 1.5), 9.0),
        ],
    );
    let lead = find_lead(&f.input(), &cfg).unwrap();
    // the static car at 8 m is not a lead
    assert_eq!(lead.object_id, ObjectId(2));
    assert!((lead.speed - 9.0).abs() < 1e-12);
    let lanes = adjacent_lanes(&f.input(), &cfg);
    assert!(lanes.left_clear);
    assert!(!lanes.right_clear);
    assert_eq!(lanes.preferred(), Some(Side::Left));
}

#[test]
fn shadowed_ground_is_occlusion() {
    let cfg = ReasonerConfig::default();
    let mut cloud = ground(0.25);
    // remove the left half of the corridor between 15 m and 25 m
    cloud.points.retain(|p| !(p.x >= 15.0 && p.x < 25.0 && p.y >= 0.0 && p.y <= 1.75));
    let ego = EgoState::straight(8.0);
    let (cells, ambient) = occlusion_cells(&cloud, &ego, f64::INFINITY, &cfg);
    assert_eq!(cells.len(), 16);
    assert!((ambient - 16.0).abs() < 0.5, "ambient {ambient}");
    let f = Fixture::new(ego, cloud, Vec::new());
    let occ: Vec<_> = f.factors().into_iter().filter(|x| x.kind == RiskFactorKind::Occlusion).collect();
    assert_eq!(occ.len(), 2);
    for o in &occ {
        match o.evidence[0] {
            Evidence::CorridorCell { x_start, side, .. } => {
                assert!(x_start == 15.0 || x_start == 20.0);
                assert_eq!(side, Side::Left);
            }
            ref e => panic!("unexpected evidence {e:?}"),
        }
        assert!((o.magnitude - 1.0).abs() < 1e-12);
    }
    let t = f.reason();
    assert_eq!(t.speed, SpeedDecision::SlowApproach);
    assert_eq!(t.explanation, "Occluded view 15 to 25 m ahead; approaching slowly.");
}

#[test]
fn ground_behind_lead_is_not_judged() {
    let mut cloud = ground(0.25);
    // the lead hides everything behind its near face at 16 m
    cloud.points.retain(|p| !(p.x >= 16.0 && p.y.abs() <= 1.75));
    let f = Fixture::new(
        EgoState::straight(10.0),
        cloud,
        vec![object(1, ObjectClass::Vehicle, (18.25, 0.0), (4.5, 1.8, 1.5), 10.0)],
    );
    assert!(f.factors().iter().all(|x| x.kind != RiskFactorKind::Occlusion));
    let t = f.reason();
    assert_eq!(t.speed, SpeedDecision::FollowAhead);
}

fn collision(id: u32, class: ObjectClass, d: f64, speed: f64, magnitude: f64) -> RiskFactor {
    RiskFactor {
        kind: RiskFactorKind::CollisionRisk,
        object_id: Some(ObjectId(id)),
        magnitude,
        evidence: vec![Evidence::Object {
            object_id: ObjectId(id),
            class,
            min_distance: d,
            risk: magnitude,
            uncertainty: 0.0,
            speed,
        }],
    }
}

fn occlusion(x: f64) -> RiskFactor {
    RiskFactor {
        kind: RiskFactorKind::Occlusion,
        object_id: None,
        magnitude: 0.9,
        evidence: vec![Evidence::CorridorCell {
            x_start: x,
            x_end: x + 5.0,
            side: Side::Right,
            density: 1.0,
            ambient: 10.0,
        }],
    }
}

fn unpredictable(id: u32, d: f64) -> RiskFactor {
    RiskFactor {
        kind: RiskFactorKind::UnpredictableObject,
        object_id: Some(ObjectId(id)),
        magnitude: 1.0,
        evidence: vec![Evidence::Object {
            object_id: ObjectId(id),
            class: ObjectClass::Cyclist,
            min_distance: d,
            risk: 0.2,
            uncertainty: 0.9,
            speed: 3.0,
        }],
    }
}

const CLEAR: AdjacentLanes = AdjacentLanes {
    left_clear: true,
    right_clear: true,
};

fn run(factors: &[RiskFactor], ego: EgoState, lead: Option<LeadVehicle>, lanes: AdjacentLanes) -> DecisionTrace {
    decide(factors, &ego, lead.as_ref(), &lanes, &ReasonerConfig::default())
}

#[test]
fn cascade_examples() {
    let straight = EgoState::straight(10.0);
    let t = run(&[collision(1, ObjectClass::StaticObstacle, 10.8, 0.0, 0.58)], straight, None, CLEAR);
    assert_eq!((t.speed, t.path, t.lane_change_side), (SpeedDecision::SlowDown, Maneuver::LaneChange, Some(Side::Left)));
    assert_eq!(
        t.explanation,
        "Static static obstacle ahead at 10.8 m with clear left lane; slowing down and changing lanes left."
    );

    let right_only = AdjacentLanes {
        left_clear: false,
        right_clear: true,
    };
    let t = run(&[collision(1, ObjectClass::Vehicle, 10.8, 0.0, 0.58)], straight, None, right_only);
    assert_eq!((t.path, t.lane_change_side), (Maneuver::LaneChange, Some(Side::Right)));

    // blocked lanes: the moderate risk falls to the slow-down rule
    let t = run(&[collision(1, ObjectClass::Vehicle, 10.8, 0.0, 0.58)], straight, None, AdjacentLanes::BLOCKED);
    assert_eq!((t.speed, t.path), (SpeedDecision::SlowDown, Maneuver::Straight));

    // a moving obstacle is not passed
    let t = run(&[collision(1, ObjectClass::Cyclist, 10.8, 4.0, 0.58)], straight, None, CLEAR);
    assert_eq!((t.speed, t.path), (SpeedDecision::SlowDown, Maneuver::Straight));

    let t = run(&[occlusion(15.0)], straight, None, CLEAR);
    assert_eq!(t.speed, SpeedDecision::SlowApproach);

    let t = run(&[unpredictable(2, 12.0)], straight, None, CLEAR);
    assert_eq!(t.speed, SpeedDecision::SlowDown);
    assert_eq!(t.explanation, "Unpredictable cyclist at 12.0 m; slowing down.");

    let turning = EgoState {
        intent: Maneuver::Turn,
        ..straight
    };
    let t = run(&[], turning, None, CLEAR);
    assert_eq!((t.speed, t.path), (SpeedDecision::CautiousTurn, Maneuver::Turn));
    assert_eq!(t.explanation, "Turn intended; turning cautiously.");

    let lead = LeadVehicle {
        object_id: ObjectId(5),
        distance: 18.0,
        speed: 9.0,
    };
    let t = run(&[], straight, Some(lead), CLEAR);
    assert_eq!(t.speed, SpeedDecision::FollowAhead);
    assert_eq!(t.explanation, "Lead vehicle at 18.0 m; following vehicle ahead.");
    let far = LeadVehicle { distance: 30.0, ..lead };
    assert_eq!(run(&[], straight, Some(far), CLEAR).speed, SpeedDecision::SpeedLimit);
}

#[test]
fn cascade_priority() {
    let turning = EgoState {
        intent: Maneuver::Turn,
        ..EgoState::straight(6.0)
    };
    let all = [
        collision(1, ObjectClass::Pedestrian, 5.0, 1.0, 0.78),
        collision(2, ObjectClass::StaticObstacle, 11.0, 0.0, 0.58),
        occlusion(20.0),
        unpredictable(3, 9.0),
    ];
    let lead = LeadVehicle {
        object_id: ObjectId(9),
        distance: 10.0,
        speed: 5.0,
    };
    let t = run(&all, turning, Some(lead), CLEAR);
    assert_eq!((t.speed, t.path), (SpeedDecision::Brake, Maneuver::Turn));
    assert_eq!(t.steps[7].conclusion, "decision Brake / Turn (rule collision-brake)");
    assert!(t.explanation.starts_with("High risk due to nearby pedestrian at 5.0 m. "));
    assert!(t.explanation.ends_with("; braking."));

    let t = run(&all[1..], turning, Some(lead), CLEAR);
    assert_eq!((t.speed, t.path), (SpeedDecision::SlowDown, Maneuver::LaneChange));
    let t = run(&all[2..], turning, Some(lead), CLEAR);
    assert_eq!(t.speed, SpeedDecision::SlowApproach);
    assert_eq!(t.path, Maneuver::Turn);
    let t = run(&all[3..], turning, Some(lead), CLEAR);
    assert_eq!(t.speed, SpeedDecision::SlowDown);
    let t = run(&[], turning, Some(lead), CLEAR);
    assert_eq!(t.speed, SpeedDecision::CautiousTurn);
}

#[test]
fn trace_records_every_rule() {
    let t = run(&[occlusion(10.0)], EgoState::straight(5.0), None, CLEAR);
    let rules: Vec<RuleId> = t.steps.iter().map(|s| s.rule).collect();
    assert_eq!(
        rules,
        [
            RuleId::CollisionBrake,
            RuleId::StaticObstacleLaneChange,
            RuleId::Occlusion,
            RuleId::Unpredictable,
            RuleId::TurnIntent,
            RuleId::FollowLead,
            RuleId::SpeedLimit,
            RuleId::Decision,
        ]
    );
    assert!(t.steps.iter().enumerate().all(|(i, s)| s.index == i + 1));
    assert!(t.steps.iter().all(|s| !s.evidence.is_empty()));
    let text = render_trace(&t);
    assert!(text.contains("[PASS] occlusion"));
    assert!(text.contains("cell 10-15 m right"));
}

#[test]
fn trace_serializes() {
    let t = pedestrian_scene().reason();
    let json = serde_json::to_string(&t).unwrap();
    assert!(json.contains("\"rule\":\"collision-brake\""));
    let back: DecisionTrace = serde_json::from_str(&json).unwrap();
    assert_eq!(back, t);
}

#[test]
fn evidence_resolves_to_scene() {
    let mut cloud = ground(0.5);
    cloud.points.retain(|p| !(p.x >= 20.0 && p.x < 30.0 && p.y < 0.0));
    let f = Fixture::new(
        EgoState::straight(10.0),
        cloud,
        vec![
            object(1, ObjectClass::Pedestrian, (6.0, 0.4), (0.6, 0.6, 1.7), 1.0),
            object(2, ObjectClass::Vehicle, (9.0, -4.0), (4.5, 1.8, 1.5), 5.0),
        ],
    );
    let t = f.reason();
    for s in &t.steps {
        for e in &s.evidence {
            match *e {
                Evidence::Object { object_id, .. } | Evidence::Epistemic { object_id, .. } => {
                    assert!(f.objects.iter().any(|o| o.id == object_id))
                }
                Evidence::Edge { index, .. } => {
                    let edge = &f.graph.edges[index];
                    assert_eq!(edge.dst, crate::interaction::NodeId::Ego);
                }
                _ => {}
            }
        }
    }
    let brake = &t.steps[0];
    assert!(brake.passed);
    assert!(brake.evidence.iter().any(|e| matches!(e, Evidence::Edge { .. })));
}

#[test]
fn config_validation() {
    assert!(ReasonerConfig::default().validate().is_ok());
    let bad = ReasonerConfig {
        slow_level: 0.8,
        ..ReasonerConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = ReasonerConfig {
        occlusion_ratio: 1.5,
        ..ReasonerConfig::default()
    };
    assert!(bad.validate().is_err());
}

fn arb_factor() -> impl Strategy<Value = RiskFactor> {
    (0usize..3, 1u32..6, 0usize..4, 0.5f64..40.0, 0.0f64..5.0, 0.0f64..1.0).prop_map(|(k, id, c, d, v, m)| {
        let class = ObjectClass::ALL[c];
        match k {
            0 => collision(id, class, d, v, m),
            1 => occlusion((d / 5.0).floor() * 5.0),
            _ => RiskFactor {
                magnitude: m,
                ..unpredictable(id, d)
            },
        }
    })
}

fn arb_context() -> impl Strategy<Value = (EgoState, Option<LeadVehicle>, AdjacentLanes)> {
    (
        0.0f64..20.0,
        0usize..3,
        proptest::option::of((1u32..6, 1.0f64..60.0, 0.6f64..20.0)),
        any::<(bool, bool)>(),
    )
        .prop_map(|(speed, intent, lead, (l, r))| {
            let ego = EgoState {
                intent: Maneuver::ALL[intent],
                ..EgoState::straight(speed)
            };
            let lead = lead.map(|(id, distance, speed)| LeadVehicle {
                object_id: ObjectId(id),
                distance,
                speed,
            });
            (
                ego,
                lead,
                AdjacentLanes {
                    left_clear: l,
                    right_clear: r,
                },
            )
        })
}

proptest! {
    #[test]
    fn brake_is_absorbing(
        mut factors in proptest::collection::vec(arb_factor(), 0..8),
        m in 0.7f64..1.0,
        (ego, lead, lanes) in arb_context(),
    ) {
        factors.push(collision(9, ObjectClass::Pedestrian, 4.0, 1.0, m));
        let t = run(&factors, ego, lead, lanes);
        prop_assert_eq!(t.speed, SpeedDecision::Brake);
        prop_assert!(t.explanation.ends_with("; braking."));
    }

    #[test]
    fn decide_is_total_and_pure(
        factors in proptest::collection::vec(arb_factor(), 0..8),
        (ego, lead, lanes) in arb_context(),
    ) {
        let a = run(&factors, ego, lead, lanes);
        let b = run(&factors, ego, lead, lanes);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.steps.len(), 8);
        prop_assert_eq!(a.steps.iter().filter(|s| s.rule == RuleId::Decision).count(), 1);
        prop_assert!(a.fired().count() >= 1);
        // lane changes only come from the static-obstacle rule
        if a.path != ego.intent {
            prop_assert_eq!(a.path, Maneuver::LaneChange);
            prop_assert!(a.steps[1].passed);
        }
        prop_assert_eq!(a.lane_change_side.is_some(), a.steps[7].conclusion.ends_with("(rule static-obstacle-lane-change)"));
        prop_assert!(a.explanation.ends_with('.'));
        prop_assert!(!a.explanation.contains(".."));
    }
}
