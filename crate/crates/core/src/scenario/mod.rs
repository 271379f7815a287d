//! Seeded synthetic scenes with exact ground truth.
//!
//! Each template places its key actors relative to the ego (origin, facing
//! `+x`), adds optional background clutter off the road, then synthesizes a
//! LiDAR sweep: uniform ground returns, the sensor-facing side faces of every
//! box, radial range noise, and 2D azimuth shadowing.

mod lidar;
mod suite;

pub use lidar::{surface_distance, GROUND_EXTENT};
pub use suite::{generate_suite, read_manifest, write_manifest, ExpectedDecision, Manifest, ManifestEntry};

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionLabel;
use crate::reasoner::{corridor_polygon, ReasonerConfig, SpeedDecision};
use crate::rng::{self, Rng};
use crate::scene::{
    footprint_overlap_area, EgoState, GroundTruthObject, Maneuver, ObjectClass, ObjectId, OrientedBox, PointCloud,
    Scene, Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    EmptyRoad,
    LeadVehicle,
    PedestrianCrossing,
    OccludedJunction,
    DenseTraffic,
    StaticVehicleAhead,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::EmptyRoad,
        Template::LeadVehicle,
        Template::PedestrianCrossing,
        Template::OccludedJunction,
        Template::DenseTraffic,
        Template::StaticVehicleAhead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::EmptyRoad => "empty-road",
            Template::LeadVehicle => "lead-vehicle",
            Template::PedestrianCrossing => "pedestrian-crossing",
            Template::OccludedJunction => "occluded-junction",
            Template::DenseTraffic => "dense-traffic",
            Template::StaticVehicleAhead => "static-vehicle-ahead",
        }
    }

    /// The decision a correct pipeline should reach on this template.
    pub fn expected(self) -> ExpectedDecision {
        let (speed, path) = match self {
            Template::EmptyRoad => (SpeedDecision::SpeedLimit, Maneuver::Straight),
            Template::LeadVehicle | Template::DenseTraffic => (SpeedDecision::FollowAhead, Maneuver::Straight),
            Template::PedestrianCrossing => (SpeedDecision::Brake, Maneuver::Straight),
            Template::OccludedJunction => (SpeedDecision::SlowApproach, Maneuver::Turn),
            Template::StaticVehicleAhead => (SpeedDecision::SlowDown, Maneuver::LaneChange),
        };
        ExpectedDecision { speed, path }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Template::ALL.iter().map(|t| t.name()).collect();
                Error::Config(format!("unknown template {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub template: Template,
    pub seed: u64,
    /// Background objects placed off the road. Ignored by `EmptyRoad`.
    #[serde(default)]
    pub n_objects: usize,
    /// Range noise standard deviation, meters.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_density")]
    pub points_per_m2: f64,
}

fn default_noise() -> f64 {
    0.02
}

fn default_density() -> f64 {
    50.0
}

impl ScenarioSpec {
    pub fn new(template: Template, seed: u64) -> Self {
        ScenarioSpec {
            template,
            seed,
            n_objects: 0,
            noise: default_noise(),
            points_per_m2: default_density(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        if !(self.points_per_m2.is_finite() && self.points_per_m2 > 0.0) {
            return Err(Error::Config(format!("points_per_m2 must be > 0, got {}", self.points_per_m2)));
        }
        if self.n_objects > 32 {
            return Err(Error::Config(format!("n_objects must be <= 32, got {}", self.n_objects)));
        }
        Ok(())
    }
}

fn u(r: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng::uniform(r, lo, hi)
}

fn sign(r: &mut Rng) -> f64 {
    if u(r, 0.0, 1.0) < 0.5 {
        -1.0
    } else {
        1.0
    }
}

fn actor(class: ObjectClass, x: f64, y: f64, dims: (f64, f64, f64), yaw: f64, speed: f64) -> GroundTruthObject {
    let bbox = OrientedBox::new(Vec3::new(x, y, 0.5 * dims.2), dims.0, dims.1, dims.2, yaw).expect("positive extents");
    let (s, c) = yaw.sin_cos();
    GroundTruthObject {
        bbox,
        class,
        velocity: Vec3::new(speed * c, speed * s, 0.0),
    }
}

fn car_dims(r: &mut Rng) -> (f64, f64, f64) {
    (u(r, 4.2, 4.8), u(r, 1.7, 1.9), u(r, 1.4, 1.6))
}

fn pedestrian_dims(r: &mut Rng) -> (f64, f64, f64) {
    (u(r, 0.5, 0.7), u(r, 0.5, 0.7), u(r, 1.6, 1.85))
}

/// Template actors, ego state first.
fn place_template(t: Template, r: &mut Rng) -> (EgoState, Vec<GroundTruthObject>) {
    let straight = |speed| EgoState::straight(speed);
    match t {
        Template::EmptyRoad => (straight(u(r, 8.0, 14.0)), Vec::new()),
        Template::LeadVehicle => {
            let ego = straight(u(r, 8.0, 14.0));
            let dims = car_dims(r);
            let (x, y, yaw) = (u(r, 14.0, 22.0), u(r, -0.3, 0.3), u(r, -0.03, 0.03));
            let speed = ego.speed + u(r, -1.0, 1.0);
            (ego, vec![actor(ObjectClass::Vehicle, x, y, dims, yaw, speed)])
        }
        Template::PedestrianCrossing => {
            let ego = straight(u(r, 6.0, 12.0));
            let dims = pedestrian_dims(r);
            let (x, y) = (u(r, 5.5, 6.8), u(r, -1.2, 1.2));
            // walking across the lane, toward the far side
            let dir = if y > 0.0 { -1.0 } else { 1.0 };
            let speed = u(r, 1.0, 1.6);
            (ego, vec![actor(ObjectClass::Pedestrian, x, y, dims, dir * FRAC_PI_2, speed)])
        }
        Template::StaticVehicleAhead => {
            let ego = straight(u(r, 8.0, 12.0));
            let dims = car_dims(r);
            let (x, y, yaw) = (u(r, 10.2, 11.8), u(r, -0.3, 0.3), u(r, -0.05, 0.05));
            (ego, vec![actor(ObjectClass::Vehicle, x, y, dims, yaw, 0.0)])
        }
        Template::OccludedJunction => {
            let mut ego = straight(u(r, 5.0, 8.0));
            ego.intent = Maneuver::Turn;
            // a tall obstacle at the right road edge whose shadow covers the right half of the corridor
            let dims = (u(r, 3.0, 5.0), u(r, 2.6, 3.0), 2.5);
            let (x, y) = (u(r, 14.0, 17.0), u(r, -1.2, -0.9));
            let occluder = actor(ObjectClass::StaticObstacle, x, y, dims, 0.0, 0.0);
            // cross traffic entering from the right, inside the occluder's shadow wedge
            let car = car_dims(r);
            let cx = u(r, 33.0, 38.0);
            let tan_lo = (y - 0.5 * dims.1) / (x - 0.5 * dims.0);
            let lo = (cx - 0.5 * car.1) * tan_lo + 0.5 * car.0 + 0.05;
            let hi = -0.5 * car.0 - 0.05;
            let cy = if lo < hi { u(r, lo, hi) } else { 0.5 * (lo + hi) };
            let v = u(r, 5.0, 8.0);
            let hidden = actor(ObjectClass::Vehicle, cx, cy, car, FRAC_PI_2, v);
            (ego, vec![occluder, hidden])
        }
        Template::DenseTraffic => {
            let ego = straight(u(r, 8.0, 12.0));
            let dims = car_dims(r);
            let (x, y) = (u(r, 14.0, 22.0), u(r, -0.3, 0.3));
            let mut out = vec![actor(ObjectClass::Vehicle, x, y, dims, 0.0, ego.speed + u(r, -1.0, 1.0))];
            let n = 2 + (u(r, 0.0, 3.0) as usize);
            let mut slot = u(r, 2.0, 8.0);
            for k in 0..n {
                let lane = if k % 2 == 0 { 3.5 } else { -3.5 };
                let dims = car_dims(r);
                let y = lane + u(r, -0.2, 0.2);
                let speed = ego.speed + u(r, -2.0, 2.0);
                out.push(actor(ObjectClass::Vehicle, slot, y, dims, 0.0, speed));
                if k % 2 == 1 {
                    slot += u(r, 9.0, 14.0);
                }
            }
            (ego, out)
        }
    }
}

fn overlaps(a: &OrientedBox, b: &OrientedBox, margin: f64) -> bool {
    let grow = |o: &OrientedBox| {
        OrientedBox::new(o.center, o.length + 2.0 * margin, o.width + 2.0 * margin, o.height, o.yaw)
            .expect("positive extents")
    };
    footprint_overlap_area(&grow(a).footprint(), &grow(b).footprint()) > 0.0
}

/// Parked cars, roadside obstacles and sidewalk pedestrians at `|y| >= 7`.
fn place_background(n: usize, existing: &[GroundTruthObject], r: &mut Rng) -> Vec<GroundTruthObject> {
    let mut out: Vec<GroundTruthObject> = Vec::new();
    for _ in 0..n {
        for _attempt in 0..50 {
            let side = sign(r);
            let x = u(r, 5.0, 40.0);
            let kind = u(r, 0.0, 3.0) as usize;
            let o = match kind {
                0 => {
                    let dims = car_dims(r);
                    actor(ObjectClass::Vehicle, x, side * u(r, 7.5, 9.5), dims, u(r, -0.1, 0.1), 0.0)
                }
                1 => {
                    let dims = (u(r, 0.3, 1.2), u(r, 0.3, 1.2), u(r, 0.8, 2.5));
                    actor(ObjectClass::StaticObstacle, x, side * u(r, 7.0, 10.0), dims, u(r, -0.5, 0.5), 0.0)
                }
                _ => {
                    let dims = pedestrian_dims(r);
                    let v = u(r, 0.0, 1.5);
                    actor(ObjectClass::Pedestrian, x, side * u(r, 7.0, 10.0), dims, u(r, -0.2, 0.2), v)
                }
            };
            let clash = existing.iter().chain(&out).any(|e| overlaps(&e.bbox, &o.bbox, 0.3));
            if !clash {
                out.push(o);
                break;
            }
        }
    }
    out
}

fn synthesize(boxes: &[OrientedBox], spec: &ScenarioSpec, r: &mut Rng, shadows: bool) -> PointCloud {
    let mut returns = lidar::sample_surfaces(boxes, spec.points_per_m2, r);
    lidar::add_range_noise(&mut returns, spec.noise, r);
    if shadows {
        returns = lidar::apply_shadows(returns, boxes);
    }
    PointCloud::new(format!("{}-{}", spec.template.name(), spec.seed), lidar::to_points(&returns))
}

fn layout(spec: &ScenarioSpec) -> (EgoState, Vec<GroundTruthObject>, Rng) {
    let mut r = rng::stream(spec.seed, spec.template.stream());
    let (ego, mut gt) = place_template(spec.template, &mut r);
    if spec.template != Template::EmptyRoad {
        let bg = place_background(spec.n_objects, &gt, &mut r);
        gt.extend(bg);
    }
    (ego, gt, r)
}

/// Builds the scene for `spec`. Objects are left empty for a detector to fill;
/// ground truth is exact.
pub fn generate(spec: &ScenarioSpec) -> Result<Scene> {
    spec.validate()?;
    let (ego, gt, mut r) = layout(spec);
    let boxes: Vec<OrientedBox> = gt.iter().map(|g| g.bbox).collect();
    let cloud = synthesize(&boxes, spec, &mut r, true);
    Scene::new(0.0, ego, cloud, Vec::new(), Some(gt))
}

/// Same layout and samples as [`generate`] without shadowing.
pub fn generate_unshadowed(spec: &ScenarioSpec) -> Result<Scene> {
    spec.validate()?;
    let (ego, gt, mut r) = layout(spec);
    let boxes: Vec<OrientedBox> = gt.iter().map(|g| g.bbox).collect();
    let cloud = synthesize(&boxes, spec, &mut r, false);
    Scene::new(0.0, ego, cloud, Vec::new(), Some(gt))
}

/// Closing speed above which an object in the corridor must be yielded to, m/s.
pub const CLOSING_SPEED: f64 = 0.5;

/// Interaction labels from ground truth, ids `1..=n` in ground-truth order
/// (the oracle detector's numbering).
///
/// * Yield: in the corridor and a pedestrian, or closing faster than 0.5 m/s
/// * Follow: the nearest in-corridor vehicle otherwise (moving away or matching speed)
/// * Ignore: everything else
pub fn label_interactions(scene: &Scene) -> Result<Vec<(ObjectId, InteractionLabel)>> {
    let gt = scene
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Precondition("interaction labels need scene ground truth".into()))?;
    let ego = &scene.ego;
    let corridor = corridor_polygon(ego, &ReasonerConfig::default());
    let (s, c) = ego.heading.sin_cos();
    let mut labels: Vec<(ObjectId, InteractionLabel)> = Vec::with_capacity(gt.len());
    let mut lead: Option<(usize, f64)> = None;
    for (k, g) in gt.iter().enumerate() {
        let id = ObjectId(k as u32 + 1);
        let in_corridor = footprint_overlap_area(&g.bbox.footprint(), &corridor) > 0.0;
        let forward = g.velocity.x * c + g.velocity.y * s;
        let closing = ego.speed - forward;
        let label = if in_corridor && (g.class == ObjectClass::Pedestrian || closing > CLOSING_SPEED) {
            InteractionLabel::Yield
        } else {
            if in_corridor && g.class == ObjectClass::Vehicle {
                let dx = (g.bbox.center.x - ego.position.x) * c + (g.bbox.center.y - ego.position.y) * s;
                if lead.is_none_or(|(_, d)| dx < d) {
                    lead = Some((k, dx));
                }
            }
            InteractionLabel::Ignore
        };
        labels.push((id, label));
    }
    if let Some((k, _)) = lead {
        labels[k].1 = InteractionLabel::Follow;
    }
    Ok(labels)
}
