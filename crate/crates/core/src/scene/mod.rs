//! Scene domain types shared by every pipeline stage.
//!
//! Everything is expressed in the ego frame: the ego vehicle sits at the
//! origin, `x` points forward, `y` left and `z` up. Distances are meters,
//! angles radians.

mod geometry;
pub mod io;

pub use geometry::{
    box_corners, box_iou, convex_clip, footprint_overlap_area, polygon_area, wrap_angle, Point2,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// A 3-vector, serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn norm_xy(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A single LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl LidarPoint {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Result<Self> {
        let p = LidarPoint { x, y, z, intensity };
        p.validate()?;
        Ok(p)
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn range(&self) -> f64 {
        self.position().norm()
    }

    fn validate(&self) -> Result<()> {
        if !self.position().is_finite() || !self.intensity.is_finite() {
            return Err(Error::Domain("lidar point has a non-finite field".into()));
        }
        if self.intensity < 0.0 {
            return Err(Error::Domain(format!(
                "lidar intensity {} is negative",
                self.intensity
            )));
        }
        Ok(())
    }
}

/// An ordered set of LiDAR returns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub frame_id: String,
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, points: Vec<LidarPoint>) -> Self {
        PointCloud {
            frame_id: frame_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gravity-aligned 3D box: center, extents along its own axes, and yaw about `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct OrientedBox {
    pub center: Vec3,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
}

#[derive(Deserialize)]
struct RawBox {
    center: Vec3,
    length: f64,
    width: f64,
    height: f64,
    yaw: f64,
}

impl TryFrom<RawBox> for OrientedBox {
    type Error = Error;
    fn try_from(r: RawBox) -> Result<Self> {
        OrientedBox::new(r.center, r.length, r.width, r.height, r.yaw)
    }
}

impl OrientedBox {
    /// Builds a box, normalizing `yaw` into `(-pi, pi]`.
    pub fn new(center: Vec3, length: f64, width: f64, height: f64, yaw: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::Domain("box center is not finite".into()));
        }
        for (name, v) in [("length", length), ("width", width), ("height", height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("box {name} must be > 0, got {v}")));
            }
        }
        Ok(OrientedBox {
            center,
            length,
            width,
            height,
            yaw: wrap_angle(yaw)?,
        })
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Parameter vector `(x, y, z, l, w, h, yaw)`.
    pub fn params(&self) -> [f64; 7] {
        [
            self.center.x,
            self.center.y,
            self.center.z,
            self.length,
            self.width,
            self.height,
            self.yaw,
        ]
    }

    /// Footprint corners in counter-clockwise order.
    pub fn footprint(&self) -> [Point2; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| Point2 {
            x: self.center.x + c * u - s * v,
            y: self.center.y + s * u + c * v,
        })
    }

    pub fn z_range(&self) -> (f64, f64) {
        (
            self.center.z - 0.5 * self.height,
            self.center.z + 0.5 * self.height,
        )
    }

    /// Point expressed in the box's local axes (origin at the center).
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.center;
        Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.contains_inflated(p, 0.0)
    }

    /// Membership test against the box grown by `margin` on every side.
    pub fn contains_inflated(&self, p: Vec3, margin: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.length + margin
            && l.y.abs() <= 0.5 * self.width + margin
            && l.z.abs() <= 0.5 * self.height + margin
    }
}

/// Object categories; `K = 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
    Cyclist,
    StaticObstacle,
}

impl ObjectClass {
    pub const COUNT: usize = 4;
    pub const ALL: [ObjectClass; 4] = [
        ObjectClass::Vehicle,
        ObjectClass::Pedestrian,
        ObjectClass::Cyclist,
        ObjectClass::StaticObstacle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn noun(self) -> &'static str {
        match self {
            ObjectClass::Vehicle => "vehicle",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Cyclist => "cyclist",
            ObjectClass::StaticObstacle => "static obstacle",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.noun())
    }
}

/// Probability mass over [`ObjectClass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ClassDistribution([f64; ObjectClass::COUNT]);

impl ClassDistribution {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(probs: [f64; ObjectClass::COUNT]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::Domain(format!(
                "class probabilities must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::Domain(format!(
                "class probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ClassDistribution(probs))
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: [f64; ObjectClass::COUNT]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Domain(format!("cannot normalize weights {weights:?}")));
        }
        Self::new(weights.map(|w| w / sum))
    }

    pub fn one_hot(class: ObjectClass) -> Self {
        let mut p = [0.0; ObjectClass::COUNT];
        p[class.index()] = 1.0;
        ClassDistribution(p)
    }

    pub fn uniform() -> Self {
        ClassDistribution([1.0 / ObjectClass::COUNT as f64; ObjectClass::COUNT])
    }

    /// `mass` on `class`, the remainder spread evenly over the others.
    pub fn dominant(class: ObjectClass, mass: f64) -> Self {
        let rest = (1.0 - mass) / (ObjectClass::COUNT - 1) as f64;
        let mut p = [rest; ObjectClass::COUNT];
        p[class.index()] = mass;
        ClassDistribution(p)
    }

    pub fn probs(&self) -> &[f64; ObjectClass::COUNT] {
        &self.0
    }

    pub fn argmax(&self) -> ObjectClass {
        let mut best = 0;
        for i in 1..ObjectClass::COUNT {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        ObjectClass::ALL[best]
    }
}

impl TryFrom<[f64; 4]> for ClassDistribution {
    type Error = Error;
    fn try_from(p: [f64; 4]) -> Result<Self> {
        ClassDistribution::new(p)
    }
}

impl From<ClassDistribution> for [f64; 4] {
    fn from(d: ClassDistribution) -> Self {
        d.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A detected (or tracked) object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub id: ObjectId,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub velocity: Vec3,
    pub class_dist: ClassDistribution,
    /// Indices into the scene point cloud.
    #[serde(default)]
    pub support_points: Vec<usize>,
}

impl TrackedObject {
    pub fn class(&self) -> ObjectClass {
        self.class_dist.argmax()
    }
}

/// Driving maneuver; used both as ego intent and as the path decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Maneuver {
    Straight,
    Turn,
    LaneChange,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::Straight, Maneuver::Turn, Maneuver::LaneChange];

    pub fn label(self) -> &'static str {
        match self {
            Maneuver::Straight => "Straight",
            Maneuver::Turn => "Turn",
            Maneuver::LaneChange => "LaneChange",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEgo")]
pub struct EgoState {
    pub position: Vec3,
    pub heading: f64,
    pub speed: f64,
    /// Reference orientation used for the deviation angle.
    pub lane_heading: f64,
    pub intent: Maneuver,
}

#[derive(Deserialize)]
struct RawEgo {
    #[serde(default)]
    position: Vec3,
    heading: f64,
    speed: f64,
    lane_heading: f64,
    intent: Maneuver,
}

impl TryFrom<RawEgo> for EgoState {
    type Error = Error;
    fn try_from(r: RawEgo) -> Result<Self> {
        let mut ego = EgoState::new(r.heading, r.speed, r.lane_heading, r.intent)?;
        ego.position = r.position;
        Ok(ego)
    }
}

impl EgoState {
    pub fn new(heading: f64, speed: f64, lane_heading: f64, intent: Maneuver) -> Result<Self> {
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(Error::Domain(format!("ego speed must be >= 0, got {speed}")));
        }
        Ok(EgoState {
            position: Vec3::ZERO,
            heading: wrap_angle(heading)?,
            speed,
            lane_heading: wrap_angle(lane_heading)?,
            intent,
        })
    }

    /// Ego driving straight along `+x` on a lane aligned with `+x`.
    pub fn straight(speed: f64) -> Self {
        EgoState {
            position: Vec3::ZERO,
            heading: 0.0,
            speed,
            lane_heading: 0.0,
            intent: Maneuver::Straight,
        }
    }

    pub fn velocity(&self) -> Vec3 {
        let (s, c) = self.heading.sin_cos();
        Vec3::new(self.speed * c, self.speed * s, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub class: ObjectClass,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub timestamp: f64,
    pub ego: EgoState,
    pub cloud: PointCloud,
    pub objects: Vec<TrackedObject>,
    pub ground_truth: Option<Vec<GroundTruthObject>>,
}

impl Scene {
    pub fn new(
        timestamp: f64,
        ego: EgoState,
        cloud: PointCloud,
        objects: Vec<TrackedObject>,
        ground_truth: Option<Vec<GroundTruthObject>>,
    ) -> Result<Self> {
        let scene = Scene {
            timestamp,
            ego,
            cloud,
            objects,
            ground_truth,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timestamp.is_finite() && self.timestamp >= 0.0) {
            return Err(Error::Domain(format!(
                "scene timestamp must be >= 0, got {}",
                self.timestamp
            )));
        }
        let mut ids: Vec<ObjectId> = self.objects.iter().map(|o| o.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate object id in scene".into()));
        }
        for o in &self.objects {
            if let Some(&bad) = o.support_points.iter().find(|&&i| i >= self.cloud.len()) {
                return Err(Error::Domain(format!(
                    "object {} references point {bad} outside the cloud",
                    o.id
                )));
            }
        }
        if let Some(gt) = &self.ground_truth {
            for (i, a) in gt.iter().enumerate() {
                if gt[..i].iter().any(|b| b.bbox == a.bbox) {
                    return Err(Error::Domain("duplicate ground-truth box".into()));
                }
            }
        }
        Ok(())
    }

    pub fn object(&self, id: ObjectId) -> Option<&TrackedObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}
