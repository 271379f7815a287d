//! Point-cloud synthesis for generated scenes: ground and visible box faces,
//! radial range noise, and 2D azimuth shadowing from the sensor at the origin.

use crate::rng::{self, Rng};
use crate::scene::{LidarPoint, OrientedBox, Point2, Vec3};

/// Ground sampling extent in the ego frame, `(x_min, x_max, half_width)`.
pub const GROUND_EXTENT: (f64, f64, f64) = (-5.0, 45.0, 12.0);

/// One sampled return before shadowing; `owner` is the box index for surface points.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawReturn {
    pub position: Vec3,
    pub intensity: f64,
    pub owner: Option<usize>,
}

/// A side face: center, outward normal, in-plane direction, half length.
fn side_faces(b: &OrientedBox) -> [(Point2, Point2, Point2, f64); 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hl, hw) = (0.5 * b.length, 0.5 * b.width);
    let along = Point2 { x: c, y: s };
    let left = Point2 { x: -s, y: c };
    let at = |u: f64, v: f64| Point2 {
        x: b.center.x + c * u - s * v,
        y: b.center.y + s * u + c * v,
    };
    let neg = |p: Point2| Point2 { x: -p.x, y: -p.y };
    [
        (at(hl, 0.0), along, left, hw),
        (at(-hl, 0.0), neg(along), left, hw),
        (at(0.0, hw), left, along, hl),
        (at(0.0, -hw), neg(left), along, hl),
    ]
}

/// Ground points with footprints removed, then the sensor-facing side faces of every box.
pub(crate) fn sample_surfaces(boxes: &[OrientedBox], density: f64, r: &mut Rng) -> Vec<RawReturn> {
    let (x0, x1, hw) = GROUND_EXTENT;
    let n_ground = ((x1 - x0) * 2.0 * hw * density).round() as usize;
    let mut out = Vec::with_capacity(n_ground);
    for _ in 0..n_ground {
        let x = rng::uniform(r, x0, x1);
        let y = rng::uniform(r, -hw, hw);
        let intensity = rng::uniform(r, 5.0, 40.0);
        let p = Vec3::new(x, y, 0.0);
        if boxes.iter().any(|b| under(b, p)) {
            continue;
        }
        out.push(RawReturn {
            position: p,
            intensity,
            owner: None,
        });
    }
    for (k, b) in boxes.iter().enumerate() {
        let (z0, z1) = b.z_range();
        for (center, normal, dir, half) in side_faces(b) {
            if normal.x * center.x + normal.y * center.y >= 0.0 {
                continue;
            }
            let n = (2.0 * half * b.height * density).round() as usize;
            for _ in 0..n {
                let u = rng::uniform(r, -half, half);
                let z = rng::uniform(r, z0, z1);
                let intensity = rng::uniform(r, 60.0, 200.0);
                out.push(RawReturn {
                    position: Vec3::new(center.x + u * dir.x, center.y + u * dir.y, z),
                    intensity,
                    owner: Some(k),
                });
            }
        }
    }
    out
}

fn under(b: &OrientedBox, p: Vec3) -> bool {
    let l = b.to_local(p);
    l.x.abs() <= 0.5 * b.length && l.y.abs() <= 0.5 * b.width
}

/// Moves every return along its sensor ray by `N(0, std)`.
pub(crate) fn add_range_noise(returns: &mut [RawReturn], std: f64, r: &mut Rng) {
    if std == 0.0 {
        return;
    }
    for ret in returns {
        let p = ret.position;
        let range = p.norm();
        let e = std * rng::normal(r);
        if range > 1e-9 {
            ret.position = p * (1.0 + e / range);
        }
    }
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn inside(poly: &[Point2; 4], p: Point2) -> bool {
    (0..4).all(|i| orient(poly[i], poly[(i + 1) % 4], p) >= 0.0)
}

/// Whether the sight line from the origin to `p` passes through the footprint.
pub(crate) fn shadowed_by(footprint: &[Point2; 4], p: Point2) -> bool {
    let o = Point2 { x: 0.0, y: 0.0 };
    inside(footprint, p) || (0..4).any(|i| segments_cross(o, p, footprint[i], footprint[(i + 1) % 4]))
}

/// Drops returns whose sight line crosses another box's footprint. Height is
/// ignored, so a low box shadows everything behind it.
pub(crate) fn apply_shadows(returns: Vec<RawReturn>, boxes: &[OrientedBox]) -> Vec<RawReturn> {
    let footprints: Vec<[Point2; 4]> = boxes.iter().map(OrientedBox::footprint).collect();
    returns
        .into_iter()
        .filter(|ret| {
            let p = Point2 {
                x: ret.position.x,
                y: ret.position.y,
            };
            !footprints
                .iter()
                .enumerate()
                .any(|(k, fp)| ret.owner != Some(k) && shadowed_by(fp, p))
        })
        .collect()
}

pub(crate) fn to_points(returns: &[RawReturn]) -> Vec<LidarPoint> {
    returns
        .iter()
        .map(|r| LidarPoint::new(r.position.x, r.position.y, r.position.z, r.intensity).expect("finite sample"))
        .collect()
}

/// Distance from `p` to the surface of `b`.
pub fn surface_distance(b: &OrientedBox, p: Vec3) -> f64 {
    let l = b.to_local(p);
    let h = [0.5 * b.length, 0.5 * b.width, 0.5 * b.height];
    let q = [l.x.abs() - h[0], l.y.abs() - h[1], l.z.abs() - h[2]];
    let outside = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
    let inner = q[0].max(q[1]).max(q[2]).min(0.0);
    outside + inner.abs()
}
