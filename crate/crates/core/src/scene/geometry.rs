use std::f64::consts::{PI, TAU};

use super::{OrientedBox, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Maps `a` onto the equivalent angle in `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("cannot wrap non-finite angle {a}")));
    }
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    if r <= -PI {
        r += TAU;
    }
    Ok(r)
}

/// The eight corners: bottom face counter-clockwise, then the top face in the same order.
pub fn box_corners(b: &OrientedBox) -> [Vec3; 8] {
    let fp = b.footprint();
    let (z0, z1) = b.z_range();
    let mut out = [Vec3::ZERO; 8];
    for (i, p) in fp.iter().enumerate() {
        out[i] = Vec3::new(p.x, p.y, z0);
        out[i + 4] = Vec3::new(p.x, p.y, z1);
    }
    out
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sutherland–Hodgman clip of `subject` against the convex counter-clockwise `clip`.
pub fn convex_clip(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn segment_line_intersection(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    Point2 {
        x: p.x + t * (q.x - p.x),
        y: p.y + t * (q.y - p.y),
    }
}

/// Area of the overlap of two convex counter-clockwise polygons.
pub fn footprint_overlap_area(a: &[Point2], b: &[Point2]) -> f64 {
    polygon_area(&convex_clip(a, b)).max(0.0)
}

/// Yaw-aware 3D IoU: footprint overlap area times vertical overlap, over the union volume.
pub fn box_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (az0, az1) = a.z_range();
    let (bz0, bz1) = b.z_range();
    let dz = az1.min(bz1) - az0.max(bz0);
    if dz <= 0.0 {
        return 0.0;
    }
    // Cheap rejection on bounding circles.
    let reach = 0.5 * (a.length.hypot(a.width) + b.length.hypot(b.width));
    if (a.center.x - b.center.x).hypot(a.center.y - b.center.y) > reach {
        return 0.0;
    }
    let inter = footprint_overlap_area(&a.footprint(), &b.footprint()) * dz;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
