//! On-disk formats for scenes and point clouds.
//!
//! A scene is a JSON document
//!
//! ```json
//! {
//!   "timestamp": 0.0,
//!   "ego": {"position": [0,0,0], "heading": 0.0, "speed": 10.0,
//!           "lane_heading": 0.0, "intent": "Straight"},
//!   "objects": [{"id": 1, "box": {...}, "velocity": [vx,vy,vz],
//!                "class_dist": [pv, pp, pc, ps], "support_points": [..]}],
//!   "ground_truth": [{"box": {...}, "class": "Pedestrian", "velocity": [..]}],
//!   "cloud_file": "scene_0001.pts"
//! }
//! ```
//!
//! where `box` is `{"center": [x,y,z], "length", "width", "height", "yaw"}` and
//! `cloud_file` is resolved relative to the scene file. `ground_truth` may be
//! `null` or absent.
//!
//! Point clouds come in two flavors, told apart by the first bytes:
//!
//! * ASCII: one point per line, `x y z intensity`, whitespace separated;
//!   lines starting with `#` and blank lines are ignored. Written with the
//!   shortest round-trip float representation, so ASCII is lossless.
//! * Binary: a 16-byte header (8-byte magic [`BINARY_MAGIC`] followed by the
//!   point count as little-endian `u64`), then four little-endian `f32` per
//!   point in `x y z intensity` order. Values are narrowed to `f32`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EgoState, GroundTruthObject, LidarPoint, PointCloud, Scene, TrackedObject};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"PTCLF32\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Ascii,
    Binary,
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Ascii => "pts",
            CloudFormat::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    timestamp: f64,
    ego: EgoState,
    #[serde(default)]
    objects: Vec<TrackedObject>,
    #[serde(default)]
    ground_truth: Option<Vec<GroundTruthObject>>,
    cloud_file: String,
}

pub fn write_cloud_ascii(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 40 + 64);
    out.push_str("# frame ");
    out.push_str(&cloud.frame_id);
    out.push('\n');
    out.push_str("# x y z intensity\n");
    for p in &cloud.points {
        out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, p.intensity));
    }
    out
}

pub fn write_cloud_binary(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + cloud.len() * 16);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parses either cloud format from raw bytes.
pub fn parse_cloud(bytes: &[u8], frame_id: &str) -> Result<PointCloud> {
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(bytes, frame_id)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::parse("point cloud", format!("not UTF-8 text: {e}")))?;
        parse_ascii(text, frame_id)
    }
}

fn parse_binary(bytes: &[u8], frame_id: &str) -> Result<PointCloud> {
    if bytes.len() < 16 {
        return Err(Error::parse("binary point cloud", "truncated header"));
    }
    let mut count = [0u8; 8];
    count.copy_from_slice(&bytes[8..16]);
    let count = u64::from_le_bytes(count) as usize;
    let body = &bytes[16..];
    if body.len() != count.saturating_mul(16) {
        return Err(Error::parse(
            "binary point cloud",
            format!("header declares {count} points but body has {} bytes", body.len()),
        ));
    }
    let points = body
        .chunks_exact(16)
        .map(|chunk| {
            let f = |i: usize| {
                let mut b = [0u8; 4];
                b.copy_from_slice(&chunk[4 * i..4 * i + 4]);
                f32::from_le_bytes(b) as f64
            };
            LidarPoint::new(f(0), f(1), f(2), f(3))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud::new(frame_id, points))
}

fn parse_ascii(text: &str, frame_id: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut frame = frame_id.to_string();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(f) = comment.trim().strip_prefix("frame ") {
                frame = f.trim().to_string();
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                format!("point cloud line {}", lineno + 1),
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|e| {
                Error::parse(format!("point cloud line {}", lineno + 1), format!("{e}"))
            })?;
        }
        points.push(LidarPoint::new(v[0], v[1], v[2], v[3])?);
    }
    Ok(PointCloud::new(frame, points))
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_cloud(&bytes, &stem)
}

pub fn write_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::Ascii => write_cloud_ascii(cloud).into_bytes(),
        CloudFormat::Binary => write_cloud_binary(cloud),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SceneDocument = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let cloud_path = path
        .parent()
        .map(|d| d.join(&doc.cloud_file))
        .unwrap_or_else(|| PathBuf::from(&doc.cloud_file));
    let cloud = read_cloud(&cloud_path)?;
    Scene::new(doc.timestamp, doc.ego, cloud, doc.objects, doc.ground_truth)
}

/// Writes `<dir>/<stem>.json` plus its cloud file; returns the scene path.
pub fn write_scene(dir: &Path, stem: &str, scene: &Scene, format: CloudFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cloud_file = format!("{stem}.{}", format.extension());
    write_cloud(&dir.join(&cloud_file), &scene.cloud, format)?;
    let doc = SceneDocument {
        timestamp: scene.timestamp,
        ego: scene.ego,
        objects: scene.objects.clone(),
        ground_truth: scene.ground_truth.clone(),
        cloud_file,
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cloud() -> PointCloud {
        PointCloud::new(
            "test",
            vec![
                LidarPoint::new(1.5, -2.25, 0.125, 10.0).unwrap(),
                LidarPoint::new(0.1, 0.2, 0.3, 0.0).unwrap(),
                LidarPoint::new(-40.0, 3.0, 1.0, 200.0).unwrap(),
            ],
        )
    }

    #[test]
    fn ascii_round_trip_is_lossless() {
        let cloud = sample_cloud();
        let parsed = parse_cloud(write_cloud_ascii(&cloud).as_bytes(), "x").unwrap();
        assert_eq!(parsed, cloud);
    }

    #[test]
    fn binary_round_trip_preserves_f32_values() {
        let cloud = sample_cloud();
        let bytes = write_cloud_binary(&cloud);
        assert_eq!(&bytes[..8], BINARY_MAGIC);
        assert_eq!(bytes.len(), 16 + 3 * 16);
        let parsed = parse_cloud(&bytes, "test").unwrap();
        assert_eq!(parsed.points.len(), 3);
        for (a, b) in parsed.points.iter().zip(&cloud.points) {
            assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
        }
    }

    #[test]
    fn ascii_comments_and_errors() {
        let cloud = parse_cloud(b"# comment\n\n1 2 3 4\n  # another\n5 6 7 8\n", "f").unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(parse_cloud(b"1 2 3\n", "f").is_err());
        assert!(parse_cloud(b"1 2 3 x\n", "f").is_err());
        assert!(parse_cloud(b"1 2 3 -4\n", "f").is_err());
    }

    #[test]
    fn binary_count_mismatch_is_rejected() {
        let mut bytes = write_cloud_binary(&sample_cloud());
        bytes.truncate(bytes.len() - 4);
        assert!(parse_cloud(&bytes, "f").is_err());
    }
}
