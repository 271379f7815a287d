//! Rotated 3D box overlap and the greedy matching used for detection metrics.

use riskcot::detector::{greedy_match, MATCH_IOU_THRESHOLD};
use riskcot::scene::{box_iou, OrientedBox, Vec3};

fn main() -> riskcot::Result<()> {
    let car = OrientedBox::new(Vec3::new(10.0, 0.0, 0.75), 4.5, 1.8, 1.5, 0.0)?;
    for yaw_deg in [0.0f64, 15.0, 45.0, 90.0] {
        let other = OrientedBox::new(Vec3::new(10.5, 0.2, 0.75), 4.5, 1.8, 1.5, yaw_deg.to_radians())?;
        println!("yaw {yaw_deg:>4.0} deg  IoU {:.4}", box_iou(&car, &other));
    }

    let gt = [car, OrientedBox::new(Vec3::new(20.0, 3.5, 0.75), 4.5, 1.8, 1.5, 0.1)?];
    let pred = [
        OrientedBox::new(Vec3::new(20.3, 3.4, 0.8), 4.4, 1.9, 1.5, 0.05)?,
        OrientedBox::new(Vec3::new(10.2, 0.1, 0.7), 4.6, 1.8, 1.4, 0.02)?,
        OrientedBox::new(Vec3::new(40.0, -3.0, 0.5), 1.0, 1.0, 1.0, 0.0)?,
    ];
    for (p, g) in greedy_match(&pred, &gt, MATCH_IOU_THRESHOLD) {
        println!("prediction {p} -> ground truth {g}  IoU {:.3}", box_iou(&pred[p], &gt[g]));
    }
    Ok(())
}
