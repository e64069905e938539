//! A stylized synthetic head: a heightfield face on a square grid, split
//! into 32 planes by a symmetric Voronoi layout, with named landmarks.

use crate::geometry::Vec3;
use crate::mesh::{Mesh, RegionLabeling};
use crate::metrics::LandmarkSet;
use crate::segment::clean_labeling;

use super::heightfield;

pub struct FaceFixture {
    pub mesh: Mesh,
    pub labels: RegionLabeling,
    pub landmarks: LandmarkSet,
}

const HALF_WIDTH: f64 = 1.3;

/// Center-line seeds, then one half of each mirrored pair (`x > 0`).
const CENTER_SEEDS: [(f64, f64); 8] = [
    (0.0, 0.9),
    (0.0, 0.55),
    (0.0, 0.25),
    (0.0, -0.05),
    (0.0, -0.3),
    (0.0, -0.5),
    (0.0, -0.68),
    (0.0, -0.92),
];
const SIDE_SEEDS: [(f64, f64); 12] = [
    (0.5, 0.8),
    (0.75, 0.45),
    (0.33, 0.47),
    (0.3, 0.22),
    (0.34, 0.04),
    (0.17, -0.05),
    (0.52, -0.12),
    (0.72, 0.12),
    (0.3, -0.35),
    (0.65, -0.5),
    (0.3, -0.62),
    (0.35, -0.88),
];

const LANDMARKS: [(&str, f64, f64); 18] = [
    ("inner_eye_L", 0.17, 0.2),
    ("inner_eye_R", -0.17, 0.2),
    ("outer_eye_L", 0.5, 0.22),
    ("outer_eye_R", -0.5, 0.22),
    ("brow_mid_L", 0.33, 0.42),
    ("brow_mid_R", -0.33, 0.42),
    ("mouth_corner_L", 0.25, -0.58),
    ("mouth_corner_R", -0.25, -0.58),
    ("nose_tip", 0.0, -0.2),
    ("nose_bridge", 0.0, 0.22),
    ("chin_tip", 0.0, -0.95),
    ("ear_base_L", 1.05, -0.1),
    ("ear_base_R", -1.05, -0.1),
    ("ear_notch_L", 1.05, 0.05),
    ("ear_notch_R", -1.05, 0.05),
    ("nostril_L", 0.12, -0.28),
    ("nostril_R", -0.12, -0.28),
    ("sternum_notch", 0.0, -1.25),
];

fn gauss(x: f64, y: f64, cx: f64, cy: f64, sx: f64, sy: f64) -> f64 {
    let dx = (x - cx) / sx;
    let dy = (y - cy) / sy;
    (-0.5 * (dx * dx + dy * dy)).exp()
}

/// Face surface height over the `(x, y)` plane.
pub fn face_height(x: f64, y: f64) -> f64 {
    let r2 = (x / 1.25).powi(2) + (y / 1.5).powi(2);
    let mut z = 0.9 * (1.0 - r2).max(0.0).powf(1.5);
    // Nose: a ridge that grows toward the tip.
    let along = ((0.3 - y) / 0.55).clamp(0.0, 1.0);
    z += 0.26 * along * gauss(x, y, 0.0, -0.1, 0.07 + 0.05 * along, 0.25);
    z += 0.05 * gauss(x, y, 0.0, -0.22, 0.1, 0.06);
    for side in [-1.0, 1.0] {
        z -= 0.13 * gauss(x, y, side * 0.33, 0.2, 0.13, 0.09);
        z += 0.06 * gauss(x, y, side * 0.5, -0.1, 0.15, 0.12);
    }
    z += 0.07 * gauss(x, y, 0.0, 0.43, 0.45, 0.06);
    z += 0.05 * gauss(x, y, 0.0, -0.58, 0.2, 0.05);
    z += 0.08 * gauss(x, y, 0.0, -0.93, 0.13, 0.09);
    z
}

fn inside_face(x: f64, y: f64) -> bool {
    (x / 0.9).powi(2) + (y / 1.15).powi(2) < 1.0
}

/// Builds the face on an `n × n` cell grid spanning `[-1.3, 1.3]²`;
/// an even `n` keeps a vertex column on the symmetry plane, and
/// `n = 174` gives just over 30k vertices.
pub fn synthetic_face(n: usize) -> FaceFixture {
    let cell = 2.0 * HALF_WIDTH / n as f64;
    let raw = heightfield(n, n, cell, |x, y| face_height(x - HALF_WIDTH, y - HALF_WIDTH));
    let shifted = raw
        .vertices()
        .iter()
        .map(|v| Vec3::new(v.x - HALF_WIDTH, v.y - HALF_WIDTH, v.z))
        .collect();
    let mesh = raw.with_positions(shifted).expect("same connectivity");

    let mut seeds: Vec<(f64, f64)> = CENTER_SEEDS.to_vec();
    for &(x, y) in &SIDE_SEEDS {
        seeds.push((x, y));
        seeds.push((-x, y));
    }
    let face_labels = (0..mesh.face_count())
        .map(|f| {
            let c = mesh.face_centroid(f);
            if !inside_face(c.x, c.y) {
                return 0;
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &(sx, sy)) in seeds.iter().enumerate() {
                let d = (c.x - sx).powi(2) + (c.y - sy).powi(2);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best as u32 + 1
        })
        .collect();
    let labels = clean_labeling(&mesh, RegionLabeling::new(seeds.len(), face_labels))
        .expect("fixture labeling");

    let mut landmarks = LandmarkSet::default();
    for &(name, x, y) in LANDMARKS.iter() {
        let i = ((x + HALF_WIDTH) / cell).round() as usize;
        let j = ((y + HALF_WIDTH) / cell).round() as usize;
        landmarks.insert(name, i + j * (n + 1));
    }
    FaceFixture {
        mesh,
        labels,
        landmarks,
    }
}
