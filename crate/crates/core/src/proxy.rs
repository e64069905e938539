//! Plane proxies of regions bounded by anchor loops.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// The plane of a region: unit normal and centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneProxy {
    pub region: u32,
    pub normal: Vec3,
    pub centroid: Vec3,
}

impl PlaneProxy {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.centroid))
    }
}

/// `Σ v_k × v_{k+1}` over a closed loop, i.e. twice its vector area.
pub fn loop_cross_sum<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Vec3 {
    let mut it = points.into_iter();
    let Some(first) = it.next() else {
        return Vec3::zeros();
    };
    let mut sum = Vec3::zeros();
    let mut prev = first;
    for p in it {
        sum += prev.cross(p);
        prev = p;
    }
    sum + prev.cross(first)
}

/// Normal of the surface bounded by the oriented loop, from the loop edges
/// alone. `None` when the loop encloses no vector area.
pub fn proxy_normal(points: &[Vec3]) -> Option<Vec3> {
    normalize(loop_cross_sum(points))
}

/// Same as [`proxy_normal`] for a region bounded by several loops.
pub fn proxy_normal_loops(loops: &[Vec<Vec3>]) -> Option<Vec3> {
    normalize(loops.iter().map(loop_cross_sum).sum())
}

fn normalize(v: Vec3) -> Option<Vec3> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

/// Area and centroid of a region from fan triangulations of its loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanMeasure {
    pub area: f64,
    pub centroid: Vec3,
    /// Set when the total fan area vanished and the centroid fell back to
    /// the plain anchor mean.
    pub degenerate: bool,
}

/// Fans each loop about its anchor mean and measures the fan triangles
/// along `normal`, so that loops running against the normal (holes)
/// subtract. For a planar simple loop this is the polygon area and
/// centroid.
pub fn fan_measure(loops: &[Vec<Vec3>], normal: &Vec3) -> FanMeasure {
    let mut area = 0.0;
    let mut moment = Vec3::zeros();
    let mut count = 0usize;
    let mut plain = Vec3::zeros();
    for l in loops {
        if l.is_empty() {
            continue;
        }
        let mean = l.iter().sum::<Vec3>() / l.len() as f64;
        for k in 0..l.len() {
            let (a, b) = (&l[k], &l[(k + 1) % l.len()]);
            let t = 0.5 * (a - mean).cross(&(b - mean)).dot(normal);
            area += t;
            moment += (mean + a + b) * (t / 3.0);
        }
        plain += l.iter().sum::<Vec3>();
        count += l.len();
    }
    if area.abs() > 0.0 && area.is_finite() {
        FanMeasure {
            area,
            centroid: moment / area,
            degenerate: false,
        }
    } else {
        FanMeasure {
            area: 0.0,
            centroid: if count > 0 { plain / count as f64 } else { plain },
            degenerate: true,
        }
    }
}

/// Area-weighted centroid of a single loop's fan.
pub fn proxy_centroid(points: &[Vec3]) -> Vec3 {
    let loops = [points.to_vec()];
    let n = proxy_normal(points).unwrap_or_else(Vec3::z);
    fan_measure(&loops, &n).centroid
}
