//! Small vector helpers shared by the mesh, proxy and transform code.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Twice the vector area of triangle `(a, b, c)`; its direction is the
/// counter-clockwise normal.
#[inline]
pub fn triangle_cross(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

#[inline]
pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * triangle_cross(a, b, c).norm()
}

/// Cotangent of the angle at `apex` in the triangle `(apex, p, q)`.
#[inline]
pub fn cotangent(apex: &Vec3, p: &Vec3, q: &Vec3) -> f64 {
    let u = p - apex;
    let v = q - apex;
    let cross = u.cross(&v).norm();
    if cross == 0.0 {
        return 0.0;
    }
    u.dot(&v) / cross
}

/// Axis-aligned bounding box diagonal length of a point set.
pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Unit basis vector along the coordinate axis where `n` has its smallest
/// absolute component (lowest axis wins ties).
pub fn least_aligned_axis(n: &Vec3) -> Vec3 {
    let a = n.abs();
    if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    }
}
