//! Affine region transforms: rotation between normals, the rigid and
//! planarizing factors and their composition.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{least_aligned_axis, Vec3};
use crate::proxy::PlaneProxy;

pub type Mat3 = Matrix3<f64>;

/// Angles at or below this are treated as no rotation at all.
pub const IDENTITY_ANGLE: f64 = 1e-13;

/// `p ↦ linear·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub linear: Mat3,
    pub translation: Vec3,
}

impl Default for Affine {
    fn default() -> Self {
        Self::identity()
    }
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            linear: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Affine {
            linear: Mat3::identity(),
            translation: t,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.linear * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine {
            linear: self.linear * other.linear,
            translation: self.linear * other.translation + self.translation,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.linear == Mat3::identity() && self.translation == Vec3::zeros()
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.translation.iter()).all(|x| x.is_finite())
    }

    /// Weighted sum of transforms as 3×4 matrices.
    pub fn blend<'a>(terms: impl IntoIterator<Item = (f64, &'a Affine)>) -> Affine {
        let mut out = Affine {
            linear: Mat3::zeros(),
            translation: Vec3::zeros(),
        };
        for (w, t) in terms {
            out.linear += t.linear * w;
            out.translation += t.translation * w;
        }
        out
    }
}

fn unit(v: &Vec3) -> Vec3 {
    let len = v.norm();
    if (len - 1.0).abs() > 1e-6 {
        log::warn!("rotation_between: non-unit input of length {len}, normalized");
    }
    v / len
}

/// The minimal rotation taking unit `n` to unit `n2`. Antiparallel inputs
/// rotate by π about `n × least_aligned_axis(n)`.
pub fn rotation_between(n: &Vec3, n2: &Vec3) -> Mat3 {
    let (n, n2) = (unit(n), unit(n2));
    let c = n.dot(&n2);
    let ortho = n2 - n * c;
    let s = ortho.norm();
    let angle = s.atan2(c);
    if angle <= IDENTITY_ANGLE {
        return Mat3::identity();
    }
    if std::f64::consts::PI - angle <= IDENTITY_ANGLE {
        let axis = n.cross(&least_aligned_axis(&n)).normalize();
        return axis * axis.transpose() * 2.0 - Mat3::identity();
    }
    let h = c.hypot(s);
    let (c, s) = (c / h, s / h);
    let e1 = n;
    let e2 = ortho / s;
    let e2 = (e2 - e1 * e1.dot(&e2)).normalize();
    Mat3::identity() + (e1 * e1.transpose() + e2 * e2.transpose()) * (c - 1.0)
        + (e2 * e1.transpose() - e1 * e2.transpose()) * s
}

/// `[R | c' − R c]` with `R` rotating the before normal onto the after one.
pub fn rigid_part(before: &PlaneProxy, after: &PlaneProxy) -> Affine {
    let r = rotation_between(&before.normal, &after.normal);
    Affine {
        linear: r,
        translation: after.centroid - r * before.centroid,
    }
}

/// Moves every point a fraction `mu` of its way onto the plane.
pub fn planarize_part(plane: &PlaneProxy, mu: f64) -> Affine {
    if mu == 0.0 {
        return Affine::identity();
    }
    let n = plane.normal;
    Affine {
        linear: Mat3::identity() - n * n.transpose() * mu,
        translation: n * (mu * n.dot(&plane.centroid)),
    }
}

/// Planarize toward the before plane, then move rigidly onto the after
/// plane.
pub fn region_transform(before: &PlaneProxy, after: &PlaneProxy, mu: f64) -> Affine {
    region_transform_onto(before, before, after, mu)
}

/// As [`region_transform`], flattening toward `plane` instead of the
/// before proxy.
pub fn region_transform_onto(plane: &PlaneProxy, before: &PlaneProxy, after: &PlaneProxy, mu: f64) -> Affine {
    rigid_part(before, after).compose(&planarize_part(plane, mu))
}
