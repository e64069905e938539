//! Deforming the full-resolution mesh by blended region transforms.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::skinning::SkinningPyramid;
use crate::transform::Affine;

#[derive(Debug, Clone, PartialEq)]
pub struct Transferred {
    pub positions: Vec<Vec3>,
    /// Vertices whose smoothing scale fell outside the pyramid and was
    /// clamped.
    pub clamped: usize,
}

/// Moves each vertex by `Σ_r w_r T_r`, with weights interpolated from the
/// pyramid at the vertex's smoothing scale. `transforms[0]` belongs to the
/// undeformed region and must be the identity.
pub fn apply_transfer(
    positions: &[Vec3],
    transforms: &[Affine],
    pyramid: &SkinningPyramid,
    scale: &[f64],
) -> Result<Transferred> {
    let n = positions.len();
    if pyramid.vertex_count() != n || scale.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} vertices but {} pyramid rows and {} scale values",
            pyramid.vertex_count(),
            scale.len()
        )));
    }
    if transforms.len() != pyramid.k + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} transforms, got {}",
            pyramid.k + 1,
            transforms.len()
        )));
    }
    if !transforms[0].is_identity() {
        return Err(Error::InvalidArgument("transform of region 0 must be the identity".into()));
    }
    if let Some(r) = transforms.iter().position(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("transform of region {r} is not finite")));
    }
    let mut clamped = 0;
    let mut weights = Vec::new();
    let out = positions
        .iter()
        .zip(scale)
        .enumerate()
        .map(|(v, (p, &s))| {
            let (s, was_clamped) = pyramid.clamp_scale(s);
            clamped += was_clamped as usize;
            pyramid.interpolated(v, s, &mut weights);
            Affine::blend(weights.iter().map(|&(r, w)| (w, &transforms[r as usize]))).apply(p)
        })
        .collect();
    if clamped > 0 {
        log::warn!(
            "apply_transfer: {clamped} smoothing scales clamped to [0, {}]",
            pyramid.level_count() - 1
        );
    }
    Ok(Transferred {
        positions: out,
        clamped,
    })
}
