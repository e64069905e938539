//! Per-vertex region weights at increasing levels of smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, RegionLabeling};

pub const DEFAULT_LEVELS: usize = 8;
pub const MAX_LEVELS: usize = 12;
pub const PRUNE_BELOW: f64 = 1e-6;

/// Sparse weights of one level, stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelWeights {
    offsets: Vec<usize>,
    entries: Vec<(u32, f64)>,
}

impl LevelWeights {
    fn from_dense(dense: &[f64], stride: usize) -> Self {
        let mut offsets = Vec::with_capacity(dense.len() / stride + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for row in dense.chunks(stride) {
            let start = entries.len();
            entries.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, &w)| w >= PRUNE_BELOW)
                    .map(|(r, &w)| (r as u32, w)),
            );
            let sum: f64 = entries[start..].iter().map(|e| e.1).sum();
            for e in &mut entries[start..] {
                e.1 /= sum;
            }
            offsets.push(entries.len());
        }
        LevelWeights { offsets, entries }
    }

    pub fn vertex(&self, v: usize) -> &[(u32, f64)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn scatter(&self, dense: &mut [f64], stride: usize) {
        dense.fill(0.0);
        for v in 0..self.vertex_count() {
            for &(r, w) in self.vertex(v) {
                dense[v * stride + r as usize] = w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinningPyramid {
    pub k: usize,
    pub levels: Vec<LevelWeights>,
    /// Smoothing passes applied on top of the previous level.
    pub passes: Vec<usize>,
}

impl SkinningPyramid {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.levels[0].vertex_count()
    }

    pub fn weights(&self, level: usize, v: usize) -> &[(u32, f64)] {
        self.levels[level].vertex(v)
    }

    /// Clamps a smoothing scale to the level range; the flag reports
    /// whether clamping happened.
    pub fn clamp_scale(&self, s: f64) -> (f64, bool) {
        let top = (self.level_count() - 1) as f64;
        if s.is_nan() {
            return (0.0, true);
        }
        let c = s.clamp(0.0, top);
        (c, c != s)
    }

    /// Weights of vertex `v` at fractional level `s`, interpolated between
    /// the two bracketing levels. `s` must already be clamped.
    pub fn interpolated(&self, v: usize, s: f64, out: &mut Vec<(u32, f64)>) {
        out.clear();
        let lo = (s.floor() as usize).min(self.level_count() - 1);
        let t = s - lo as f64;
        if t == 0.0 || lo + 1 >= self.level_count() {
            out.extend_from_slice(self.weights(lo, v));
            return;
        }
        let (a, b) = (self.weights(lo, v), self.weights(lo + 1, v));
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let ra = a.get(i).map_or(u32::MAX, |e| e.0);
            let rb = b.get(j).map_or(u32::MAX, |e| e.0);
            if ra == rb {
                out.push((ra, (1.0 - t) * a[i].1 + t * b[j].1));
                i += 1;
                j += 1;
            } else if ra < rb {
                out.push((ra, (1.0 - t) * a[i].1));
                i += 1;
            } else {
                out.push((rb, t * b[j].1));
                j += 1;
            }
        }
    }
}

/// Level 0 holds normalized incident-face counts per region; level `l`
/// applies `2^(l-1)` passes of uniform neighbor averaging to level `l-1`.
pub fn build_skinning_pyramid(m: &Mesh, labels: &RegionLabeling, levels: usize) -> Result<SkinningPyramid> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "pyramid level count must be in 1..={MAX_LEVELS}, got {levels}"
        )));
    }
    labels.validate(m)?;
    let stride = labels.k + 1;
    let n = m.vertex_count();
    let topo = m.topology();
    let mut dense = vec![0.0; n * stride];
    for v in 0..n {
        let faces = topo.vertex_faces(v);
        if faces.is_empty() {
            dense[v * stride] = 1.0;
            continue;
        }
        for &f in faces {
            dense[v * stride + labels.label(f) as usize] += 1.0;
        }
        let count = faces.len() as f64;
        for w in &mut dense[v * stride..(v + 1) * stride] {
            *w /= count;
        }
    }
    let mut pyramid = SkinningPyramid {
        k: labels.k,
        levels: vec![LevelWeights::from_dense(&dense, stride)],
        passes: vec![0],
    };
    let mut next = vec![0.0; n * stride];
    for l in 1..levels {
        pyramid.levels[l - 1].scatter(&mut dense, stride);
        let passes = 1usize << (l - 1);
        for _ in 0..passes {
            for v in 0..n {
                let nb = topo.vertex_neighbors(v);
                let row = &mut next[v * stride..(v + 1) * stride];
                if nb.is_empty() {
                    row.copy_from_slice(&dense[v * stride..(v + 1) * stride]);
                    continue;
                }
                row.fill(0.0);
                for &u in nb {
                    for (acc, w) in row.iter_mut().zip(&dense[u * stride..(u + 1) * stride]) {
                        *acc += w;
                    }
                }
                let inv = 1.0 / nb.len() as f64;
                for acc in row.iter_mut() {
                    *acc *= inv;
                }
            }
            std::mem::swap(&mut dense, &mut next);
        }
        pyramid.levels.push(LevelWeights::from_dense(&dense, stride));
        pyramid.passes.push(passes);
    }
    Ok(pyramid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::Vec3;

    /// Four triangles fanned around vertex 0.
    fn fan() -> Mesh {
        let v = vec![
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ];
        Mesh::new(v, vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]]).unwrap()
    }

    #[test]
    fn interior_vertex_has_a_single_weight() {
        let m = fixtures::grid(4, 4, 1.0);
        let mut labels = vec![1; m.face_count()];
        labels[0] = 2;
        let p = build_skinning_pyramid(&m, &RegionLabeling::new(2, labels), 2).unwrap();
        assert_eq!(p.weights(0, 12), &[(1, 1.0)]);
    }

    #[test]
    fn border_vertex_uses_face_counts() {
        let p = build_skinning_pyramid(&fan(), &RegionLabeling::new(2, vec![1, 1, 1, 2]), 1).unwrap();
        assert_eq!(p.weights(0, 0), &[(1, 0.75), (2, 0.25)]);
        assert_eq!(p.weights(0, 2), &[(1, 1.0)]);
        assert_eq!(p.weights(0, 4), &[(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn partition_of_unity_on_every_level() {
        let face = fixtures::synthetic_face(60);
        let p = build_skinning_pyramid(&face.mesh, &face.labels, DEFAULT_LEVELS).unwrap();
        assert_eq!(p.passes, vec![0, 1, 2, 4, 8, 16, 32, 64]);
        for l in 0..p.level_count() {
            for v in 0..p.vertex_count() {
                let w = p.weights(l, v);
                let sum: f64 = w.iter().map(|e| e.1).sum();
                assert!((sum - 1.0).abs() <= 1e-12);
                assert!(w.iter().all(|e| e.1 >= PRUNE_BELOW));
                assert!(w.windows(2).all(|x| x[0].0 < x[1].0));
            }
        }
    }

    #[test]
    fn smoothing_spreads_weights() {
        let face = fixtures::synthetic_face(60);
        let p = build_skinning_pyramid(&face.mesh, &face.labels, 6).unwrap();
        let spread = |l: usize| (0..p.vertex_count()).filter(|&v| p.weights(l, v).len() > 1).count();
        for l in 1..p.level_count() {
            assert!(spread(l) >= spread(l - 1));
        }
    }

    #[test]
    fn interpolation_blends_bracketing_levels() {
        let face = fixtures::synthetic_face(40);
        let p = build_skinning_pyramid(&face.mesh, &face.labels, 4).unwrap();
        let mut out = Vec::new();
        for v in (0..p.vertex_count()).step_by(7) {
            p.interpolated(v, 1.25, &mut out);
            for &(r, w) in &out {
                let get = |l: usize| p.weights(l, v).iter().find(|e| e.0 == r).map_or(0.0, |e| e.1);
                assert!((w - (0.75 * get(1) + 0.25 * get(2))).abs() < 1e-15);
            }
            let sum: f64 = out.iter().map(|e| e.1).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            p.interpolated(v, 3.0, &mut out);
            assert_eq!(out.as_slice(), p.weights(3, v));
        }
    }

    #[test]
    fn scale_is_clamped_to_the_level_range() {
        let m = fixtures::grid(2, 2, 1.0);
        let p = build_skinning_pyramid(&m, &RegionLabeling::new(1, vec![1; 8]), 4).unwrap();
        assert_eq!(p.clamp_scale(-1.0), (0.0, true));
        assert_eq!(p.clamp_scale(9.0), (3.0, true));
        assert_eq!(p.clamp_scale(2.5), (2.5, false));
    }

    #[test]
    fn level_count_is_guarded() {
        let m = fixtures::grid(2, 2, 1.0);
        let labels = RegionLabeling::new(1, vec![1; 8]);
        assert!(build_skinning_pyramid(&m, &labels, 0).is_err());
        assert!(build_skinning_pyramid(&m, &labels, MAX_LEVELS + 1).is_err());
        assert!(build_skinning_pyramid(&m, &labels, MAX_LEVELS).is_ok());
    }
}
