//! A stylization session: the immutable precomputation for one labeled
//! mesh and the optimize-then-transfer cycle run on every edit.

use std::collections::BTreeMap;

use crate::abstraction::{build_abstracted_mesh, AbstractedMesh};
use crate::diffusion::{BoundaryKey, ScaleDiffuser, ScaleField};
use crate::error::Result;
use crate::geometry::Vec3;
use crate::mesh::{Mesh, RegionLabeling};
use crate::metrics::{build_lanteri_constraints, LandmarkSet, LanteriConstraint};
use crate::skinning::{build_skinning_pyramid, SkinningPyramid, DEFAULT_LEVELS};
use crate::stylize::{
    optimize, region_transforms, EnergyTerms, LanteriTerm, OptimizationState, OptimizeOptions, StyleParams, StyleProblem,
};
use crate::transfer::apply_transfer;
use crate::transform::Affine;

/// Result of one optimize-and-transfer cycle.
#[derive(Debug, Clone)]
pub struct Stylized {
    pub state: OptimizationState,
    pub transforms: Vec<Affine>,
    pub positions: Vec<Vec3>,
    pub clamped: usize,
}

pub struct Engine {
    mesh: Mesh,
    labels: RegionLabeling,
    abstracted: AbstractedMesh,
    pyramid: SkinningPyramid,
    diffuser: ScaleDiffuser,
    landmarks: LandmarkSet,
    constraints: Vec<LanteriConstraint>,
    scale: Option<(BTreeMap<BoundaryKey, f64>, ScaleField)>,
}

impl Engine {
    pub fn new(mesh: Mesh, labels: RegionLabeling, landmarks: LandmarkSet) -> Result<Self> {
        let abstracted = build_abstracted_mesh(&mesh, &labels)?;
        Self::with_abstraction(mesh, labels, abstracted, landmarks, DEFAULT_LEVELS)
    }

    pub fn with_abstraction(
        mesh: Mesh,
        labels: RegionLabeling,
        abstracted: AbstractedMesh,
        landmarks: LandmarkSet,
        levels: usize,
    ) -> Result<Self> {
        labels.validate(&mesh)?;
        landmarks.validate(&mesh)?;
        let pyramid = build_skinning_pyramid(&mesh, &labels, levels)?;
        let diffuser = ScaleDiffuser::new(&mesh, &labels)?;
        let constraints = build_lanteri_constraints(&landmarks);
        Ok(Engine {
            mesh,
            labels,
            abstracted,
            pyramid,
            diffuser,
            landmarks,
            constraints,
            scale: None,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn labels(&self) -> &RegionLabeling {
        &self.labels
    }

    pub fn abstracted(&self) -> &AbstractedMesh {
        &self.abstracted
    }

    pub fn pyramid(&self) -> &SkinningPyramid {
        &self.pyramid
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    pub fn constraints(&self) -> &[LanteriConstraint] {
        &self.constraints
    }

    pub fn boundaries(&self) -> &[BoundaryKey] {
        self.diffuser.boundaries()
    }

    /// Per-vertex smoothing scale; recomputed only when a boundary value
    /// changed.
    pub fn scale_field(&mut self, params: &StyleParams) -> Result<&ScaleField> {
        let values = params.smoothing_values(self.diffuser.boundaries());
        if self.scale.as_ref().is_none_or(|(v, _)| *v != values) {
            let field = self.diffuser.diffuse(&values)?;
            if !field.flagged.is_empty() {
                log::warn!("{} vertices took the nearest boundary scale", field.flagged.len());
            }
            self.scale = Some((values, field));
        }
        Ok(&self.scale.as_ref().unwrap().1)
    }

    /// Lanteri terms with each landmark's weights taken at its current
    /// smoothing scale.
    pub fn lanteri_terms(&mut self, params: &StyleParams) -> Result<Vec<LanteriTerm>> {
        if !params.lanteri || self.constraints.is_empty() {
            return Ok(Vec::new());
        }
        let scale = self.scale_field(params)?.values.clone();
        let mut buf = Vec::new();
        self.constraints
            .iter()
            .map(|c| {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for name in &c.landmarks {
                    let v = self.landmarks.vertex(name)?;
                    let (s, _) = self.pyramid.clamp_scale(scale[v]);
                    self.pyramid.interpolated(v, s, &mut buf);
                    points.push(self.mesh.vertices()[v]);
                    weights.push(buf.clone());
                }
                LanteriTerm::new(c.kind, points, weights)
            })
            .collect()
    }

    pub fn optimize(&mut self, params: &StyleParams, opts: &OptimizeOptions) -> Result<OptimizationState> {
        let terms = self.lanteri_terms(params)?;
        optimize(&self.abstracted, params, &terms, opts)
    }

    /// Deforms the full mesh by the transforms of an optimized state.
    pub fn transfer(&mut self, params: &StyleParams, state: OptimizationState) -> Result<Stylized> {
        let transforms = region_transforms(&self.abstracted, &state.proxies, params);
        self.scale_field(params)?;
        let scale = &self.scale.as_ref().unwrap().1.values;
        let out = apply_transfer(self.mesh.vertices(), &transforms, &self.pyramid, scale)?;
        Ok(Stylized {
            state,
            transforms,
            positions: out.positions,
            clamped: out.clamped,
        })
    }

    /// Energy of anchor positions split by term.
    pub fn energy_terms(&mut self, params: &StyleParams, positions: &[Vec3]) -> Result<EnergyTerms> {
        let terms = self.lanteri_terms(params)?;
        Ok(StyleProblem::new(&self.abstracted, params, &terms)?.energy_terms(positions))
    }

    pub fn stylize(&mut self, params: &StyleParams, opts: &OptimizeOptions) -> Result<Stylized> {
        let state = self.optimize(params, opts)?;
        self.transfer(params, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn face_engine(n: usize) -> Engine {
        let f = fixtures::synthetic_face(n);
        Engine::new(f.mesh, f.labels, f.landmarks).unwrap()
    }

    #[test]
    fn zero_style_reproduces_the_input() {
        let mut e = face_engine(40);
        let p = StyleParams {
            lambda_f: 0.0,
            ..Default::default()
        };
        let out = e.stylize(&p, &OptimizeOptions::default()).unwrap();
        assert!(out.transforms.iter().all(Affine::is_identity));
        for (a, b) in out.positions.iter().zip(e.mesh().vertices()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn one_term_per_present_constraint() {
        let mut e = face_engine(40);
        let terms = e.lanteri_terms(&StyleParams::default()).unwrap();
        assert_eq!(terms.len(), 9);
        for t in &terms {
            for w in &t.weights {
                assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let off = StyleParams {
            lanteri: false,
            ..Default::default()
        };
        assert!(e.lanteri_terms(&off).unwrap().is_empty());
    }

    #[test]
    fn scale_field_is_cached_until_values_change() {
        let mut e = face_engine(30);
        let mut p = StyleParams::default();
        let first = e.scale_field(&p).unwrap().clone();
        assert!(first.values.iter().all(|&s| s == p.smoothing));
        let (i, j) = e.boundaries()[0];
        p.set_edge_smoothing(i, j, 5.0);
        let second = e.scale_field(&p).unwrap().clone();
        assert_ne!(first, second);
        assert!(second.values.iter().all(|&s| (p.smoothing..=5.0).contains(&s)));
    }

    #[test]
    fn exaggeration_moves_the_mesh() {
        let mut e = face_engine(40);
        let p = StyleParams {
            lambda_d: 1.6,
            ..Default::default()
        };
        let out = e.stylize(&p, &OptimizeOptions::default()).unwrap();
        let moved = out
            .positions
            .iter()
            .zip(e.mesh().vertices())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(moved > 1e-4);
        assert!(out.positions.iter().all(|v| v.iter().all(|x| x.is_finite())));
        let terms = e.energy_terms(&p, &out.state.positions).unwrap();
        assert!((terms.total() - out.state.energy()).abs() <= 1e-9 * out.state.energy());
    }
}
