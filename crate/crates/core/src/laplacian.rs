//! Cotangent Laplacian restricted to a patch of the mesh.

use std::collections::HashMap;

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::geometry::cotangent;
use crate::mesh::Mesh;

/// Symmetric positive semidefinite operator `L = D - W` over a patch.
///
/// Row/column `k` corresponds to mesh vertex `vertices[k]`. Off-diagonal
/// entries are `-w_ij` with `w_ij = ½(cot α_ij + cot β_ij)` clamped to be
/// nonnegative; the diagonal holds the row sums of `W`.
#[derive(Debug, Clone)]
pub struct PatchLaplacian {
    pub vertices: Vec<usize>,
    pub matrix: CsMat<f64>,
}

impl PatchLaplacian {
    /// Local index of a mesh vertex, if it belongs to the patch.
    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }
}

/// Builds the clamped cotangent Laplacian over every triangle whose three
/// corners lie in `subset`.
pub fn cotangent_laplacian(m: &Mesh, subset: &[usize]) -> Result<PatchLaplacian> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty vertex subset".into()));
    }
    let mut inside = vec![false; m.vertex_count()];
    for &v in subset {
        if v >= m.vertex_count() {
            return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
        }
        inside[v] = true;
    }
    let faces: Vec<usize> = (0..m.face_count())
        .filter(|&f| m.triangles()[f].iter().all(|&v| inside[v]))
        .collect();
    let mut vertices = subset.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(assemble(m, vertices, &faces))
}

/// Builds the clamped cotangent Laplacian over a set of faces; the patch
/// vertices are the corners of those faces.
pub fn cotangent_laplacian_faces(m: &Mesh, faces: &[usize]) -> Result<PatchLaplacian> {
    if faces.is_empty() {
        return Err(Error::InvalidArgument("empty face subset".into()));
    }
    let mut vertices: Vec<usize> = faces
        .iter()
        .flat_map(|&f| m.triangles()[f])
        .collect();
    vertices.sort_unstable();
    vertices.dedup();
    Ok(assemble(m, vertices, faces))
}

fn assemble(m: &Mesh, vertices: Vec<usize>, faces: &[usize]) -> PatchLaplacian {
    let local: HashMap<usize, usize> = vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut weights: HashMap<(usize, usize), f64> = HashMap::with_capacity(faces.len() * 2);
    let pos = m.vertices();
    for &f in faces {
        let t = m.triangles()[f];
        for k in 0..3 {
            let (a, i, j) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let cot = cotangent(&pos[a], &pos[i], &pos[j]);
            let (li, lj) = (local[&i], local[&j]);
            *weights.entry((li.min(lj), li.max(lj))).or_insert(0.0) += 0.5 * cot;
        }
    }
    let n = vertices.len();
    let mut entries: Vec<((usize, usize), f64)> = weights
        .into_iter()
        .filter(|&(_, w)| w > 0.0)
        .collect();
    entries.sort_unstable_by_key(|e| e.0);
    let mut diag = vec![0.0; n];
    let mut tri = TriMat::with_capacity((n, n), n + 2 * entries.len());
    for &((i, j), w) in &entries {
        tri.add_triplet(i, j, -w);
        tri.add_triplet(j, i, -w);
        diag[i] += w;
        diag[j] += w;
    }
    for (i, &d) in diag.iter().enumerate() {
        tri.add_triplet(i, i, d);
    }
    PatchLaplacian {
        vertices,
        matrix: tri.to_csr(),
    }
}
