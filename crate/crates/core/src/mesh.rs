//! Indexed triangle meshes, region labelings and the queries built on them.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, triangle_cross, Vec3};

/// Sentinel for "no face" in edge incidence tables.
const NONE: usize = usize::MAX;

/// An indexed triangle mesh.
///
/// The mesh is immutable once built. Deformations produce new position
/// arrays that share the same connectivity.
#[derive(Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    topology: Topology,
    mean_edge_length: f64,
}

impl std::fmt::Debug for Mesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mesh")
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.triangles.len())
            .field("mean_edge_length", &self.mean_edge_length)
            .finish()
    }
}

/// Edge and neighborhood tables derived from the triangle list.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Unique undirected edges, stored with the smaller vertex index first.
    pub edges: Vec<[usize; 2]>,
    /// Up to two incident faces per edge (`usize::MAX` when absent).
    edge_faces: Vec<[usize; 2]>,
    /// Number of faces incident to each edge (may exceed 2 on bad input).
    pub edge_face_count: Vec<u32>,
    /// Edge id of the directed side `t[k] -> t[(k + 1) % 3]` of each face.
    pub face_edges: Vec<[usize; 3]>,
    vertex_neighbor_offsets: Vec<usize>,
    vertex_neighbor_indices: Vec<usize>,
    vertex_face_offsets: Vec<usize>,
    vertex_face_indices: Vec<usize>,
    pub boundary_vertex: Vec<bool>,
}

impl Topology {
    fn build(vertex_count: usize, triangles: &[[usize; 3]]) -> Self {
        let mut edge_ids: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut edges = Vec::with_capacity(triangles.len() * 3 / 2 + 8);
        let mut edge_faces: Vec<[usize; 2]> = Vec::with_capacity(edges.capacity());
        let mut edge_face_count = Vec::with_capacity(edges.capacity());
        let mut face_edges = Vec::with_capacity(triangles.len());

        for (f, t) in triangles.iter().enumerate() {
            let mut fe = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_faces.push([NONE, NONE]);
                    edge_face_count.push(0u32);
                    edges.len() - 1
                });
                let slot = &mut edge_faces[id];
                if slot[0] == NONE {
                    slot[0] = f;
                } else if slot[1] == NONE {
                    slot[1] = f;
                }
                edge_face_count[id] += 1;
                fe[k] = id;
            }
            face_edges.push(fe);
        }

        let mut degree = vec![0usize; vertex_count];
        for e in &edges {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let vertex_neighbor_offsets = prefix_sum(&degree);
        let mut fill = vertex_neighbor_offsets.clone();
        let mut vertex_neighbor_indices = vec![0usize; edges.len() * 2];
        for e in &edges {
            vertex_neighbor_indices[fill[e[0]]] = e[1];
            fill[e[0]] += 1;
            vertex_neighbor_indices[fill[e[1]]] = e[0];
            fill[e[1]] += 1;
        }
        for v in 0..vertex_count {
            vertex_neighbor_indices[vertex_neighbor_offsets[v]..vertex_neighbor_offsets[v + 1]]
                .sort_unstable();
        }

        let mut face_degree = vec![0usize; vertex_count];
        for t in triangles {
            for &v in t {
                face_degree[v] += 1;
            }
        }
        let vertex_face_offsets = prefix_sum(&face_degree);
        let mut fill = vertex_face_offsets.clone();
        let mut vertex_face_indices = vec![0usize; triangles.len() * 3];
        for (f, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_face_indices[fill[v]] = f;
                fill[v] += 1;
            }
        }

        let mut boundary_vertex = vec![false; vertex_count];
        for (e, count) in edges.iter().zip(&edge_face_count) {
            if *count == 1 {
                boundary_vertex[e[0]] = true;
                boundary_vertex[e[1]] = true;
            }
        }

        Topology {
            edges,
            edge_faces,
            edge_face_count,
            face_edges,
            vertex_neighbor_offsets,
            vertex_neighbor_indices,
            vertex_face_offsets,
            vertex_face_indices,
            boundary_vertex,
        }
    }

    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbor_indices
            [self.vertex_neighbor_offsets[v]..self.vertex_neighbor_offsets[v + 1]]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_face_indices[self.vertex_face_offsets[v]..self.vertex_face_offsets[v + 1]]
    }

    /// Faces incident to edge `e` (one or two entries on a manifold mesh).
    pub fn edge_faces(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_faces[e].iter().copied().filter(|&f| f != NONE)
    }

    /// The face across side `k` of face `f`, if the edge is shared by exactly
    /// two faces.
    pub fn face_neighbor(&self, f: usize, k: usize) -> Option<usize> {
        let e = self.face_edges[f][k];
        if self.edge_face_count[e] != 2 {
            return None;
        }
        let [a, b] = self.edge_faces[e];
        Some(if a == f { b } else { a })
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_face_count[e] == 1
    }
}

fn prefix_sum(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for c in counts {
        acc += c;
        offsets.push(acc);
    }
    offsets
}

impl Mesh {
    /// Builds a mesh, checking only that every index is in range.
    ///
    /// Use [`Mesh::validate`] for the manifold and degeneracy checks.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        vertex_count: vertices.len(),
                    });
                }
            }
        }
        let topology = Topology::build(vertices.len(), &triangles);
        let mean_edge_length = if topology.edges.is_empty() {
            0.0
        } else {
            topology
                .edges
                .iter()
                .map(|e| (vertices[e[0]] - vertices[e[1]]).norm())
                .sum::<f64>()
                / topology.edges.len() as f64
        };
        Ok(Mesh {
            vertices,
            triangles,
            topology,
            mean_edge_length,
        })
    }

    /// Same connectivity, new positions.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} positions, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Mesh::new(vertices, self.triangles.clone())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    /// Mean length over unique edges.
    pub fn mean_edge_length(&self) -> f64 {
        self.mean_edge_length
    }

    pub fn face_positions(&self, f: usize) -> [&Vec3; 3] {
        let t = self.triangles[f];
        [&self.vertices[t[0]], &self.vertices[t[1]], &self.vertices[t[2]]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.face_positions(f);
        triangle_area(a, b, c)
    }

    /// Unit normal, or zero for a degenerate face.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(f);
        let n = triangle_cross(a, b, c);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(f);
        (a + b + c) / 3.0
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.topology.edges[e];
        (self.vertices[a] - self.vertices[b]).norm()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_mesh(self)
    }
}

/// One problem found by [`validate_mesh`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defect {
    /// A triangle repeats a vertex index.
    DegenerateTriangle { triangle: usize },
    /// A triangle with distinct indices but (numerically) zero area.
    ZeroAreaTriangle { triangle: usize },
    /// An edge shared by more than two triangles.
    NonManifoldEdge { edge: [usize; 2], face_count: usize },
    /// Two triangles traverse their shared edge in the same direction.
    OrientationConflict { edge: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub is_manifold: bool,
    pub is_connected: bool,
    pub component_count: usize,
    pub boundary_loop_count: usize,
    pub defects: Vec<Defect>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.defects.is_empty()
    }
}

/// Reports non-manifold edges, orientation conflicts, degenerate faces,
/// connected components and open boundary loops.
pub fn validate_mesh(m: &Mesh) -> ValidationReport {
    let topo = m.topology();
    let mut defects = Vec::new();

    for (f, t) in m.triangles().iter().enumerate() {
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            defects.push(Defect::DegenerateTriangle { triangle: f });
            continue;
        }
        let [a, b, c] = m.face_positions(f);
        let longest = (b - a).norm_squared().max((c - b).norm_squared()).max((a - c).norm_squared());
        if triangle_cross(a, b, c).norm() <= 1e-12 * longest {
            defects.push(Defect::ZeroAreaTriangle { triangle: f });
        }
    }

    let mut is_manifold = true;
    for (e, &count) in topo.edge_face_count.iter().enumerate() {
        if count > 2 {
            is_manifold = false;
            defects.push(Defect::NonManifoldEdge {
                edge: topo.edges[e],
                face_count: count as usize,
            });
        } else if count == 2 {
            let [f0, f1] = topo.edge_faces[e];
            let [a, b] = topo.edges[e];
            if directed_contains(&m.triangles()[f0], a, b)
                == directed_contains(&m.triangles()[f1], a, b)
            {
                defects.push(Defect::OrientationConflict { edge: topo.edges[e] });
            }
        }
    }

    let component_count = face_components(m);
    ValidationReport {
        is_manifold,
        is_connected: component_count <= 1,
        component_count,
        boundary_loop_count: count_boundary_loops(m),
        defects,
    }
}

fn directed_contains(t: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b)
}

fn face_components(m: &Mesh) -> usize {
    let n = m.face_count();
    let topo = m.topology();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(f) = stack.pop() {
            for &v in &m.triangles()[f] {
                for &g in topo.vertex_faces(v) {
                    if !seen[g] {
                        seen[g] = true;
                        stack.push(g);
                    }
                }
            }
        }
    }
    components
}

fn count_boundary_loops(m: &Mesh) -> usize {
    let topo = m.topology();
    // Directed boundary half-edges, keyed by their start vertex.
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut heads = Vec::new();
    for (f, t) in m.triangles().iter().enumerate() {
        for k in 0..3 {
            if topo.is_boundary_edge(topo.face_edges[f][k]) {
                outgoing.entry(t[k]).or_default().push(heads.len());
                heads.push((t[k], t[(k + 1) % 3]));
            }
        }
    }
    let mut used = vec![false; heads.len()];
    let mut loops = 0;
    for start in 0..heads.len() {
        if used[start] {
            continue;
        }
        loops += 1;
        let mut h = start;
        loop {
            used[h] = true;
            let next = outgoing
                .get(&heads[h].1)
                .and_then(|c| c.iter().copied().find(|&n| !used[n]));
            match next {
                Some(n) => h = n,
                None => break,
            }
        }
    }
    loops
}

/// Per-face region ids. Region 0 is the area outside optimization; regions
/// `1..=k` are the sculptor's planes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabeling {
    #[serde(rename = "K")]
    pub k: usize,
    pub face_labels: Vec<u32>,
}

impl RegionLabeling {
    pub fn new(k: usize, face_labels: Vec<u32>) -> Self {
        RegionLabeling { k, face_labels }
    }

    pub fn uniform(face_count: usize) -> Self {
        RegionLabeling::new(1, vec![1; face_count])
    }

    pub fn label(&self, f: usize) -> u32 {
        self.face_labels[f]
    }

    pub fn faces_of(&self, region: u32) -> impl Iterator<Item = usize> + '_ {
        self.face_labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == region)
            .map(|(f, _)| f)
    }

    pub fn check_size(&self, m: &Mesh) -> Result<()> {
        if self.face_labels.len() != m.face_count() {
            return Err(Error::LabelCountMismatch {
                expected: m.face_count(),
                got: self.face_labels.len(),
            });
        }
        Ok(())
    }

    /// Checks the size, the id range, and that every region `1..=k` is a
    /// nonempty edge-connected set of faces.
    pub fn validate(&self, m: &Mesh) -> Result<()> {
        self.check_size(m)?;
        if let Some(&bad) = self.face_labels.iter().find(|&&l| l as usize > self.k) {
            return Err(Error::InvalidLabeling(format!(
                "label {bad} exceeds region count {}",
                self.k
            )));
        }
        let comps = label_components(m, &self.face_labels);
        let mut per_region = vec![0usize; self.k + 1];
        for c in &comps {
            per_region[c.label as usize] += 1;
        }
        for (r, &count) in per_region.iter().enumerate().skip(1) {
            match count {
                0 => {
                    return Err(Error::InvalidLabeling(format!("region {r} is empty")));
                }
                1 => {}
                n => {
                    return Err(Error::InvalidLabeling(format!(
                        "region {r} has {n} disconnected components"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A maximal edge-connected set of faces sharing one label.
#[derive(Debug, Clone)]
pub struct LabelComponent {
    pub label: u32,
    pub faces: Vec<usize>,
}

/// Flood fills faces across shared manifold edges with equal labels.
pub fn label_components(m: &Mesh, labels: &[u32]) -> Vec<LabelComponent> {
    let topo = m.topology();
    let mut seen = vec![false; m.face_count()];
    let mut out = Vec::new();
    for start in 0..m.face_count() {
        if seen[start] {
            continue;
        }
        let label = labels[start];
        let mut faces = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < faces.len() {
            let f = faces[i];
            i += 1;
            for k in 0..3 {
                if let Some(g) = topo.face_neighbor(f, k) {
                    if !seen[g] && labels[g] == label {
                        seen[g] = true;
                        faces.push(g);
                    }
                }
            }
        }
        out.push(LabelComponent { label, faces });
    }
    out
}

/// Region adjacency graph with per-pair shared boundary length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionAdjacency {
    /// Keyed by `(i, j)` with `i < j`.
    pub boundaries: BTreeMap<(u32, u32), f64>,
}

impl RegionAdjacency {
    pub fn boundary_length(&self, i: u32, j: u32) -> Option<f64> {
        self.boundaries.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn neighbors(&self, r: u32) -> Vec<u32> {
        self.boundaries
            .keys()
            .filter_map(|&(i, j)| {
                if i == r {
                    Some(j)
                } else if j == r {
                    Some(i)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }
}

/// Regions `i` and `j` are adjacent iff some mesh edge has a face of each
/// on its two sides.
pub fn region_adjacency(m: &Mesh, labels: &RegionLabeling) -> Result<RegionAdjacency> {
    labels.check_size(m)?;
    let topo = m.topology();
    let mut boundaries = BTreeMap::new();
    for e in 0..topo.edges.len() {
        if topo.edge_face_count[e] != 2 {
            continue;
        }
        let [f0, f1] = topo.edge_faces[e];
        let (a, b) = (labels.label(f0), labels.label(f1));
        if a != b {
            *boundaries.entry((a.min(b), a.max(b))).or_insert(0.0) += m.edge_length(e);
        }
    }
    Ok(RegionAdjacency { boundaries })
}
