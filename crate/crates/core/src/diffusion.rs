//! Harmonic interpolation of per-boundary smoothing scales into a
//! per-vertex field.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{Error, Result};
use crate::laplacian::cotangent_laplacian_faces;
use crate::mesh::{region_adjacency, Mesh, RegionLabeling};

/// Region pair `(i, j)` with `i < j`.
pub type BoundaryKey = (u32, u32);

pub fn boundary_key(i: u32, j: u32) -> BoundaryKey {
    (i.min(j), i.max(j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleField {
    pub values: Vec<f64>,
    /// Vertices cut off from every boundary value of their domain that
    /// took the value of the nearest boundary vertex instead.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Fallback {
    Nearest(usize),
    Zero,
}

/// Everything that depends only on which boundaries carry a value.
struct DirichletSystem {
    dirichlet: Vec<bool>,
    solved: Vec<usize>,
    /// `(row, dirichlet vertex, weight)` couplings moved to the right side.
    coupling: Vec<(usize, usize, f64)>,
    factor: Option<LdlNumeric<f64, usize>>,
    /// Solved components with the boundary vertices they touch.
    components: Vec<(Vec<usize>, Vec<usize>)>,
    unreachable: Vec<(Vec<usize>, Fallback)>,
}

pub struct ScaleDiffuser {
    positions: Vec<crate::geometry::Vec3>,
    laplacian: CsMat<f64>,
    /// Local Laplacian index of each mesh vertex.
    local: Vec<usize>,
    /// Sorted region pairs whose border passes through each vertex.
    vertex_boundaries: Vec<Vec<BoundaryKey>>,
    /// Regions of the faces around each vertex.
    vertex_regions: Vec<Vec<u32>>,
    boundaries: Vec<BoundaryKey>,
    k: usize,
    cache: Mutex<HashMap<Vec<BoundaryKey>, Arc<DirichletSystem>>>,
}

impl std::fmt::Debug for ScaleDiffuser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaleDiffuser")
            .field("vertices", &self.positions.len())
            .field("boundaries", &self.boundaries.len())
            .field("cached_systems", &self.cached_systems())
            .finish()
    }
}

impl ScaleDiffuser {
    pub fn new(m: &Mesh, labels: &RegionLabeling) -> Result<Self> {
        labels.validate(m)?;
        let n = m.vertex_count();
        let all_faces: Vec<usize> = (0..m.face_count()).collect();
        let lap = cotangent_laplacian_faces(m, &all_faces)?;
        let mut local = vec![usize::MAX; n];
        for (k, &v) in lap.vertices.iter().enumerate() {
            local[v] = k;
        }
        let topo = m.topology();
        let mut vertex_boundaries: Vec<Vec<BoundaryKey>> = vec![Vec::new(); n];
        for e in 0..topo.edges.len() {
            let faces: Vec<usize> = topo.edge_faces(e).collect();
            if let [f, g] = faces[..] {
                let (a, b) = (labels.label(f), labels.label(g));
                if a != b {
                    for v in topo.edges[e] {
                        vertex_boundaries[v].push(boundary_key(a, b));
                    }
                }
            }
        }
        for b in &mut vertex_boundaries {
            b.sort_unstable();
            b.dedup();
        }
        let vertex_regions = (0..n)
            .map(|v| {
                let mut r: Vec<u32> = topo.vertex_faces(v).iter().map(|&f| labels.label(f)).collect();
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        let boundaries = region_adjacency(m, labels)?.boundaries.keys().copied().collect();
        Ok(ScaleDiffuser {
            positions: m.vertices().to_vec(),
            laplacian: lap.matrix,
            local,
            vertex_boundaries,
            vertex_regions,
            boundaries,
            k: labels.k,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// All region pairs that share a border.
    pub fn boundaries(&self) -> &[BoundaryKey] {
        &self.boundaries
    }

    pub fn cached_systems(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    /// Solves for the scale field given values on some boundaries. Each
    /// vertex on a valued boundary is fixed to the mean of the values of
    /// the valued boundaries through it; regions glued by unvalued
    /// boundaries form one harmonic domain.
    pub fn diffuse(&self, values: &BTreeMap<BoundaryKey, f64>) -> Result<ScaleField> {
        for (&(i, j), &s) in values {
            if i >= j || self.boundaries.binary_search(&(i, j)).is_err() {
                return Err(Error::InvalidArgument(format!("regions {i} and {j} share no boundary")));
            }
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidArgument(format!("smoothing scale {s} on ({i}, {j})")));
            }
        }
        let key: Vec<BoundaryKey> = values.keys().copied().collect();
        let system = {
            let mut cache = self.cache.lock().map_err(|_| Error::Factorization("cache poisoned".into()))?;
            match cache.get(&key) {
                Some(s) => s.clone(),
                None => {
                    let s = Arc::new(self.build_system(&key)?);
                    cache.insert(key, s.clone());
                    s
                }
            }
        };

        let n = self.positions.len();
        let mut out = vec![0.0; n];
        for v in 0..n {
            if system.dirichlet[v] {
                let vals: Vec<f64> = self.vertex_boundaries[v]
                    .iter()
                    .filter_map(|b| values.get(b).copied())
                    .collect();
                out[v] = vals.iter().sum::<f64>() / vals.len() as f64;
            }
        }
        if let Some(factor) = &system.factor {
            let mut rhs = vec![0.0; system.solved.len()];
            for &(row, d, w) in &system.coupling {
                rhs[row] += w * out[d];
            }
            let x = factor.solve(&rhs);
            for (&v, &s) in system.solved.iter().zip(&x) {
                out[v] = s;
            }
        }
        for (members, touching) in &system.components {
            let first = out[touching[0]];
            if touching.iter().all(|&d| out[d] == first) {
                for &v in members {
                    out[v] = first;
                }
            }
        }
        let mut flagged = Vec::new();
        for (members, fallback) in &system.unreachable {
            let s = match fallback {
                Fallback::Nearest(d) => {
                    flagged.extend_from_slice(members);
                    out[*d]
                }
                Fallback::Zero => 0.0,
            };
            for &v in members {
                out[v] = s;
            }
        }
        flagged.sort_unstable();
        Ok(ScaleField { values: out, flagged })
    }

    fn build_system(&self, valued: &[BoundaryKey]) -> Result<DirichletSystem> {
        let n = self.positions.len();
        let dirichlet: Vec<bool> = (0..n)
            .map(|v| self.vertex_boundaries[v].iter().any(|b| valued.binary_search(b).is_ok()))
            .collect();

        // Domains: regions glued along unvalued boundaries.
        let mut parent: Vec<usize> = (0..=self.k).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let next = p[c];
                p[c] = r;
                c = next;
            }
            r
        }
        for &(i, j) in &self.boundaries {
            if valued.binary_search(&(i, j)).is_err() {
                let (a, b) = (find(&mut parent, i as usize), find(&mut parent, j as usize));
                parent[a.max(b)] = a.min(b);
            }
        }
        let domain_of = |p: &mut [usize], v: usize| self.vertex_regions[v].first().map(|&r| find(p, r as usize));
        let mut dirichlet_by_domain: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in (0..n).filter(|&v| dirichlet[v]) {
            for &r in &self.vertex_regions[v] {
                let d = find(&mut parent, r as usize);
                dirichlet_by_domain.entry(d).or_default().push(v);
            }
        }

        // Components of free vertices in the Laplacian graph.
        let neighbors = |v: usize| -> Vec<(usize, f64)> {
            let l = self.local[v];
            if l == usize::MAX {
                return Vec::new();
            }
            let row = self.laplacian.outer_view(l).expect("row in range");
            row.iter()
                .filter(|&(c, _)| c != l)
                .map(|(c, &w)| (c, -w))
                .collect()
        };
        let mut global_of_local = vec![0usize; self.laplacian.rows()];
        for v in 0..n {
            if self.local[v] != usize::MAX {
                global_of_local[self.local[v]] = v;
            }
        }
        let mut component = vec![usize::MAX; n];
        let mut solved = Vec::new();
        let mut row = vec![usize::MAX; n];
        let mut components = Vec::new();
        let mut unreachable = Vec::new();
        for start in 0..n {
            if dirichlet[start] || component[start] != usize::MAX {
                continue;
            }
            let id = components.len() + unreachable.len();
            let mut members = vec![start];
            let mut touching = Vec::new();
            component[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for (c, _) in neighbors(v) {
                    let u = global_of_local[c];
                    if dirichlet[u] {
                        touching.push(u);
                    } else if component[u] == usize::MAX {
                        component[u] = id;
                        members.push(u);
                        queue.push_back(u);
                    }
                }
            }
            members.sort_unstable();
            if touching.is_empty() {
                let fallback = match domain_of(&mut parent, start).and_then(|d| dirichlet_by_domain.get(&d)) {
                    Some(candidates) => Fallback::Nearest(self.nearest(members[0], candidates)),
                    None => {
                        let any: Vec<usize> = (0..n).filter(|&v| dirichlet[v]).collect();
                        if self.vertex_regions[start].is_empty() && !any.is_empty() {
                            Fallback::Nearest(self.nearest(start, &any))
                        } else {
                            Fallback::Zero
                        }
                    }
                };
                unreachable.push((members, fallback));
            } else {
                touching.sort_unstable();
                touching.dedup();
                for &v in &members {
                    row[v] = solved.len();
                    solved.push(v);
                }
                components.push((members, touching));
            }
        }

        let mut tri = TriMat::new((solved.len(), solved.len()));
        let mut coupling = Vec::new();
        for (r, &v) in solved.iter().enumerate() {
            let l = self.local[v];
            for (c, &w) in self.laplacian.outer_view(l).expect("row in range").iter() {
                let u = global_of_local[c];
                if dirichlet[u] {
                    coupling.push((r, u, -w));
                } else if row[u] != usize::MAX {
                    tri.add_triplet(r, row[u], w);
                }
            }
        }
        let factor = if solved.is_empty() {
            None
        } else {
            let mat: CsMat<f64> = tri.to_csr();
            Some(
                Ldl::new()
                    .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
                    .numeric(mat.view())
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?,
            )
        };
        log::debug!(
            "scale system: {} solved, {} fixed, {} unreachable components",
            solved.len(),
            dirichlet.iter().filter(|&&d| d).count(),
            unreachable.len()
        );
        Ok(DirichletSystem {
            dirichlet,
            solved,
            coupling,
            factor,
            components,
            unreachable,
        })
    }

    fn nearest(&self, v: usize, candidates: &[usize]) -> usize {
        let p = self.positions[v];
        *candidates
            .iter()
            .min_by(|&&a, &&b| {
                (self.positions[a] - p)
                    .norm_squared()
                    .total_cmp(&(self.positions[b] - p).norm_squared())
            })
            .expect("nonempty candidates")
    }
}

/// The same value on every region boundary.
pub fn uniform_boundary_values(d: &ScaleDiffuser, s: f64) -> BTreeMap<BoundaryKey, f64> {
    d.boundaries().iter().map(|&b| (b, s)).collect()
}

/// One-shot diffusion without factorization reuse.
pub fn diffuse_smoothing_scale(
    m: &Mesh,
    labels: &RegionLabeling,
    values: &BTreeMap<BoundaryKey, f64>,
) -> Result<ScaleField> {
    ScaleDiffuser::new(m, labels)?.diffuse(values)
}
