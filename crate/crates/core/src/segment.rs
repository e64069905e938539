//! Region labelings: variational shape approximation for generic models and
//! nearest-vertex label transfer from a pre-aligned template.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{label_components, Mesh, RegionLabeling};

/// Planar proxy of one VSA region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsaProxy {
    pub region: u32,
    pub normal: Vec3,
    pub seed_face: usize,
}

#[derive(Debug, Clone)]
pub struct VsaOptions {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl VsaOptions {
    pub fn new(k: usize) -> Self {
        VsaOptions {
            k,
            max_iters: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VsaResult {
    pub labeling: RegionLabeling,
    pub proxies: Vec<VsaProxy>,
    /// `Σ_t A_t |n_t − n_r(t)|²` after each accepted iteration.
    pub energy_trace: Vec<f64>,
}

/// Segments `m` into `k` regions with seed 0.
pub fn vsa_segment(m: &Mesh, k: usize, max_iters: usize) -> Result<RegionLabeling> {
    let opts = VsaOptions {
        max_iters,
        ..VsaOptions::new(k)
    };
    Ok(vsa_segment_with(m, &opts)?.labeling)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueItem {
    error: f64,
    face: usize,
    region: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(self.face.cmp(&other.face))
            .then(self.region.cmp(&other.region))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct FaceData {
    normals: Vec<Vec3>,
    areas: Vec<f64>,
}

impl FaceData {
    fn new(m: &Mesh) -> Self {
        FaceData {
            normals: (0..m.face_count()).map(|f| m.face_normal(f)).collect(),
            areas: (0..m.face_count()).map(|f| m.face_area(f)).collect(),
        }
    }

    fn error(&self, f: usize, n: &Vec3) -> f64 {
        self.areas[f] * (self.normals[f] - n).norm_squared()
    }
}

pub fn vsa_segment_with(m: &Mesh, opts: &VsaOptions) -> Result<VsaResult> {
    let faces = m.face_count();
    if opts.k == 0 {
        return Err(Error::InvalidArgument("region count must be at least 1".into()));
    }
    if opts.k > faces {
        return Err(Error::Segmentation(format!(
            "{} regions requested but the mesh has only {faces} faces",
            opts.k
        )));
    }
    if !m.validate().is_connected {
        return Err(Error::Segmentation("mesh is not connected".into()));
    }
    let data = FaceData::new(m);
    let mut seeds = initial_seeds(m, &data, opts.k, opts.seed);

    let mut labels = flood(m, &data, &seeds, &seeds.iter().map(|&s| data.normals[s]).collect::<Vec<_>>());
    let mut normals = refit(&data, &labels, opts.k);
    let mut energy = total_energy(&data, &labels, &normals);
    let mut trace = vec![energy];

    for _ in 1..opts.max_iters.max(1) {
        seeds = update_seeds(&data, &labels, &normals, opts.k);
        let next = flood(m, &data, &seeds, &normals);
        if next == labels {
            break;
        }
        let next_normals = refit(&data, &next, opts.k);
        let next_energy = total_energy(&data, &next, &next_normals);
        if next_energy > energy {
            log::debug!("vsa: energy rose from {energy} to {next_energy}; keeping previous partition");
            break;
        }
        labels = next;
        normals = next_normals;
        energy = next_energy;
        trace.push(energy);
    }
    seeds = update_seeds(&data, &labels, &normals, opts.k);

    let proxies = (0..opts.k)
        .map(|r| VsaProxy {
            region: r as u32 + 1,
            normal: normals[r],
            seed_face: seeds[r],
        })
        .collect();
    let face_labels = labels.iter().map(|&r| r as u32 + 1).collect();
    Ok(VsaResult {
        labeling: RegionLabeling::new(opts.k, face_labels),
        proxies,
        energy_trace: trace,
    })
}

/// Random first face, then repeatedly the face whose normal is farthest
/// from every seed so far. Ties go to the face farthest from the seeds in
/// the dual graph, then to the lowest index.
fn initial_seeds(m: &Mesh, data: &FaceData, k: usize, seed: u64) -> Vec<usize> {
    let faces = m.face_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..faces);
    let mut seeds = vec![first];
    let mut normal_dist: Vec<f64> = (0..faces)
        .map(|f| (data.normals[f] - data.normals[first]).norm_squared())
        .collect();
    let mut hops = vec![usize::MAX; faces];
    let mut is_seed = vec![false; faces];
    is_seed[first] = true;
    while seeds.len() < k {
        dual_bfs(m, &seeds, &mut hops);
        let mut best = None::<usize>;
        for f in 0..faces {
            if is_seed[f] {
                continue;
            }
            best = match best {
                None => Some(f),
                Some(b) => {
                    let (df, db) = (normal_dist[f], normal_dist[b]);
                    if df > db + 1e-12 || ((df - db).abs() <= 1e-12 && hops[f] > hops[b]) {
                        Some(f)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let s = best.expect("k <= face count");
        seeds.push(s);
        is_seed[s] = true;
        for f in 0..faces {
            normal_dist[f] = normal_dist[f].min((data.normals[f] - data.normals[s]).norm_squared());
        }
    }
    seeds
}

fn dual_bfs(m: &Mesh, sources: &[usize], hops: &mut [usize]) {
    hops.fill(usize::MAX);
    let mut queue = VecDeque::new();
    for &s in sources {
        hops[s] = 0;
        queue.push_back(s);
    }
    while let Some(f) = queue.pop_front() {
        for k in 0..3 {
            if let Some(g) = m.topology().face_neighbor(f, k) {
                if hops[g] == usize::MAX {
                    hops[g] = hops[f] + 1;
                    queue.push_back(g);
                }
            }
        }
    }
}

/// Region growing from the seeds by increasing proxy error.
fn flood(m: &Mesh, data: &FaceData, seeds: &[usize], normals: &[Vec3]) -> Vec<usize> {
    let mut labels = vec![usize::MAX; m.face_count()];
    let mut heap = BinaryHeap::new();
    for (r, &s) in seeds.iter().enumerate() {
        labels[s] = r;
    }
    let push_neighbors = |f: usize, r: usize, labels: &[usize], heap: &mut BinaryHeap<Reverse<QueueItem>>| {
        for k in 0..3 {
            if let Some(g) = m.topology().face_neighbor(f, k) {
                if labels[g] == usize::MAX {
                    heap.push(Reverse(QueueItem {
                        error: data.error(g, &normals[r]),
                        face: g,
                        region: r,
                    }));
                }
            }
        }
    };
    for (r, &s) in seeds.iter().enumerate() {
        push_neighbors(s, r, &labels, &mut heap);
    }
    while let Some(Reverse(item)) = heap.pop() {
        if labels[item.face] != usize::MAX {
            continue;
        }
        labels[item.face] = item.region;
        push_neighbors(item.face, item.region, &labels, &mut heap);
    }
    labels
}

fn refit(data: &FaceData, labels: &[usize], k: usize) -> Vec<Vec3> {
    let mut sums = vec![Vec3::zeros(); k];
    for (f, &r) in labels.iter().enumerate() {
        sums[r] += data.normals[f] * data.areas[f];
    }
    sums.into_iter()
        .map(|s| {
            let n = s.norm();
            if n > 0.0 {
                s / n
            } else {
                Vec3::z()
            }
        })
        .collect()
}

fn total_energy(data: &FaceData, labels: &[usize], normals: &[Vec3]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(f, &r)| data.error(f, &normals[r]))
        .sum()
}

fn update_seeds(data: &FaceData, labels: &[usize], normals: &[Vec3], k: usize) -> Vec<usize> {
    let mut best = vec![(f64::INFINITY, usize::MAX); k];
    for (f, &r) in labels.iter().enumerate() {
        let e = data.error(f, &normals[r]);
        if e < best[r].0 {
            best[r] = (e, f);
        }
    }
    best.into_iter().map(|(_, f)| f).collect()
}

/// A template mesh with its manual segmentation.
#[derive(Debug, Clone)]
pub struct LabeledTemplate {
    pub mesh: Mesh,
    pub labels: RegionLabeling,
}

/// Copies the template segmentation onto `input` through nearest-vertex
/// correspondences. The template must already be aligned with the input.
pub fn transfer_labels(input: &Mesh, template: &LabeledTemplate) -> Result<RegionLabeling> {
    let tm = &template.mesh;
    if tm.vertex_count() == 0 || tm.face_count() == 0 {
        return Err(Error::Segmentation("template mesh is empty".into()));
    }
    template.labels.check_size(tm)?;

    let vertex_labels: Vec<u32> = (0..tm.vertex_count())
        .map(|v| {
            majority(
                tm.topology()
                    .vertex_faces(v)
                    .iter()
                    .map(|&f| template.labels.label(f)),
            )
            .unwrap_or(0)
        })
        .collect();
    let points: Vec<[f64; 3]> = tm.vertices().iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&points)
        .map_err(|e| Error::Segmentation(format!("cannot index template vertices: {e:?}")))?;
    let nearest: Vec<usize> = input
        .vertices()
        .iter()
        .map(|p| {
            tree.query(&[p.x, p.y, p.z])
                .nearest_one::<SquaredEuclidean<f64>>()
                .execute()
                .item as usize
        })
        .collect();

    let mut template_faces: HashMap<[usize; 3], usize> = HashMap::with_capacity(tm.face_count());
    for (f, t) in tm.triangles().iter().enumerate() {
        let mut key = *t;
        key.sort_unstable();
        template_faces.insert(key, f);
    }

    let face_labels = input
        .triangles()
        .iter()
        .map(|t| {
            let mut key = t.map(|v| nearest[v]);
            key.sort_unstable();
            match template_faces.get(&key) {
                Some(&f) => template.labels.label(f),
                None => majority(t.iter().map(|&v| vertex_labels[nearest[v]])).unwrap_or(0),
            }
        })
        .collect();
    clean_labeling(input, RegionLabeling::new(template.labels.k, face_labels))
}

/// Most frequent value; ties go to the smallest.
fn majority(values: impl Iterator<Item = u32>) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let mut best: Option<(u32, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Fraction of the total surface area below which a region is merged away.
pub const MIN_REGION_AREA_FRACTION: f64 = 1e-3;

/// Splits disconnected regions, merges tiny ones into their
/// longest-boundary neighbor, drops empty ids and renumbers `1..=K`.
/// Region 0 is left as is.
pub fn clean_labeling(m: &Mesh, labeling: RegionLabeling) -> Result<RegionLabeling> {
    labeling.check_size(m)?;
    let mut labels = labeling.face_labels;
    let mut next_id = labels.iter().copied().max().unwrap_or(0).max(labeling.k as u32) + 1;

    let mut comps = label_components(m, &labels);
    comps.sort_by(|a, b| a.label.cmp(&b.label).then(b.faces.len().cmp(&a.faces.len())));
    let mut seen_label = None;
    for c in &comps {
        if c.label == 0 {
            continue;
        }
        if seen_label == Some(c.label) {
            for &f in &c.faces {
                labels[f] = next_id;
            }
            next_id += 1;
        }
        seen_label = Some(c.label);
    }

    let areas: Vec<f64> = (0..m.face_count()).map(|f| m.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    let mut region_area: BTreeMap<u32, f64> = BTreeMap::new();
    for (f, &l) in labels.iter().enumerate() {
        *region_area.entry(l).or_default() += areas[f];
    }
    let mut small: Vec<(f64, u32)> = region_area
        .iter()
        .filter(|&(&l, &a)| l != 0 && a < MIN_REGION_AREA_FRACTION * total)
        .map(|(&l, &a)| (a, l))
        .collect();
    small.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let topo = m.topology();
    for (_, region) in small {
        let mut shared: BTreeMap<u32, f64> = BTreeMap::new();
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            let fs: Vec<usize> = topo.edge_faces(e).collect();
            if fs.len() != 2 {
                continue;
            }
            let (la, lb) = (labels[fs[0]], labels[fs[1]]);
            if la == lb || (la != region && lb != region) {
                continue;
            }
            let other = if la == region { lb } else { la };
            *shared.entry(other).or_default() += (m.vertices()[a] - m.vertices()[b]).norm();
        }
        let target = shared
            .iter()
            .fold(None::<(u32, f64)>, |best, (&l, &len)| match best {
                Some((_, bl)) if bl >= len => best,
                _ => Some((l, len)),
            });
        if let Some((target, _)) = target {
            for l in labels.iter_mut().filter(|l| **l == region) {
                *l = target;
            }
        }
    }

    let used: std::collections::BTreeSet<u32> = labels.iter().copied().filter(|&l| l != 0).collect();
    let remap: HashMap<u32, u32> = used.iter().enumerate().map(|(i, &l)| (l, i as u32 + 1)).collect();
    for l in labels.iter_mut() {
        if *l != 0 {
            *l = remap[l];
        }
    }
    Ok(RegionLabeling::new(used.len(), labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::region_adjacency;

    #[test]
    fn cube_with_six_regions_recovers_its_faces() {
        let cube = fixtures::unit_cube();
        let res = vsa_segment_with(&cube, &VsaOptions::new(6)).unwrap();
        assert_eq!(*res.energy_trace.last().unwrap(), 0.0);
        for f in (0..12).step_by(2) {
            assert_eq!(res.labeling.label(f), res.labeling.label(f + 1));
        }
        let mut ids: Vec<u32> = res.labeling.face_labels.clone();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids, vec![1, 2, 3, 4, 5, 6]);
        res.labeling.validate(&cube).unwrap();
    }

    #[test]
    fn cube_result_is_seed_independent() {
        let cube = fixtures::unit_cube();
        for seed in 0..10 {
            let res = vsa_segment_with(&cube, &VsaOptions { seed, ..VsaOptions::new(6) }).unwrap();
            assert_eq!(*res.energy_trace.last().unwrap(), 0.0, "seed {seed}");
        }
    }

    #[test]
    fn single_region_takes_every_face() {
        let sphere = fixtures::icosphere(2);
        let labels = vsa_segment(&sphere, 1, 10).unwrap();
        assert!(labels.face_labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn sphere_energy_never_increases() {
        for level in 1..=3 {
            let sphere = fixtures::icosphere(level);
            let res = vsa_segment_with(&sphere, &VsaOptions { max_iters: 30, ..VsaOptions::new(8) }).unwrap();
            assert!(res.energy_trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", res.energy_trace);
            res.labeling.validate(&sphere).unwrap();
        }
    }

    #[test]
    fn too_many_regions_is_an_error() {
        let cube = fixtures::unit_cube();
        assert!(vsa_segment(&cube, 13, 5).is_err());
        assert!(vsa_segment(&cube, 0, 5).is_err());
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let mut vertices = fixtures::unit_cube().vertices().to_vec();
        let mut triangles = fixtures::unit_cube().triangles().to_vec();
        vertices.extend(vertices.clone().iter().map(|v| v + Vec3::new(3.0, 0.0, 0.0)));
        triangles.extend(triangles.clone().iter().map(|t| t.map(|i| i + 8)));
        let m = Mesh::new(vertices, triangles).unwrap();
        assert!(matches!(vsa_segment(&m, 2, 5), Err(Error::Segmentation(_))));
    }

    #[test]
    fn majority_vote_prefers_count_then_lowest_id() {
        assert_eq!(majority([3, 3, 7].into_iter()), Some(3));
        assert_eq!(majority([7, 3, 7].into_iter()), Some(7));
        assert_eq!(majority([9, 4, 6].into_iter()), Some(4));
        assert_eq!(majority(std::iter::empty()), None);
    }

    #[test]
    fn transfer_onto_identical_mesh_is_identity() {
        let face = fixtures::synthetic_face(40);
        let template = LabeledTemplate {
            mesh: face.mesh.clone(),
            labels: face.labels.clone(),
        };
        let labels = transfer_labels(&face.mesh, &template).unwrap();
        assert_eq!(labels, face.labels);
    }

    #[test]
    fn transfer_survives_small_vertex_noise() {
        let face = fixtures::synthetic_face(40);
        let min_edge = (0..face.mesh.topology().edges.len())
            .map(|e| face.mesh.edge_length(e))
            .fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noisy = face
            .mesh
            .vertices()
            .iter()
            .map(|v| {
                let d = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                v + d.normalize() * (min_edge / 3.0) * rng.random_range(0.0..0.99)
            })
            .collect();
        let input = face.mesh.with_positions(noisy).unwrap();
        let template = LabeledTemplate {
            mesh: face.mesh.clone(),
            labels: face.labels.clone(),
        };
        assert_eq!(transfer_labels(&input, &template).unwrap(), face.labels);
    }

    #[test]
    fn empty_template_is_rejected() {
        let template = LabeledTemplate {
            mesh: Mesh::new(vec![], vec![]).unwrap(),
            labels: RegionLabeling::new(0, vec![]),
        };
        assert!(transfer_labels(&fixtures::unit_cube(), &template).is_err());
    }

    #[test]
    fn cleaning_splits_and_compacts() {
        // Regions 1 and 3 of a 4-face strip; region 1 appears twice.
        let m = fixtures::grid(4, 1, 1.0);
        let labels = RegionLabeling::new(5, vec![1, 1, 3, 3, 1, 1, 3, 3]);
        let cleaned = clean_labeling(&m, labels).unwrap();
        assert_eq!(cleaned.k, 4);
        assert_eq!(cleaned.face_labels, vec![1, 1, 2, 2, 3, 3, 4, 4]);
        cleaned.validate(&m).unwrap();
    }

    #[test]
    fn cleaning_merges_slivers_into_longest_neighbor() {
        let m = fixtures::grid(40, 40, 1.0);
        let mut face_labels: Vec<u32> = (0..m.face_count())
            .map(|f| if (f / 2) % 40 < 20 { 1 } else { 2 })
            .collect();
        // A single triangle inside region 2 gets its own id.
        face_labels[2 * (40 * 10 + 30)] = 3;
        let cleaned = clean_labeling(&m, RegionLabeling::new(3, face_labels)).unwrap();
        assert_eq!(cleaned.k, 2);
        assert_eq!(cleaned.face_labels[2 * (40 * 10 + 30)], 2);
        let adj = region_adjacency(&m, &cleaned).unwrap();
        assert_eq!(adj.len(), 1);
    }
}
