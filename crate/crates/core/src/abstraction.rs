//! The abstracted mesh: anchor vertices on region borders, the polylines
//! they subdivide, per-region anchor loops and the rest-state quantities
//! the regularizers compare against.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{least_aligned_axis, Vec3};
use crate::mesh::{region_adjacency, Mesh, RegionLabeling};
use crate::proxy::{fan_measure, proxy_normal_loops, PlaneProxy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub position: Vec3,
    /// Index of the full-resolution vertex the anchor was taken from.
    pub vertex: usize,
    pub on_open_boundary: bool,
    /// Fixed anchors are not optimized: they lie on the open boundary or
    /// touch the non-deformed region 0.
    pub fixed: bool,
}

/// What lies on the far side of a border polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Region(u32),
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    /// Smaller region id on one side.
    pub a: u32,
    /// Larger region id, or the open mesh boundary.
    pub b: Side,
    /// Full-resolution vertex path.
    pub vertices: Vec<usize>,
    /// Anchor ids along the path, in path order.
    pub anchors: Vec<usize>,
    pub closed: bool,
    /// Full-resolution arc length.
    pub length: f64,
}

/// Rest-state quantities of a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionInitial {
    /// Loop fan area, normal and centroid of the anchor loops.
    pub area: f64,
    pub normal: Vec3,
    pub centroid: Vec3,
    /// Area-weighted normal and centroid of the full-resolution faces; the
    /// plane planarization flattens toward.
    pub plane_normal: Vec3,
    pub plane_centroid: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLoops {
    pub id: u32,
    /// Anchor cycles with the region on the left.
    pub loops: Vec<Vec<usize>>,
    pub initial: RegionInitial,
}

/// A coarse edge between consecutive anchors of a region-region polyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorderEdge {
    pub a: usize,
    pub b: usize,
    pub rest_length: f64,
}

/// Full-resolution length of the border shared by two regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub regions: [u32; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractedMesh {
    pub k: usize,
    pub anchors: Vec<Anchor>,
    pub polylines: Vec<Polyline>,
    /// Regions `1..=k`, in order.
    pub regions: Vec<RegionLoops>,
    pub border_edges: Vec<BorderEdge>,
    /// Region pairs (including region 0) with their shared border length.
    pub boundaries: Vec<Boundary>,
    /// Mean rest length of the border edges.
    pub mean_edge_length: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AbstractionOptions {
    /// Maximum anchor spacing along a polyline in multiples of the mean
    /// full-resolution edge length.
    pub spacing_factor: f64,
    /// Lower bound on the spacing as a fraction of `sqrt(A / K)`, the side
    /// of an average region. Keeps the anchor count independent of scan
    /// resolution.
    pub region_fraction: f64,
    /// Douglas-Peucker tolerance for open-boundary polylines, relative to
    /// their arc length.
    pub open_tolerance: f64,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        AbstractionOptions {
            spacing_factor: 8.0,
            region_fraction: 1.5,
            open_tolerance: 0.05,
        }
    }
}

impl AbstractedMesh {
    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    pub fn free_anchor_count(&self) -> usize {
        self.anchors.iter().filter(|a| !a.fixed).count()
    }

    pub fn region(&self, r: u32) -> &RegionLoops {
        &self.regions[r as usize - 1]
    }

    pub fn rest_positions(&self) -> Vec<Vec3> {
        self.anchors.iter().map(|a| a.position).collect()
    }

    /// Boundaries between two optimized regions (both ids ≥ 1).
    pub fn style_boundaries(&self) -> impl Iterator<Item = &Boundary> {
        self.boundaries.iter().filter(|b| b.regions[0] >= 1)
    }

    pub fn boundary_length(&self, i: u32, j: u32) -> Option<f64> {
        let key = [i.min(j), i.max(j)];
        self.boundaries
            .iter()
            .find(|b| b.regions == key)
            .map(|b| b.length)
    }

    /// Loop positions of region `r` under the given anchor positions.
    pub fn loop_positions(&self, r: u32, positions: &[Vec3]) -> Vec<Vec<Vec3>> {
        self.region(r)
            .loops
            .iter()
            .map(|l| l.iter().map(|&i| positions[i]).collect())
            .collect()
    }

    /// Rest-state plane of each region from its anchor loops.
    pub fn initial_proxies(&self) -> Vec<PlaneProxy> {
        self.regions
            .iter()
            .map(|r| PlaneProxy {
                region: r.id,
                normal: r.initial.normal,
                centroid: r.initial.centroid,
            })
            .collect()
    }

    /// Planes of the full-resolution regions.
    pub fn full_planes(&self) -> Vec<PlaneProxy> {
        self.regions
            .iter()
            .map(|r| PlaneProxy {
                region: r.id,
                normal: r.initial.plane_normal,
                centroid: r.initial.plane_centroid,
            })
            .collect()
    }

    /// Assembles an abstracted mesh from explicit anchors and loops and
    /// derives every rest quantity from the anchor geometry. The
    /// full-resolution planes default to the loop planes.
    pub fn from_loops(
        anchors: Vec<Anchor>,
        polylines: Vec<Polyline>,
        loops: Vec<Vec<Vec<usize>>>,
        boundaries: Vec<Boundary>,
    ) -> Result<Self> {
        let regions = loops
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let id = i as u32 + 1;
                let initial = loop_initial(id, &l, &anchors)?;
                Ok(RegionLoops {
                    id,
                    loops: l,
                    initial: RegionInitial {
                        plane_normal: initial.normal,
                        plane_centroid: initial.centroid,
                        ..initial
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let border_edges = border_edges(&polylines, &anchors);
        let mean_edge_length = mean_border_length(&border_edges, &polylines, &anchors)?;
        Ok(AbstractedMesh {
            k: regions.len(),
            anchors,
            polylines,
            regions,
            border_edges,
            boundaries,
            mean_edge_length,
        })
    }
}

fn loop_initial(id: u32, loops: &[Vec<usize>], anchors: &[Anchor]) -> Result<RegionInitial> {
    let pts: Vec<Vec<Vec3>> = loops
        .iter()
        .map(|l| l.iter().map(|&i| anchors[i].position).collect())
        .collect();
    if loops.iter().any(|l| l.len() < 3) {
        return Err(Error::Abstraction(format!("region {id} has a loop with fewer than 3 anchors")));
    }
    let normal = proxy_normal_loops(&pts)
        .ok_or_else(|| Error::Abstraction(format!("region {id} loop encloses no area")))?;
    let fan = fan_measure(&pts, &normal);
    if fan.degenerate || fan.area <= 0.0 {
        return Err(Error::Abstraction(format!("region {id} loop encloses no area")));
    }
    Ok(RegionInitial {
        area: fan.area,
        normal,
        centroid: fan.centroid,
        plane_normal: normal,
        plane_centroid: fan.centroid,
    })
}

fn border_edges(polylines: &[Polyline], anchors: &[Anchor]) -> Vec<BorderEdge> {
    let mut edges = Vec::new();
    for p in polylines.iter().filter(|p| p.b != Side::Open) {
        let n = p.anchors.len();
        let count = if p.closed { n } else { n.saturating_sub(1) };
        for k in 0..count {
            let (a, b) = (p.anchors[k], p.anchors[(k + 1) % n]);
            edges.push(BorderEdge {
                a,
                b,
                rest_length: (anchors[a].position - anchors[b].position).norm(),
            });
        }
    }
    edges
}

fn mean_border_length(edges: &[BorderEdge], polylines: &[Polyline], anchors: &[Anchor]) -> Result<f64> {
    if let Some(bad) = edges.iter().find(|e| e.rest_length <= 0.0) {
        return Err(Error::Abstraction(format!(
            "anchors {} and {} coincide",
            bad.a, bad.b
        )));
    }
    if !edges.is_empty() {
        return Ok(edges.iter().map(|e| e.rest_length).sum::<f64>() / edges.len() as f64);
    }
    // No region-region border at all: fall back to the open-boundary edges.
    let mut total = 0.0;
    let mut count = 0;
    for p in polylines {
        let n = p.anchors.len();
        let segs = if p.closed { n } else { n.saturating_sub(1) };
        for k in 0..segs {
            total += (anchors[p.anchors[k]].position - anchors[p.anchors[(k + 1) % n]].position).norm();
            count += 1;
        }
    }
    if count == 0 || total <= 0.0 {
        return Err(Error::Abstraction("abstracted mesh has no border edges".into()));
    }
    Ok(total / count as f64)
}

/// What is across edge `e` from region `label`, if the edge is a border.
fn edge_side(m: &Mesh, labels: &RegionLabeling, e: usize) -> Option<(u32, Side)> {
    let faces: Vec<usize> = m.topology().edge_faces(e).collect();
    match faces.as_slice() {
        [f] => {
            let l = labels.label(*f);
            (l >= 1).then_some((l, Side::Open))
        }
        [f, g] => {
            let (a, b) = (labels.label(*f), labels.label(*g));
            (a != b).then_some((a.min(b), Side::Region(a.max(b))))
        }
        _ => None,
    }
}

/// Builds the abstracted mesh with default options.
pub fn build_abstracted_mesh(m: &Mesh, labels: &RegionLabeling) -> Result<AbstractedMesh> {
    build_abstracted_mesh_with(m, labels, &AbstractionOptions::default())
}

pub fn build_abstracted_mesh_with(
    m: &Mesh,
    labels: &RegionLabeling,
    opts: &AbstractionOptions,
) -> Result<AbstractedMesh> {
    labels.validate(m)?;
    let topo = m.topology();
    if topo.edge_face_count.iter().any(|&c| c > 2) {
        return Err(Error::Abstraction("mesh has non-manifold edges".into()));
    }
    let pos = m.vertices();

    // Border edges and their side keys.
    let mut side_of_edge: HashMap<usize, (u32, Side)> = HashMap::new();
    let mut vertex_border: Vec<Vec<usize>> = vec![Vec::new(); m.vertex_count()];
    for e in 0..topo.edges.len() {
        if let Some(key) = edge_side(m, labels, e) {
            side_of_edge.insert(e, key);
            for v in topo.edges[e] {
                vertex_border[v].push(e);
            }
        }
    }
    let is_junction = |v: usize| -> bool {
        let degree = vertex_border[v].len();
        if degree == 0 {
            return false;
        }
        let mut sides: BTreeSet<Side> = topo
            .vertex_faces(v)
            .iter()
            .map(|&f| Side::Region(labels.label(f)))
            .collect();
        if topo.boundary_vertex[v] {
            sides.insert(Side::Open);
        }
        sides.len() >= 3 || degree != 2
    };

    // Trace polylines between junctions, then the junction-free cycles.
    let edge_length = |a: usize, b: usize| (pos[a] - pos[b]).norm();
    let mut visited: HashMap<usize, bool> = side_of_edge.keys().map(|&e| (e, false)).collect();
    let mut paths: Vec<(u32, Side, Vec<usize>, bool)> = Vec::new();
    let other_end = |e: usize, v: usize| {
        let [a, b] = topo.edges[e];
        if a == v {
            b
        } else {
            a
        }
    };
    let junctions: Vec<usize> = (0..m.vertex_count()).filter(|&v| is_junction(v)).collect();
    let junction_set: BTreeSet<usize> = junctions.iter().copied().collect();
    for &j in &junctions {
        let mut incident = vertex_border[j].clone();
        incident.sort_unstable();
        for e0 in incident {
            if visited[&e0] {
                continue;
            }
            let (a, b) = side_of_edge[&e0];
            let mut path = vec![j];
            let mut e = e0;
            let mut cur = j;
            loop {
                visited.insert(e, true);
                cur = other_end(e, cur);
                path.push(cur);
                if junction_set.contains(&cur) {
                    break;
                }
                match vertex_border[cur].iter().find(|&&f| !visited[&f]) {
                    Some(&f) => e = f,
                    None => break,
                }
            }
            paths.push((a, b, path, false));
        }
    }
    let mut remaining: Vec<usize> = visited.iter().filter(|(_, &v)| !v).map(|(&e, _)| e).collect();
    remaining.sort_unstable();
    for e0 in remaining {
        if visited[&e0] {
            continue;
        }
        let (a, b) = side_of_edge[&e0];
        let start = topo.edges[e0][0];
        let mut path = vec![start];
        let mut e = e0;
        let mut cur = start;
        loop {
            visited.insert(e, true);
            cur = other_end(e, cur);
            if cur == start {
                break;
            }
            path.push(cur);
            match vertex_border[cur].iter().find(|&&f| !visited[&f]) {
                Some(&f) => e = f,
                None => break,
            }
        }
        let min_at = path
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .unwrap_or(0);
        path.rotate_left(min_at);
        paths.push((a, b, path, true));
    }

    // Anchor spacing.
    let opt_area: f64 = (0..m.face_count())
        .filter(|&f| labels.label(f) >= 1)
        .map(|f| m.face_area(f))
        .sum();
    let spacing = (opts.spacing_factor * m.mean_edge_length())
        .max(opts.region_fraction * (opt_area / labels.k.max(1) as f64).sqrt());

    let mut is_anchor = vec![false; m.vertex_count()];
    for &j in &junctions {
        is_anchor[j] = true;
    }
    for (_, b, path, closed) in &paths {
        let chosen = subsample(path, *closed, spacing, &edge_length);
        for &i in &chosen {
            is_anchor[path[i]] = true;
        }
        if *b == Side::Open {
            let length = arc_length(path, *closed, &edge_length);
            let tol = opts.open_tolerance * length;
            let mut stops = chosen.clone();
            if *closed {
                stops.push(path.len());
            }
            for w in stops.windows(2) {
                let stretch: Vec<usize> = (w[0]..=w[1]).map(|i| path[i % path.len()]).collect();
                for i in douglas_peucker(&stretch, tol, pos) {
                    is_anchor[stretch[i]] = true;
                }
            }
        }
    }

    // Region loops as full-resolution vertex cycles, region on the left.
    let mut cycles: Vec<Vec<Vec<usize>>> = Vec::with_capacity(labels.k);
    for r in 1..=labels.k as u32 {
        let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for f in labels.faces_of(r) {
            let t = m.triangles()[f];
            for k in 0..3 {
                let e = topo.face_edges[f][k];
                if side_of_edge.contains_key(&e) {
                    outgoing.entry(t[k]).or_default().push(t[(k + 1) % 3]);
                }
            }
        }
        if outgoing.is_empty() {
            return Err(Error::Abstraction(format!("region {r} has no border")));
        }
        for targets in outgoing.values_mut() {
            targets.sort_unstable();
        }
        let mut region_cycles = Vec::new();
        while let Some((&start, _)) = outgoing.iter().find(|(_, t)| !t.is_empty()) {
            let mut cycle = vec![start];
            let mut cur = start;
            loop {
                let Some(targets) = outgoing.get_mut(&cur) else {
                    break;
                };
                if targets.is_empty() {
                    break;
                }
                let next = targets.remove(0);
                if next == start {
                    break;
                }
                cycle.push(next);
                cur = next;
            }
            region_cycles.push(cycle);
        }
        cycles.push(region_cycles);
    }

    // Every loop needs three anchors: split its longest anchor-free stretch.
    for region_cycles in &cycles {
        for cycle in region_cycles {
            loop {
                let idx: Vec<usize> = (0..cycle.len()).filter(|&i| is_anchor[cycle[i]]).collect();
                if idx.len() >= 3 || idx.len() >= cycle.len() {
                    break;
                }
                let v = if idx.is_empty() {
                    cycle[0]
                } else {
                    longest_stretch_midpoint(cycle, &idx, &edge_length)
                };
                is_anchor[v] = true;
            }
        }
    }

    // Number anchors by vertex index.
    let mut anchor_id = vec![usize::MAX; m.vertex_count()];
    let mut anchors = Vec::new();
    for v in 0..m.vertex_count() {
        if is_anchor[v] {
            anchor_id[v] = anchors.len();
            let on_open = topo.boundary_vertex[v];
            let touches_zero = topo.vertex_faces(v).iter().any(|&f| labels.label(f) == 0);
            anchors.push(Anchor {
                position: pos[v],
                vertex: v,
                on_open_boundary: on_open,
                fixed: on_open || touches_zero,
            });
        }
    }

    let polylines: Vec<Polyline> = paths
        .into_iter()
        .map(|(a, b, path, closed)| {
            let length = arc_length(&path, closed, &edge_length);
            let anchors_on = path
                .iter()
                .filter(|&&v| is_anchor[v])
                .map(|&v| anchor_id[v])
                .collect();
            Polyline {
                a,
                b,
                vertices: path,
                anchors: anchors_on,
                closed,
                length,
            }
        })
        .collect();

    let adjacency = region_adjacency(m, labels)?;
    let boundaries: Vec<Boundary> = adjacency
        .boundaries
        .iter()
        .map(|(&(i, j), &length)| Boundary {
            regions: [i, j],
            length,
        })
        .collect();

    let mut regions = Vec::with_capacity(labels.k);
    for (i, region_cycles) in cycles.into_iter().enumerate() {
        let id = i as u32 + 1;
        let loops: Vec<Vec<usize>> = region_cycles
            .into_iter()
            .map(|c| {
                let mut l: Vec<usize> = c.iter().filter(|&&v| is_anchor[v]).map(|&v| anchor_id[v]).collect();
                let min_at = l
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &a)| a)
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                l.rotate_left(min_at);
                l
            })
            .collect();
        let mut initial = loop_initial(id, &loops, &anchors)?;
        let (plane_normal, plane_centroid) = full_plane(m, labels, id)?;
        initial.plane_normal = plane_normal;
        initial.plane_centroid = plane_centroid;
        regions.push(RegionLoops { id, loops, initial });
    }

    let border_edges = border_edges(&polylines, &anchors);
    let mean_edge_length = mean_border_length(&border_edges, &polylines, &anchors)?;
    log::debug!(
        "abstracted mesh: {} anchors ({} free), {} polylines, spacing {spacing:.4}",
        anchors.len(),
        anchors.iter().filter(|a| !a.fixed).count(),
        polylines.len()
    );
    Ok(AbstractedMesh {
        k: labels.k,
        anchors,
        polylines,
        regions,
        border_edges,
        boundaries,
        mean_edge_length,
    })
}

fn full_plane(m: &Mesh, labels: &RegionLabeling, r: u32) -> Result<(Vec3, Vec3)> {
    let mut normal = Vec3::zeros();
    let mut moment = Vec3::zeros();
    let mut area = 0.0;
    for f in labels.faces_of(r) {
        let a = m.face_area(f);
        let [p, q, s] = m.face_positions(f);
        normal += crate::geometry::triangle_cross(p, q, s);
        moment += m.face_centroid(f) * a;
        area += a;
    }
    if area <= 0.0 || normal.norm() == 0.0 {
        return Err(Error::Abstraction(format!("region {r} has no area")));
    }
    Ok((normal.normalize(), moment / area))
}

fn arc_length(path: &[usize], closed: bool, len: &impl Fn(usize, usize) -> f64) -> f64 {
    let mut total: f64 = path.windows(2).map(|w| len(w[0], w[1])).sum();
    if closed && path.len() > 1 {
        total += len(path[path.len() - 1], path[0]);
    }
    total
}

/// Indices into `path` of the anchors placed by arc-length subsampling,
/// always including the first vertex (and the last for open chains).
fn subsample(path: &[usize], closed: bool, spacing: f64, len: &impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let total = arc_length(path, closed, len);
    let min_segments = if closed { 3 } else { 1 };
    let segments = ((total / spacing).ceil() as usize).max(min_segments);
    let mut cumulative = vec![0.0];
    for w in path.windows(2) {
        cumulative.push(cumulative.last().unwrap() + len(w[0], w[1]));
    }
    let mut chosen = vec![0];
    let step = total / segments as f64;
    for s in 1..segments {
        let target = s as f64 * step;
        let i = cumulative
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if i > *chosen.last().unwrap() && (closed || i < path.len() - 1) {
            chosen.push(i);
        }
    }
    if !closed && path.len() > 1 {
        chosen.push(path.len() - 1);
    }
    chosen
}

/// Interior indices of `stretch` kept by Douglas-Peucker at tolerance `tol`.
fn douglas_peucker(stretch: &[usize], tol: f64, pos: &[Vec3]) -> Vec<usize> {
    let mut keep = Vec::new();
    let mut stack = vec![(0usize, stretch.len().saturating_sub(1))];
    while let Some((i, j)) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let (a, b) = (pos[stretch[i]], pos[stretch[j]]);
        let ab = b - a;
        let dist = |p: &Vec3| {
            let l2 = ab.norm_squared();
            if l2 == 0.0 {
                (p - a).norm()
            } else {
                let t = ((p - a).dot(&ab) / l2).clamp(0.0, 1.0);
                (p - (a + ab * t)).norm()
            }
        };
        let (far, d) = (i + 1..j)
            .map(|k| (k, dist(&pos[stretch[k]])))
            .fold((i, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if d > tol {
            keep.push(far);
            stack.push((i, far));
            stack.push((far, j));
        }
    }
    keep.sort_unstable();
    keep
}

/// Vertex at the arc-length midpoint of the longest stretch between
/// consecutive anchors of a cycle.
fn longest_stretch_midpoint(cycle: &[usize], anchor_idx: &[usize], len: &impl Fn(usize, usize) -> f64) -> usize {
    let n = cycle.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (k, &start) in anchor_idx.iter().enumerate() {
        let end = if k + 1 < anchor_idx.len() {
            anchor_idx[k + 1]
        } else {
            anchor_idx[0] + n
        };
        let stretch: Vec<usize> = (start..=end).map(|i| cycle[i % n]).collect();
        let l: f64 = stretch.windows(2).map(|w| len(w[0], w[1])).sum();
        if best.as_ref().is_none_or(|(bl, _)| l > *bl) {
            best = Some((l, stretch));
        }
    }
    let (total, stretch) = best.expect("at least one anchor");
    let mut acc = 0.0;
    let mut pick = stretch[stretch.len() / 2];
    let mut best_gap = f64::INFINITY;
    for w in 0..stretch.len() - 1 {
        acc += len(stretch[w], stretch[w + 1]);
        let gap = (acc - total / 2.0).abs();
        if w + 1 < stretch.len() - 1 && gap < best_gap {
            best_gap = gap;
            pick = stretch[w + 1];
        }
    }
    pick
}

/// Display triangulation of the abstracted regions.
#[derive(Debug, Clone)]
pub struct RegionTriangulation {
    pub mesh: Mesh,
    /// Region of each output triangle.
    pub face_regions: Vec<u32>,
    /// Regions whose projected loops self-intersect and were fanned about
    /// an added centroid vertex instead.
    pub fallback_regions: Vec<u32>,
}

/// Triangulates every region loop in its proxy plane. Vertices are the
/// anchors at `positions`, followed by one centroid vertex per fallback
/// region.
pub fn triangulate_regions(a: &AbstractedMesh, positions: &[Vec3]) -> Result<RegionTriangulation> {
    let mut vertices = positions.to_vec();
    let mut triangles = Vec::new();
    let mut face_regions = Vec::new();
    let mut fallback_regions = Vec::new();
    for region in &a.regions {
        let loops = a.loop_positions(region.id, positions);
        let n = proxy_normal_loops(&loops).unwrap_or(region.initial.normal);
        let u = least_aligned_axis(&n).cross(&n).normalize();
        let v = n.cross(&u);
        let project = |p: &Vec3| [p.dot(&u), p.dot(&v)];
        let flat: Vec<Vec<[f64; 2]>> = loops.iter().map(|l| l.iter().map(project).collect()).collect();

        let simple = !self_intersects(&flat);
        let mut region_tris: Vec<[usize; 3]> = Vec::new();
        if simple {
            // Outer loop: largest positive projected area; the rest are holes.
            let areas: Vec<f64> = flat.iter().map(|l| signed_area(l)).collect();
            let outer = (0..flat.len())
                .max_by(|&i, &j| areas[i].total_cmp(&areas[j]))
                .unwrap_or(0);
            let order: Vec<usize> = std::iter::once(outer)
                .chain((0..flat.len()).filter(|&i| i != outer))
                .collect();
            let mut coords = Vec::new();
            let mut holes = Vec::new();
            let mut ids = Vec::new();
            for (k, &li) in order.iter().enumerate() {
                if k > 0 {
                    holes.push(ids.len());
                }
                for (p, &anchor) in flat[li].iter().zip(&region.loops[li]) {
                    coords.extend_from_slice(p);
                    ids.push(anchor);
                }
            }
            let tri = earcutr::earcut(&coords, &holes, 2)
                .map_err(|e| Error::Abstraction(format!("triangulation of region {} failed: {e:?}", region.id)))?;
            for t in tri.chunks(3) {
                let (p, q, s) = (t[0], t[1], t[2]);
                let pp = [coords[2 * p], coords[2 * p + 1]];
                let qq = [coords[2 * q], coords[2 * q + 1]];
                let ss = [coords[2 * s], coords[2 * s + 1]];
                if signed_area(&[pp, qq, ss]) >= 0.0 {
                    region_tris.push([ids[p], ids[q], ids[s]]);
                } else {
                    region_tris.push([ids[p], ids[s], ids[q]]);
                }
            }
        }
        if !simple || region_tris.is_empty() {
            fallback_regions.push(region.id);
            region_tris.clear();
            let all: Vec<Vec3> = loops.iter().flatten().copied().collect();
            let center = all.iter().sum::<Vec3>() / all.len() as f64;
            let c = vertices.len();
            vertices.push(center);
            for l in &region.loops {
                for k in 0..l.len() {
                    region_tris.push([c, l[k], l[(k + 1) % l.len()]]);
                }
            }
        }
        face_regions.extend(std::iter::repeat_n(region.id, region_tris.len()));
        triangles.extend(region_tris);
    }
    Ok(RegionTriangulation {
        mesh: Mesh::new(vertices, triangles)?,
        face_regions,
        fallback_regions,
    })
}

fn signed_area(l: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for k in 0..l.len() {
        let (p, q) = (l[k], l[(k + 1) % l.len()]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Whether any two non-adjacent loop edges cross.
fn self_intersects(loops: &[Vec<[f64; 2]>]) -> bool {
    let mut segs = Vec::new();
    for (li, l) in loops.iter().enumerate() {
        for k in 0..l.len() {
            segs.push((li, k, l[k], l[(k + 1) % l.len()], l.len()));
        }
    }
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (li, ki, a, b, n) = segs[i];
            let (lj, kj, c, d, _) = segs[j];
            if li == lj && (kj == ki + 1 || (ki == 0 && kj == n - 1)) {
                continue;
            }
            let (d1, d2) = (orient(a, b, c), orient(a, b, d));
            let (d3, d4) = (orient(c, d, a), orient(c, d, b));
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return true;
            }
        }
    }
    false
}
