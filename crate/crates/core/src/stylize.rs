//! Style and regularization residuals over the abstracted mesh and their
//! minimization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abstraction::AbstractedMesh;
use crate::diffusion::{boundary_key, BoundaryKey};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lm::{levenberg_marquardt, ColumnJacobian, LeastSquares, LmOptions, Termination};
use crate::metrics::LanteriKind;
use crate::proxy::{fan_measure, proxy_normal_loops, PlaneProxy};
use crate::transform::{region_transform_onto, Affine};

pub const MAX_LAMBDA_D: f64 = 3.0;
pub const DEFAULT_SMOOTHING: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub regions: [u32; 2],
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionValue {
    pub region: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleParams {
    pub lambda_d: f64,
    pub lambda_f: f64,
    pub lambda_a: f64,
    pub lambda_e: f64,
    pub lambda_v: f64,
    pub lambda_n: f64,
    /// Planarization for regions without their own value.
    pub mu: f64,
    /// Smoothing scale for boundaries without their own value.
    pub smoothing: f64,
    pub lanteri: bool,
    /// Per-boundary exaggeration scales `s_ij` (default 1).
    pub edge_scales: Vec<PairValue>,
    pub edge_smoothing: Vec<PairValue>,
    pub region_mu: Vec<RegionValue>,
}

impl Default for StyleParams {
    fn default() -> Self {
        StyleParams {
            lambda_d: 0.0,
            lambda_f: 1.0,
            lambda_a: 10.0,
            lambda_e: 4.0,
            lambda_v: 60.0,
            lambda_n: 1.0,
            mu: 0.0,
            smoothing: DEFAULT_SMOOTHING,
            lanteri: true,
            edge_scales: Vec::new(),
            edge_smoothing: Vec::new(),
            region_mu: Vec::new(),
        }
    }
}

fn upsert_pair(list: &mut Vec<PairValue>, i: u32, j: u32, value: f64) {
    let (a, b) = boundary_key(i, j);
    match list.binary_search_by_key(&(a, b), |p| (p.regions[0], p.regions[1])) {
        Ok(k) => list[k].value = value,
        Err(k) => list.insert(k, PairValue { regions: [a, b], value }),
    }
}

fn lookup_pair(list: &[PairValue], i: u32, j: u32) -> Option<f64> {
    let key = boundary_key(i, j);
    list.iter()
        .find(|p| boundary_key(p.regions[0], p.regions[1]) == key)
        .map(|p| p.value)
}

impl StyleParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Error::InvalidArgument(format!("{what} = {v} is out of range"));
        if !(0.0..MAX_LAMBDA_D).contains(&self.lambda_d) {
            return Err(bad("lambda_d", self.lambda_d));
        }
        for (name, v) in [
            ("lambda_f", self.lambda_f),
            ("lambda_a", self.lambda_a),
            ("lambda_e", self.lambda_e),
            ("lambda_v", self.lambda_v),
            ("lambda_n", self.lambda_n),
            ("smoothing", self.smoothing),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(name, v));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(bad("mu", self.mu));
        }
        for p in self.edge_scales.iter().chain(&self.edge_smoothing) {
            if p.regions[0] == p.regions[1] {
                return Err(Error::InvalidArgument(format!("boundary ({0}, {0}) is not a region pair", p.regions[0])));
            }
            if !(p.value.is_finite() && p.value >= 0.0) {
                return Err(bad("boundary value", p.value));
            }
        }
        for r in &self.region_mu {
            if !(0.0..=1.0).contains(&r.value) {
                return Err(bad("region mu", r.value));
            }
        }
        Ok(())
    }

    pub fn edge_scale(&self, i: u32, j: u32) -> f64 {
        lookup_pair(&self.edge_scales, i, j).unwrap_or(1.0)
    }

    pub fn set_edge_scale(&mut self, i: u32, j: u32, s: f64) {
        upsert_pair(&mut self.edge_scales, i, j, s);
    }

    pub fn edge_smoothing(&self, i: u32, j: u32) -> f64 {
        lookup_pair(&self.edge_smoothing, i, j).unwrap_or(self.smoothing)
    }

    pub fn set_edge_smoothing(&mut self, i: u32, j: u32, s: f64) {
        upsert_pair(&mut self.edge_smoothing, i, j, s);
    }

    pub fn region_mu(&self, r: u32) -> f64 {
        self.region_mu
            .iter()
            .find(|v| v.region == r)
            .map_or(self.mu, |v| v.value)
    }

    pub fn set_region_mu(&mut self, r: u32, mu: f64) {
        match self.region_mu.binary_search_by_key(&r, |v| v.region) {
            Ok(k) => self.region_mu[k].value = mu,
            Err(k) => self.region_mu.insert(k, RegionValue { region: r, value: mu }),
        }
    }

    /// Smoothing scale of every listed boundary.
    pub fn smoothing_values(&self, boundaries: &[BoundaryKey]) -> BTreeMap<BoundaryKey, f64> {
        boundaries
            .iter()
            .map(|&(i, j)| ((i, j), self.edge_smoothing(i, j)))
            .collect()
    }
}

/// Boundary length between optimized regions over the mean such length.
pub fn default_edge_weights(a: &AbstractedMesh) -> BTreeMap<BoundaryKey, f64> {
    let pairs: Vec<_> = a.style_boundaries().collect();
    if pairs.is_empty() {
        return BTreeMap::new();
    }
    let mean = pairs.iter().map(|b| b.length).sum::<f64>() / pairs.len() as f64;
    pairs
        .iter()
        .map(|b| ((b.regions[0], b.regions[1]), b.length / mean))
        .collect()
}

/// Default weights scaled by the per-boundary user scales.
pub fn edge_weights(a: &AbstractedMesh, params: &StyleParams) -> BTreeMap<BoundaryKey, f64> {
    default_edge_weights(a)
        .into_iter()
        .map(|((i, j), w)| ((i, j), w * params.edge_scale(i, j)))
        .collect()
}

/// A Lanteri constraint bound to rest positions and skinning weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LanteriTerm {
    pub kind: LanteriKind,
    pub points: Vec<Vec3>,
    /// Region weights of each point, frozen for one optimization.
    pub weights: Vec<Vec<(u32, f64)>>,
}

impl LanteriTerm {
    pub fn new(kind: LanteriKind, points: Vec<Vec3>, weights: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let expected = if kind == LanteriKind::AbsolutePosition { 1 } else { 2 };
        if points.len() != expected || weights.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} constraint needs {expected} landmarks, got {}",
                points.len()
            )));
        }
        if expected == 2 && (points[0] - points[1]).norm() == 0.0 {
            return Err(Error::DegenerateLandmarks("coincident landmark pair".into()));
        }
        Ok(LanteriTerm { kind, points, weights })
    }

    fn rows(&self) -> usize {
        match self.kind {
            LanteriKind::RelativeDistance => 1,
            _ => 3,
        }
    }

    fn touches(&self, r: u32) -> bool {
        self.weights.iter().flatten().any(|&(q, _)| q == r)
    }
}

/// Displacement `T(p)p − p` of a point under blended region transforms,
/// written as `Σ w_r (T_r p − p)`.
pub fn blended_displacement(p: &Vec3, weights: &[(u32, f64)], transforms: &[Affine]) -> Vec3 {
    weights
        .iter()
        .filter(|&&(r, _)| r != 0)
        .map(|&(r, w)| (transforms[r as usize].apply(p) - p) * w)
        .sum()
}

/// Lanteri residuals of one term under the given transforms (index 0 is
/// the identity of the fixed region).
pub fn lanteri_residuals(term: &LanteriTerm, transforms: &[Affine], lambda_v: f64, ebar: f64, out: &mut [f64]) {
    let d: Vec<Vec3> = term
        .points
        .iter()
        .zip(&term.weights)
        .map(|(p, w)| blended_displacement(p, w, transforms))
        .collect();
    match term.kind {
        LanteriKind::AbsolutePosition => {
            let r = d[0] * (lambda_v / (2.0 * ebar * ebar)).sqrt();
            out[..3].copy_from_slice(r.as_slice());
        }
        LanteriKind::RelativePosition => {
            let rest = term.points[0] - term.points[1];
            let r = (d[0] - d[1]) * ((lambda_v / 2.0).sqrt() / rest.norm());
            out[..3].copy_from_slice(r.as_slice());
        }
        LanteriKind::RelativeDistance => {
            let rest = term.points[0] - term.points[1];
            let now = rest + d[0] - d[1];
            out[0] = (lambda_v / 2.0).sqrt() * (now.norm() - rest.norm()) / rest.norm();
        }
    }
}

/// Current geometry of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionState {
    pub normal: Vec3,
    pub centroid: Vec3,
    pub area: f64,
    /// The loops enclosed no area; the normal fell back to its rest value.
    pub degenerate: bool,
    pub transform: Affine,
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Style { pair: usize },
    Region { region: u32 },
    Edge { edge: usize },
    Vertex { anchor: usize },
    Lanteri { term: usize },
}

/// The least-squares system over the free anchor coordinates.
pub struct StyleProblem<'a> {
    mesh: &'a AbstractedMesh,
    lanteri: &'a [LanteriTerm],
    params: StyleParams,
    pairs: Vec<(u32, u32, f64)>,
    fixed_positions: Vec<Vec3>,
    free: Vec<usize>,
    anchor_regions: Vec<Vec<u32>>,
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    anchor_blocks: Vec<Vec<usize>>,
    rows: usize,
    before: Vec<PlaneProxy>,
    planes: Vec<PlaneProxy>,
    mus: Vec<f64>,
    fd_step: f64,
}

impl<'a> StyleProblem<'a> {
    pub fn new(mesh: &'a AbstractedMesh, params: &StyleParams, lanteri: &'a [LanteriTerm]) -> Result<Self> {
        params.validate()?;
        let lanteri: &'a [LanteriTerm] = if params.lanteri { lanteri } else { &[] };
        let pairs: Vec<(u32, u32, f64)> = edge_weights(mesh, params)
            .into_iter()
            .map(|((i, j), w)| (i, j, w))
            .collect();
        let free: Vec<usize> = (0..mesh.anchors.len()).filter(|&i| !mesh.anchors[i].fixed).collect();
        let mut anchor_regions: Vec<Vec<u32>> = vec![Vec::new(); mesh.anchors.len()];
        for r in &mesh.regions {
            for &a in r.loops.iter().flatten() {
                if anchor_regions[a].last() != Some(&r.id) {
                    anchor_regions[a].push(r.id);
                }
            }
        }
        for list in &mut anchor_regions {
            list.sort_unstable();
            list.dedup();
        }

        let mut blocks = Vec::new();
        blocks.extend((0..pairs.len()).map(|pair| Block::Style { pair }));
        blocks.extend(mesh.regions.iter().map(|r| Block::Region { region: r.id }));
        blocks.extend((0..mesh.border_edges.len()).map(|edge| Block::Edge { edge }));
        blocks.extend(free.iter().map(|&anchor| Block::Vertex { anchor }));
        blocks.extend((0..lanteri.len()).map(|term| Block::Lanteri { term }));
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            let len = match *b {
                Block::Style { .. } | Block::Edge { .. } => 1,
                Block::Region { region } => mesh.region(region).loops.iter().map(Vec::len).sum::<usize>() + 4,
                Block::Vertex { .. } => 3,
                Block::Lanteri { term } => lanteri[term].rows(),
            };
            offsets.push(offsets.last().unwrap() + len);
        }
        let rows = *offsets.last().unwrap();

        let mut anchor_blocks: Vec<Vec<usize>> = vec![Vec::new(); mesh.anchors.len()];
        for (k, b) in blocks.iter().enumerate() {
            let hit: Vec<usize> = match *b {
                Block::Style { pair } => {
                    let (i, j, _) = pairs[pair];
                    (0..mesh.anchors.len())
                        .filter(|&a| anchor_regions[a].iter().any(|&r| r == i || r == j))
                        .collect()
                }
                Block::Region { region } => {
                    let mut v: Vec<usize> = mesh.region(region).loops.iter().flatten().copied().collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                }
                Block::Edge { edge } => vec![mesh.border_edges[edge].a, mesh.border_edges[edge].b],
                Block::Vertex { anchor } => vec![anchor],
                Block::Lanteri { term } => (0..mesh.anchors.len())
                    .filter(|&a| anchor_regions[a].iter().any(|&r| lanteri[term].touches(r)))
                    .collect(),
            };
            for a in hit {
                anchor_blocks[a].push(k);
            }
        }

        let mus = mesh.regions.iter().map(|r| params.region_mu(r.id)).collect();
        Ok(StyleProblem {
            mesh,
            lanteri,
            params: params.clone(),
            pairs,
            fixed_positions: mesh.rest_positions(),
            free,
            anchor_regions,
            blocks,
            offsets,
            anchor_blocks,
            rows,
            before: mesh.initial_proxies(),
            planes: mesh.full_planes(),
            mus,
            fd_step: 1e-6 * mesh.mean_edge_length,
        })
    }

    pub fn free_anchors(&self) -> &[usize] {
        &self.free
    }

    /// Free coordinates of a full anchor position list.
    pub fn pack(&self, positions: &[Vec3]) -> Vec<f64> {
        self.free.iter().flat_map(|&a| positions[a].iter().copied()).collect()
    }

    /// Full anchor positions with the free ones taken from `x`.
    pub fn unpack(&self, x: &[f64]) -> Vec<Vec3> {
        let mut p = self.fixed_positions.clone();
        for (k, &a) in self.free.iter().enumerate() {
            p[a] = Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        }
        p
    }

    fn region_state(&self, r: u32, positions: &[Vec3]) -> RegionState {
        let region = self.mesh.region(r);
        let loops = self.mesh.loop_positions(r, positions);
        let (normal, degenerate) = match proxy_normal_loops(&loops) {
            Some(n) => (n, false),
            None => (region.initial.normal, true),
        };
        let fan = fan_measure(&loops, &normal);
        let idx = r as usize - 1;
        let transform = if self.lanteri.is_empty() {
            Affine::identity()
        } else {
            let after = PlaneProxy {
                region: r,
                normal,
                centroid: fan.centroid,
            };
            region_transform_onto(&self.planes[idx], &self.before[idx], &after, self.mus[idx])
        };
        RegionState {
            normal,
            centroid: fan.centroid,
            area: fan.area,
            degenerate: degenerate || fan.degenerate,
            transform,
        }
    }

    pub fn region_states(&self, positions: &[Vec3]) -> Vec<RegionState> {
        self.mesh
            .regions
            .iter()
            .map(|r| self.region_state(r.id, positions))
            .collect()
    }

    fn transforms(&self, states: &[RegionState]) -> Vec<Affine> {
        std::iter::once(Affine::identity())
            .chain(states.iter().map(|s| s.transform))
            .collect()
    }

    fn eval_block(&self, b: Block, pos: &[Vec3], states: &[RegionState], transforms: &[Affine], out: &mut [f64]) {
        let p = &self.params;
        match b {
            Block::Style { pair } => {
                let (i, j, w) = self.pairs[pair];
                let sum = states[i as usize - 1].normal + states[j as usize - 1].normal;
                out[0] = (p.lambda_d * w / 2.0).sqrt() * sum.norm();
            }
            Block::Region { region } => {
                let s = &states[region as usize - 1];
                let init = &self.mesh.region(region).initial;
                let mut k = 0;
                let sf = p.lambda_f.sqrt();
                for &a in self.mesh.region(region).loops.iter().flatten() {
                    out[k] = sf * s.normal.dot(&(s.centroid - pos[a]));
                    k += 1;
                }
                out[k] = p.lambda_a.sqrt() * (1.0 - s.area / init.area);
                let dn = (s.normal - init.normal) * (p.lambda_n / 2.0).sqrt();
                out[k + 1..k + 4].copy_from_slice(dn.as_slice());
            }
            Block::Edge { edge } => {
                let e = &self.mesh.border_edges[edge];
                out[0] = p.lambda_e.sqrt() * (1.0 - (pos[e.a] - pos[e.b]).norm() / e.rest_length);
            }
            Block::Vertex { anchor } => {
                let ebar = self.mesh.mean_edge_length;
                let d = (pos[anchor] - self.mesh.anchors[anchor].position) * (p.lambda_v / (2.0 * ebar * ebar)).sqrt();
                out[..3].copy_from_slice(d.as_slice());
            }
            Block::Lanteri { term } => {
                lanteri_residuals(&self.lanteri[term], transforms, p.lambda_v, self.mesh.mean_edge_length, out);
            }
        }
    }

    fn eval_all(&self, pos: &[Vec3], out: &mut [f64]) -> Vec<RegionState> {
        let states = self.region_states(pos);
        let transforms = self.transforms(&states);
        for (k, &b) in self.blocks.iter().enumerate() {
            self.eval_block(b, pos, &states, &transforms, &mut out[self.offsets[k]..self.offsets[k + 1]]);
        }
        states
    }

    /// Residual vector at the given anchor positions.
    pub fn residuals_at(&self, positions: &[Vec3]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.eval_all(positions, &mut out);
        out
    }

    /// Total energy `Σ r²` at the given anchor positions.
    pub fn energy_at(&self, positions: &[Vec3]) -> f64 {
        self.residuals_at(positions).iter().map(|r| r * r).sum()
    }

    /// Energy split by term: style, flatness, area, edge, vertex, normal,
    /// Lanteri.
    pub fn energy_terms(&self, positions: &[Vec3]) -> EnergyTerms {
        let r = self.residuals_at(positions);
        let sq = |a: usize, b: usize| r[a..b].iter().map(|v| v * v).sum::<f64>();
        let mut t = EnergyTerms::default();
        for (k, &b) in self.blocks.iter().enumerate() {
            let (lo, hi) = (self.offsets[k], self.offsets[k + 1]);
            match b {
                Block::Style { .. } => t.style += sq(lo, hi),
                Block::Region { .. } => {
                    t.flatness += sq(lo, hi - 4);
                    t.area += sq(hi - 4, hi - 3);
                    t.normal += sq(hi - 3, hi);
                }
                Block::Edge { .. } => t.edge += sq(lo, hi),
                Block::Vertex { .. } => t.vertex += sq(lo, hi),
                Block::Lanteri { .. } => t.lanteri += sq(lo, hi),
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub style: f64,
    pub flatness: f64,
    pub area: f64,
    pub edge: f64,
    pub vertex: f64,
    pub normal: f64,
    pub lanteri: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.style + self.flatness + self.area + self.edge + self.vertex + self.normal + self.lanteri
    }
}

impl LeastSquares for StyleProblem<'_> {
    fn parameter_count(&self) -> usize {
        3 * self.free.len()
    }

    fn residual_count(&self) -> usize {
        self.rows
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        self.eval_all(&self.unpack(x), out);
    }

    fn step(&self, _j: usize) -> f64 {
        self.fd_step
    }

    /// Forward differences that re-evaluate only the blocks touched by
    /// the perturbed anchor.
    fn jacobian(&self, x: &[f64], r: &[f64]) -> ColumnJacobian {
        let mut pos = self.unpack(x);
        let mut states = self.region_states(&pos);
        let mut transforms = self.transforms(&states);
        let h = self.fd_step;
        let mut buf = Vec::new();
        let mut columns = Vec::with_capacity(x.len());
        for (k, &a) in self.free.iter().enumerate() {
            for d in 0..3 {
                let old = pos[a][d];
                pos[a][d] = old + h;
                let saved: Vec<(u32, RegionState)> = self.anchor_regions[a]
                    .iter()
                    .map(|&rid| {
                        let i = rid as usize - 1;
                        let prev = states[i];
                        states[i] = self.region_state(rid, &pos);
                        transforms[rid as usize] = states[i].transform;
                        (rid, prev)
                    })
                    .collect();
                let mut col = Vec::new();
                for &bk in &self.anchor_blocks[a] {
                    let (lo, hi) = (self.offsets[bk], self.offsets[bk + 1]);
                    buf.resize(hi - lo, 0.0);
                    self.eval_block(self.blocks[bk], &pos, &states, &transforms, &mut buf);
                    for (i, &v) in buf.iter().enumerate() {
                        let dv = (v - r[lo + i]) / h;
                        if dv != 0.0 {
                            col.push((lo + i, dv));
                        }
                    }
                }
                col.sort_unstable_by_key(|e| e.0);
                for (rid, prev) in saved {
                    states[rid as usize - 1] = prev;
                    transforms[rid as usize] = prev.transform;
                }
                pos[a][d] = old;
                debug_assert_eq!(columns.len(), 3 * k + d);
                columns.push(col);
            }
        }
        ColumnJacobian {
            rows: self.rows,
            columns,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeOptions {
    pub lm: LmOptions,
    /// Anchor positions to start from instead of the rest positions.
    pub start: Option<Vec<Vec3>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationState {
    pub positions: Vec<Vec3>,
    pub proxies: Vec<PlaneProxy>,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub damping: f64,
    pub degenerate_regions: Vec<u32>,
}

impl OptimizationState {
    pub fn energy(&self) -> f64 {
        *self.energy_trace.last().unwrap_or(&0.0)
    }

    /// The untouched rest state.
    pub fn rest(a: &AbstractedMesh) -> Self {
        OptimizationState {
            positions: a.rest_positions(),
            proxies: a.initial_proxies(),
            energy_trace: Vec::new(),
            iterations: 0,
            termination: Termination::ZeroEnergy,
            damping: LmOptions::default().initial_damping,
            degenerate_regions: Vec::new(),
        }
    }
}

/// Minimizes style plus regularization energy over the free anchors.
pub fn optimize(
    a: &AbstractedMesh,
    params: &StyleParams,
    lanteri: &[LanteriTerm],
    opts: &OptimizeOptions,
) -> Result<OptimizationState> {
    let problem = StyleProblem::new(a, params, lanteri)?;
    let start = match &opts.start {
        Some(s) if s.len() == a.anchors.len() => s.clone(),
        Some(s) => {
            return Err(Error::InvalidArgument(format!(
                "warm start has {} anchors, expected {}",
                s.len(),
                a.anchors.len()
            )))
        }
        None => a.rest_positions(),
    };
    let x0 = problem.pack(&start);
    let report = levenberg_marquardt(&problem, &x0, &opts.lm)?;
    let positions = problem.unpack(&report.x);
    let states = problem.region_states(&positions);
    log::debug!(
        "optimize: {} iterations, energy {:.6e} -> {:.6e}, {:?}",
        report.iterations,
        report.energy_trace[0],
        report.energy(),
        report.termination
    );
    Ok(OptimizationState {
        proxies: a
            .regions
            .iter()
            .zip(&states)
            .map(|(r, s)| PlaneProxy {
                region: r.id,
                normal: s.normal,
                centroid: s.centroid,
            })
            .collect(),
        degenerate_regions: a
            .regions
            .iter()
            .zip(&states)
            .filter(|(_, s)| s.degenerate)
            .map(|(r, _)| r.id)
            .collect(),
        positions,
        energy_trace: report.energy_trace,
        iterations: report.iterations,
        termination: report.termination,
        damping: report.damping,
    })
}

/// Per-region transforms `T_0 = I, T_1..T_K` taking the rest proxies to
/// the given ones.
pub fn region_transforms(a: &AbstractedMesh, proxies: &[PlaneProxy], params: &StyleParams) -> Vec<Affine> {
    let before = a.initial_proxies();
    let planes = a.full_planes();
    std::iter::once(Affine::identity())
        .chain(a.regions.iter().enumerate().map(|(i, r)| {
            region_transform_onto(&planes[i], &before[i], &proxies[i], params.region_mu(r.id))
        }))
        .collect()
}
