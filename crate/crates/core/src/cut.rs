//! Cut-cell integration mesh. Each union cell is split along its
//! `(0,0)-(1,1)` diagonal and the two triangles are cut by every level set
//! in turn (marching triangles with linear edge interpolation). The sign
//! pattern of each resulting triangle selects its phase.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::levelset::Geometry;
use crate::polytree::CellKey;
use crate::union::UnionMesh;

/// Relative distance below which a vertex counts as lying on a contour.
pub const SNAP_TOL: f64 = 1e-10;
/// Samples per cell edge in the resolution check.
const EDGE_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left = 0,
    Right = 1,
    Bottom = 2,
    Top = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    /// Coordinate index running along the side.
    pub fn along(self) -> usize {
        match self {
            Side::Left | Side::Right => 1,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    pub fn from_name(s: &str) -> Option<Side> {
        Side::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct Tri {
    pub v: [[f64; 2]; 3],
    pub phase: usize,
    /// Global subphase id.
    pub sub: usize,
}

impl Tri {
    pub fn area(&self) -> f64 {
        let [a, b, c] = self.v;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn map(&self, r: [f64; 2]) -> [f64; 2] {
        let [a, b, c] = self.v;
        [a[0] + r[0] * (b[0] - a[0]) + r[1] * (c[0] - a[0]), a[1] + r[0] * (b[1] - a[1]) + r[1] * (c[1] - a[1])]
    }

    /// Smallest barycentric coordinate of `x` (negative outside).
    pub fn min_barycentric(&self, x: [f64; 2]) -> f64 {
        let [a, b, c] = self.v;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        l1.min(l2).min(1.0 - l1 - l2)
    }
}

/// Connected same-phase region of one union cell.
#[derive(Debug, Clone)]
pub struct Subphase {
    pub cell: usize,
    pub phase: usize,
    pub area: f64,
    pub tris: Vec<usize>,
}

/// Piece of a cell side covered by one subphase, as an interval of the
/// coordinate running along the side.
#[derive(Debug, Clone, Copy)]
pub struct Trace {
    pub t: [f64; 2],
    pub sub: usize,
}

#[derive(Debug, Clone)]
pub struct CellCut {
    pub subphases: Vec<usize>,
    pub tris: std::ops::Range<usize>,
    /// Phase of a cell without any contour inside.
    pub uncut_phase: Option<usize>,
    pub traces: [Vec<Trace>; 4],
}

impl CellCut {
    pub fn has_interface(&self) -> bool {
        self.uncut_phase.is_none()
    }
}

/// Segment between two phases. `normal` points out of `sub_m`, and
/// `phase_m < phase_n`. `sub_m` lies in `cell` and `sub_n` in `cell_n`;
/// the two differ only when the segment runs along a cell facet.
#[derive(Debug, Clone)]
pub struct InterfaceSeg {
    pub cell: usize,
    pub cell_n: usize,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub normal: [f64; 2],
    pub sub_m: usize,
    pub sub_n: usize,
    pub phase_m: usize,
    pub phase_n: usize,
}

/// Piece of the outer mesh boundary.
#[derive(Debug, Clone)]
pub struct BoundarySeg {
    pub cell: usize,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub normal: [f64; 2],
    pub sub: usize,
    pub phase: usize,
    pub side: Side,
}

pub fn seg_length(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Interior facet between two union cells. `minus` lies on the low side
/// along `axis`; `range` is the extent of the smaller of the two sides.
#[derive(Debug, Clone)]
pub struct CellFacet {
    pub minus: usize,
    pub plus: usize,
    pub axis: usize,
    pub pos: f64,
    pub range: [f64; 2],
    /// Same-phase subphase pairs `(minus side, plus side)` whose traces
    /// overlap with positive length.
    pub pairs: Vec<(usize, usize)>,
}

impl CellFacet {
    pub fn length(&self) -> f64 {
        self.range[1] - self.range[0]
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        let s = self.range[0] + t * (self.range[1] - self.range[0]);
        if self.axis == 0 {
            [self.pos, s]
        } else {
            [s, self.pos]
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegrationMesh {
    pub n_phases: usize,
    pub tris: Vec<Tri>,
    pub subphases: Vec<Subphase>,
    pub cells: Vec<CellCut>,
    pub interfaces: Vec<InterfaceSeg>,
    pub boundary: Vec<BoundarySeg>,
    pub facets: Vec<CellFacet>,
}

#[derive(Debug, Clone, Default)]
pub struct PhaseMeasures {
    pub area: Vec<f64>,
    /// `(m, n, length)` with `m < n`.
    pub interface: Vec<(usize, usize, f64)>,
}

struct LocalCut {
    tris: Vec<([[f64; 2]; 3], usize)>,
    uncut_phase: Option<usize>,
    /// local subphase per triangle, then subphase phases
    tri_sub: Vec<usize>,
    sub_phase: Vec<usize>,
    interfaces: Vec<([f64; 2], [f64; 2], [f64; 2], usize, usize)>,
    traces: [Vec<([f64; 2], usize)>; 4],
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn sign(v: f64, tol: f64) -> i8 {
    if v.abs() <= tol {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

fn check_resolution(geom: &Geometry, lo: [f64; 2], h: [f64; 2], key: CellKey) -> Result<()> {
    let tol = SNAP_TOL * h[0].min(h[1]);
    let corners = [lo, [lo[0] + h[0], lo[1]], [lo[0] + h[0], lo[1] + h[1]], [lo[0], lo[1] + h[1]]];
    for (k, ls) in geom.level_sets.iter().enumerate() {
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            let mut changes = 0;
            let mut last = 0i8;
            for s in 0..=EDGE_SAMPLES {
                let t = s as f64 / EDGE_SAMPLES as f64;
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let sg = sign(ls.value(x), tol);
                if sg != 0 {
                    if last != 0 && sg != last {
                        changes += 1;
                    }
                    last = sg;
                }
            }
            if changes > 1 {
                return Err(Error::GeometryResolution(format!(
                    "level set {k} changes sign {changes} times along an edge of cell {key:?}"
                )));
            }
        }
    }
    Ok(())
}

fn cut_cell(geom: &Geometry, lo: [f64; 2], h: [f64; 2]) -> LocalCut {
    let nk = geom.level_sets.len();
    let tol = SNAP_TOL * h[0].min(h[1]);
    let hi = [lo[0] + h[0], lo[1] + h[1]];
    let mut verts: Vec<[f64; 2]> = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let eval = |x: [f64; 2]| -> Vec<f64> { geom.level_sets.iter().map(|l| l.value(x)).collect() };
    let mut vals: Vec<Vec<f64>> = verts.iter().map(|v| eval(*v)).collect();
    let mut tris: Vec<([usize; 3], u32)> = vec![([0, 1, 2], 0), ([0, 2, 3], 0)];
    for k in 0..nk {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() + 4);
        for (t, bits) in tris {
            let s: [i8; 3] = [sign(vals[t[0]][k], tol), sign(vals[t[1]][k], tol), sign(vals[t[2]][k], tol)];
            let has_pos = s.contains(&1);
            let has_neg = s.contains(&-1);
            if !(has_pos && has_neg) {
                let b = if has_pos { bits | (1 << k) } else { bits };
                next.push((t, b));
                continue;
            }
            let mut cut = |a: usize, b: usize| -> usize {
                let key = (a.min(b), a.max(b));
                if let Some(&v) = cache.get(&key) {
                    return v;
                }
                let (p, q) = key;
                let (fp, fq) = (vals[p][k], vals[q][k]);
                let r = fp / (fp - fq);
                let x = [verts[p][0] + r * (verts[q][0] - verts[p][0]), verts[p][1] + r * (verts[q][1] - verts[p][1])];
                verts.push(x);
                let mut vv = eval(x);
                vv[k] = 0.0;
                vals.push(vv);
                cache.insert(key, verts.len() - 1);
                verts.len() - 1
            };
            let side_bits = |sg: i8| if sg > 0 { bits | (1 << k) } else { bits };
            if let Some(z) = (0..3).find(|&i| s[i] == 0) {
                // contour through vertex z and across the opposite edge
                let (a, b) = (t[(z + 1) % 3], t[(z + 2) % 3]);
                let p = cut(a, b);
                next.push(([t[z], a, p], side_bits(s[(z + 1) % 3])));
                next.push(([t[z], p, b], side_bits(s[(z + 2) % 3])));
            } else {
                let l = (0..3).find(|&i| s[i] != s[(i + 1) % 3] && s[i] != s[(i + 2) % 3]).unwrap();
                let (a, b) = (t[(l + 1) % 3], t[(l + 2) % 3]);
                let p = cut(t[l], a);
                let q = cut(t[l], b);
                next.push(([t[l], p, q], side_bits(s[l])));
                let o = side_bits(s[(l + 1) % 3]);
                next.push(([p, a, b], o));
                next.push(([p, b, q], o));
            }
        }
        tris = next;
    }
    let phases: Vec<usize> = tris.iter().map(|(_, b)| geom.phase_of_bits[*b as usize]).collect();
    let on_side = |x: [f64; 2], s: Side| -> bool {
        let e = 1e-12 * h[0].max(h[1]);
        match s {
            Side::Left => (x[0] - lo[0]).abs() <= e,
            Side::Right => (x[0] - hi[0]).abs() <= e,
            Side::Bottom => (x[1] - lo[1]).abs() <= e,
            Side::Top => (x[1] - hi[1]).abs() <= e,
        }
    };
    if phases.iter().all(|&p| p == phases[0]) {
        let ph = phases[0];
        let c = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        return LocalCut {
            tris: vec![([c[0], c[1], c[2]], ph), ([c[0], c[2], c[3]], ph)],
            uncut_phase: Some(ph),
            tri_sub: vec![0, 0],
            sub_phase: vec![ph],
            interfaces: Vec::new(),
            traces: [
                vec![([lo[1], hi[1]], 0)],
                vec![([lo[1], hi[1]], 0)],
                vec![([lo[0], hi[0]], 0)],
                vec![([lo[0], hi[0]], 0)],
            ],
        };
    }
    let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (ti, (t, _)) in tris.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push((ti, t[(e + 2) % 3]));
        }
    }
    let mut parent: Vec<usize> = (0..tris.len()).collect();
    let mut ekeys: Vec<_> = edges.keys().copied().collect();
    ekeys.sort();
    for key in &ekeys {
        let adj = &edges[key];
        if adj.len() == 2 && phases[adj[0].0] == phases[adj[1].0] {
            let (ra, rb) = (find(&mut parent, adj[0].0), find(&mut parent, adj[1].0));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut root_sub: HashMap<usize, usize> = HashMap::new();
    let mut tri_sub = Vec::with_capacity(tris.len());
    let mut sub_phase = Vec::new();
    for ti in 0..tris.len() {
        let r = find(&mut parent, ti);
        let n = root_sub.len();
        let s = *root_sub.entry(r).or_insert_with(|| {
            sub_phase.push(phases[ti]);
            n
        });
        tri_sub.push(s);
    }
    let mut interfaces = Vec::new();
    let mut traces: [Vec<([f64; 2], usize)>; 4] = Default::default();
    for key in &ekeys {
        let adj = &edges[key];
        let (a, b) = (verts[key.0], verts[key.1]);
        if adj.len() == 2 {
            let (t0, t1) = (adj[0].0, adj[1].0);
            if phases[t0] == phases[t1] {
                continue;
            }
            let (tm, opp_m, tn) = if phases[t0] < phases[t1] { (t0, adj[0].1, t1) } else { (t1, adj[1].1, t0) };
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len == 0.0 {
                continue;
            }
            let mut n = [d[1] / len, -d[0] / len];
            let c = verts[opp_m];
            if (c[0] - a[0]) * n[0] + (c[1] - a[1]) * n[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            interfaces.push((a, b, n, tri_sub[tm], tri_sub[tn]));
        } else {
            debug_assert_eq!(adj.len(), 1);
            for s in Side::ALL {
                if on_side(a, s) && on_side(b, s) {
                    let d = s.along();
                    let t = [a[d].min(b[d]), a[d].max(b[d])];
                    if t[1] > t[0] {
                        traces[s as usize].push((t, tri_sub[adj[0].0]));
                    }
                }
            }
        }
    }
    let tris = tris
        .iter()
        .zip(&phases)
        .map(|((t, _), &p)| ([verts[t[0]], verts[t[1]], verts[t[2]]], p))
        .collect();
    LocalCut { tris, uncut_phase: None, tri_sub, sub_phase, interfaces, traces }
}

fn overlap(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[1].min(b[1]) - a[0].max(b[0])).max(0.0)
}

impl IntegrationMesh {
    pub fn build(union: &UnionMesh, geom: &Geometry) -> Result<Self> {
        let locals: Vec<LocalCut> = union
            .cells
            .par_iter()
            .map(|c| {
                check_resolution(geom, c.lo, c.h, c.key)?;
                Ok(cut_cell(geom, c.lo, c.h))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mesh = IntegrationMesh {
            n_phases: geom.n_phases,
            tris: Vec::new(),
            subphases: Vec::new(),
            cells: Vec::with_capacity(locals.len()),
            interfaces: Vec::new(),
            boundary: Vec::new(),
            facets: Vec::new(),
        };
        for (ci, lc) in locals.into_iter().enumerate() {
            let base = mesh.subphases.len();
            for &ph in &lc.sub_phase {
                mesh.subphases.push(Subphase { cell: ci, phase: ph, area: 0.0, tris: Vec::new() });
            }
            let t0 = mesh.tris.len();
            for ((v, ph), &ls) in lc.tris.iter().zip(&lc.tri_sub) {
                let tri = Tri { v: *v, phase: *ph, sub: base + ls };
                mesh.subphases[base + ls].area += tri.area();
                mesh.subphases[base + ls].tris.push(mesh.tris.len());
                mesh.tris.push(tri);
            }
            for (a, b, n, sm, sn) in lc.interfaces {
                mesh.interfaces.push(InterfaceSeg {
                    cell: ci,
                    cell_n: ci,
                    a,
                    b,
                    normal: n,
                    sub_m: base + sm,
                    sub_n: base + sn,
                    phase_m: lc.sub_phase[sm],
                    phase_n: lc.sub_phase[sn],
                });
            }
            let mut traces: [Vec<Trace>; 4] = Default::default();
            for s in 0..4 {
                traces[s] = lc.traces[s].iter().map(|(t, sub)| Trace { t: *t, sub: base + sub }).collect();
            }
            mesh.cells.push(CellCut {
                subphases: (base..base + lc.sub_phase.len()).collect(),
                tris: t0..mesh.tris.len(),
                uncut_phase: lc.uncut_phase,
                traces,
            });
        }
        mesh.build_facets(union);
        Ok(mesh)
    }

    fn build_facets(&mut self, union: &UnionMesh) {
        for (ci, cell) in union.cells.iter().enumerate() {
            let k = cell.key;
            let n = union.lattice(k.level);
            for side in Side::ALL {
                let (di, dj) = match side {
                    Side::Left => (-1, 0),
                    Side::Right => (1, 0),
                    Side::Bottom => (0, -1),
                    Side::Top => (0, 1),
                };
                let nk = CellKey::new(k.level, k.i + di, k.j + dj);
                if nk.i < 0 || nk.j < 0 || nk.i >= n[0] || nk.j >= n[1] {
                    for tr in &self.cells[ci].traces[side as usize] {
                        let d = side.along();
                        let fixed = match side {
                            Side::Left => cell.lo[0],
                            Side::Right => cell.lo[0] + cell.h[0],
                            Side::Bottom => cell.lo[1],
                            Side::Top => cell.lo[1] + cell.h[1],
                        };
                        let mut a = [0.0; 2];
                        let mut b = [0.0; 2];
                        a[d] = tr.t[0];
                        b[d] = tr.t[1];
                        a[1 - d] = fixed;
                        b[1 - d] = fixed;
                        // keep the boundary counter-clockwise around the cell
                        if matches!(side, Side::Left | Side::Top) {
                            std::mem::swap(&mut a, &mut b);
                        }
                        let sp = &self.subphases[tr.sub];
                        self.boundary.push(BoundarySeg { cell: ci, a, b, normal: side.normal(), sub: tr.sub, phase: sp.phase, side });
                    }
                    continue;
                }
                let other = if let Some(o) = union.index_of(nk) {
                    if !matches!(side, Side::Right | Side::Top) {
                        continue;
                    }
                    o
                } else if let Some(o) = (0..k.level).rev().find_map(|l| union.index_of(nk.ancestor(l))) {
                    o
                } else {
                    continue;
                };
                let axis = 1 - side.along();
                let (minus, plus) = if matches!(side, Side::Right | Side::Top) { (ci, other) } else { (other, ci) };
                let pos = if matches!(side, Side::Right | Side::Top) {
                    cell.lo[axis] + cell.h[axis]
                } else {
                    cell.lo[axis]
                };
                let d = side.along();
                let range = [cell.lo[d], cell.lo[d] + cell.h[d]];
                let (sm, sp) = if axis == 0 { (Side::Right, Side::Left) } else { (Side::Top, Side::Bottom) };
                let tol = 1e-9 * (range[1] - range[0]);
                let mut pairs = Vec::new();
                for a in &self.cells[minus].traces[sm as usize] {
                    for b in &self.cells[plus].traces[sp as usize] {
                        let ov = overlap(overlap_clip(a.t, range), b.t);
                        if ov <= tol {
                            continue;
                        }
                        let (pa, pb) = (self.subphases[a.sub].phase, self.subphases[b.sub].phase);
                        if pa == pb {
                            if !pairs.contains(&(a.sub, b.sub)) {
                                pairs.push((a.sub, b.sub));
                            }
                            continue;
                        }
                        // contour along the facet itself
                        let t = overlap_clip(overlap_clip(a.t, range), b.t);
                        let at = |u: f64| if axis == 0 { [pos, u] } else { [u, pos] };
                        let mut normal = [0.0; 2];
                        normal[axis] = if pa < pb { 1.0 } else { -1.0 };
                        let ((cm, sm_), (cn, sn_)) = if pa < pb { ((minus, a.sub), (plus, b.sub)) } else { ((plus, b.sub), (minus, a.sub)) };
                        self.interfaces.push(InterfaceSeg {
                            cell: cm,
                            cell_n: cn,
                            a: at(t[0]),
                            b: at(t[1]),
                            normal,
                            sub_m: sm_,
                            sub_n: sn_,
                            phase_m: pa.min(pb),
                            phase_n: pa.max(pb),
                        });
                    }
                }
                self.facets.push(CellFacet { minus, plus, axis, pos, range, pairs });
            }
        }
    }

    /// Subphase adjacency across facets (same phase, positive overlap).
    pub fn subphase_links(&self) -> Vec<(usize, usize)> {
        self.facets.iter().flat_map(|f| f.pairs.iter().copied()).collect()
    }

    pub fn phase_measures(&self, cell: usize) -> PhaseMeasures {
        let mut m = PhaseMeasures { area: vec![0.0; self.n_phases], interface: Vec::new() };
        for &s in &self.cells[cell].subphases {
            m.area[self.subphases[s].phase] += self.subphases[s].area;
        }
        for seg in self.interfaces.iter().filter(|s| s.cell == cell) {
            let l = seg_length(seg.a, seg.b);
            match m.interface.iter_mut().find(|e| e.0 == seg.phase_m && e.1 == seg.phase_n) {
                Some(e) => e.2 += l,
                None => m.interface.push((seg.phase_m, seg.phase_n, l)),
            }
        }
        m
    }

    /// Total area of phase `p`.
    pub fn phase_area(&self, p: usize) -> f64 {
        self.subphases.iter().filter(|s| s.phase == p).map(|s| s.area).sum()
    }

    /// Total length of interfaces between phases `m` and `n`.
    pub fn interface_length(&self, m: usize, n: usize) -> f64 {
        let (m, n) = (m.min(n), m.max(n));
        self.interfaces.iter().filter(|s| s.phase_m == m && s.phase_n == n).map(|s| seg_length(s.a, s.b)).sum()
    }

    /// Interior facets of the cells containing phase `m` where at least one
    /// side is cut, with their same-phase subphase pairs.
    pub fn ghost_facets(&self, m: usize) -> Vec<(usize, Vec<(usize, usize)>)> {
        let has = |c: usize| self.cells[c].subphases.iter().any(|&s| self.subphases[s].phase == m);
        self.facets
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                has(f.minus) && has(f.plus) && (self.cells[f.minus].has_interface() || self.cells[f.plus].has_interface())
            })
            .map(|(i, f)| (i, f.pairs.iter().copied().filter(|(a, _)| self.subphases[*a].phase == m).collect::<Vec<_>>()))
            .filter(|(_, p)| !p.is_empty())
            .collect()
    }

    /// Subphase of cell `cell` containing `x`, restricted to `phase` if given.
    pub fn locate_subphase(&self, cell: usize, x: [f64; 2], phase: Option<usize>) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for t in &self.tris[self.cells[cell].tris.clone()] {
            if phase.is_some_and(|p| p != t.phase) {
                continue;
            }
            let b = t.min_barycentric(x);
            if best.is_none_or(|(bb, _)| b > bb) {
                best = Some((b, t.sub));
            }
        }
        best.filter(|(b, _)| *b > -1e-8).map(|(_, s)| s)
    }
}

fn overlap_clip(a: [f64; 2], r: [f64; 2]) -> [f64; 2] {
    [a[0].max(r[0]), a[1].min(r[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{Circle, HalfPlane};
    use crate::polytree::PolyTreeForest;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_union(n: usize, geom_refine: u32) -> UnionMesh {
        let f = PolyTreeForest::init_base(n, n, [0.0; 2], [1.0; 2], 1).unwrap();
        UnionMesh::build_union(&f, &[0], geom_refine).unwrap()
    }

    fn check_conservation(u: &UnionMesh, m: &IntegrationMesh) {
        for (ci, c) in u.cells.iter().enumerate() {
            let pm = m.phase_measures(ci);
            let s: f64 = pm.area.iter().sum();
            assert!((s - c.area()).abs() < 1e-12 * c.area().max(1.0));
            for t in &m.tris[m.cells[ci].tris.clone()] {
                assert!(t.area() >= 0.0);
            }
        }
    }

    #[test]
    fn uncut_cell() {
        let u = unit_union(1, 0);
        let g = Geometry::single(Arc::new(Circle { center: [5.0, 5.0], radius: 0.5 }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        assert_eq!(m.tris.len(), 2);
        assert!(m.interfaces.is_empty());
        assert_eq!(m.cells[0].uncut_phase, Some(1));
        let pm = m.phase_measures(0);
        assert_eq!(pm.area, vec![0.0, 1.0]);
        assert!(pm.interface.is_empty());
        assert!(m.ghost_facets(1).is_empty());
    }

    #[test]
    fn diagonal_cut() {
        let u = unit_union(1, 0);
        // line through (0,0) and (1,1), offset a hair so it is not the split
        // diagonal itself: use the anti-diagonal instead
        let g = Geometry::single(Arc::new(HalfPlane { point: [1.0, 0.0], angle: 0.75 * PI }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        let pm = m.phase_measures(0);
        assert!((pm.area[0] - 0.5).abs() < 1e-14 && (pm.area[1] - 0.5).abs() < 1e-14);
        assert_eq!(pm.interface.len(), 1);
        assert!((pm.interface[0].2 - 2f64.sqrt()).abs() < 1e-14);
        // and along the split diagonal itself
        let g = Geometry::single(Arc::new(HalfPlane { point: [0.0, 0.0], angle: 0.25 * PI }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        let pm = m.phase_measures(0);
        assert!((pm.area[0] - 0.5).abs() < 1e-14);
        assert!((pm.interface[0].2 - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn normals_and_boundary() {
        let u = unit_union(4, 0);
        let g = Geometry::single(Arc::new(HalfPlane { point: [0.3, 0.0], angle: 0.5 * PI }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        check_conservation(&u, &m);
        for s in &m.interfaces {
            // phase 0 is x <= 0.3 (value = x - 0.3 <= 0): normal points +x
            assert!((s.normal[0] - 1.0).abs() < 1e-14);
            assert_eq!((s.phase_m, s.phase_n), (0, 1));
        }
        let blen: f64 = m.boundary.iter().map(|b| seg_length(b.a, b.b)).sum();
        assert!((blen - 4.0).abs() < 1e-13);
        let left: f64 = m.boundary.iter().filter(|b| b.side == Side::Left).map(|b| seg_length(b.a, b.b)).sum();
        assert!((left - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unresolved_geometry_rejected() {
        let u = unit_union(1, 0);
        let g = Geometry::single(Arc::new(Circle { center: [0.5, -0.1], radius: 0.3 }));
        assert!(matches!(IntegrationMesh::build(&u, &g), Err(Error::GeometryResolution(_))));
    }

    #[test]
    fn circle_fidelity() {
        let r = 0.2;
        let mut errs = Vec::new();
        for gr in 0..3 {
            // h = R/20 at gr = 0
            let u = unit_union(100, gr);
            let g = Geometry::single(Arc::new(Circle { center: [0.5013, 0.4987], radius: r }));
            let m = IntegrationMesh::build(&u, &g).unwrap();
            let el = (m.interface_length(0, 1) - 2.0 * PI * r).abs() / (2.0 * PI * r);
            let ea = (m.phase_area(0) - PI * r * r).abs() / (PI * r * r);
            if gr == 0 {
                assert!(el < 0.01 && ea < 0.01);
                check_conservation(&u, &m);
            }
            errs.push((el, ea));
        }
        for w in errs.windows(2) {
            assert!(w[0].0 / w[1].0 > 3.0 && w[0].1 / w[1].1 > 3.0, "{errs:?}");
        }
    }

    #[test]
    fn ghost_facets_small_patch() {
        // 3x3 patch; the inclusion covers the corners of the four lower-left
        // cells around lattice vertex (1,1)
        let u = unit_union(3, 0);
        let g = Geometry::single(Arc::new(Circle { center: [1.0 / 3.0 + 0.003, 1.0 / 3.0 - 0.002], radius: 0.2 }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        let cut: Vec<usize> = (0..9).filter(|&c| m.cells[c].has_interface()).collect();
        assert_eq!(cut, vec![0, 1, 3, 4]);
        // brute force over all edge-adjacent cell pairs
        let adjacent = |a: usize, b: usize| (a % 3).abs_diff(b % 3) + (a / 3).abs_diff(b / 3) == 1;
        let mut expect1 = Vec::new();
        let mut expect0 = Vec::new();
        for a in 0..9usize {
            for b in a + 1..9 {
                if adjacent(a, b) && (cut.contains(&a) || cut.contains(&b)) {
                    expect1.push((a, b));
                }
                if adjacent(a, b) && cut.contains(&a) && cut.contains(&b) {
                    expect0.push((a, b));
                }
            }
        }
        for (phase, expect) in [(1, expect1), (0, expect0)] {
            let mut got: Vec<_> = m.ghost_facets(phase).iter().map(|(f, _)| (m.facets[*f].minus, m.facets[*f].plus)).collect();
            got.sort();
            assert_eq!(got, expect, "phase {phase}");
        }
    }

    #[test]
    fn two_phase_ghost_sets_overlap() {
        let u = unit_union(8, 0);
        let g = Geometry::single(Arc::new(Circle { center: [0.51, 0.49], radius: 0.27 }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        let f0: Vec<usize> = m.ghost_facets(0).iter().map(|x| x.0).collect();
        let f1: Vec<usize> = m.ghost_facets(1).iter().map(|x| x.0).collect();
        assert!(!f0.is_empty() && !f1.is_empty());
        assert!(f0.iter().any(|f| f1.contains(f)));
        for (fi, pairs) in m.ghost_facets(0) {
            let f = &m.facets[fi];
            for (a, b) in pairs {
                assert_eq!(m.subphases[a].cell, f.minus);
                assert_eq!(m.subphases[b].cell, f.plus);
            }
        }
    }

    #[test]
    fn hanging_facets_keyed_by_fine_side() {
        let mut f = PolyTreeForest::init_base(2, 1, [0.0; 2], [2.0, 1.0], 1).unwrap();
        f.refine_for_ai(0, &[CellKey::new(0, 1, 0)], 1, false).unwrap();
        let u = UnionMesh::build_union(&f, &[0], 0).unwrap();
        let m = IntegrationMesh::build(&u, &Geometry::uniform()).unwrap();
        let coarse = u.index_of(CellKey::new(0, 0, 0)).unwrap();
        let hanging: Vec<_> = m.facets.iter().filter(|x| x.minus == coarse).collect();
        assert_eq!(hanging.len(), 2);
        for h in hanging {
            assert!((h.length() - 0.5).abs() < 1e-15);
            assert_eq!(h.pairs.len(), 1);
        }
        assert_eq!(m.facets.len(), 2 + 4);
    }

    #[test]
    fn contour_along_facets() {
        // vertical line on the x = 0.5 facet column, then a horizontal one
        // crossing a coarse/fine facet
        let u = unit_union(4, 0);
        for angle in [PI / 2.0, 0.0] {
            let g = Geometry::single(Arc::new(HalfPlane { point: [0.5, 0.5], angle }));
            let m = IntegrationMesh::build(&u, &g).unwrap();
            assert!(m.cells.iter().all(|c| !c.has_interface()));
            assert!((m.interface_length(0, 1) - 1.0).abs() < 1e-14);
            for s in &m.interfaces {
                assert_ne!(s.cell, s.cell_n);
                assert_eq!(m.subphases[s.sub_m].phase, 0);
                assert_eq!(m.subphases[s.sub_n].phase, 1);
                // the normal points into the phase 1 cell
                let c = m.subphases[s.sub_n].cell;
                let mid = [0.5 * (s.a[0] + s.b[0]), 0.5 * (s.a[1] + s.b[1])];
                let centre = [u.cells[c].lo[0] + 0.5 * u.cells[c].h[0], u.cells[c].lo[1] + 0.5 * u.cells[c].h[1]];
                assert!((centre[0] - mid[0]) * s.normal[0] + (centre[1] - mid[1]) * s.normal[1] > 0.0);
            }
        }
        let mut f = PolyTreeForest::init_base(4, 4, [0.0; 2], [1.0; 2], 1).unwrap();
        f.refine_for_ai(0, &[CellKey::new(0, 1, 1)], 1, false).unwrap();
        let u = UnionMesh::build_union(&f, &[0], 0).unwrap();
        let g = Geometry::single(Arc::new(HalfPlane { point: [0.0, 0.5], angle: 0.0 }));
        let m = IntegrationMesh::build(&u, &g).unwrap();
        assert!((m.interface_length(0, 1) - 1.0).abs() < 1e-14);
    }

}
