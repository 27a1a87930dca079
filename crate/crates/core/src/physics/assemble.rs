use rayon::prelude::*;

use super::{BoundaryCondition, BoundaryRegion, FieldKind, LinearSystem, Material, Problem};
use crate::discretization::Discretization;
use crate::enrichment::Field;
use crate::error::{Error, Result};
use crate::quadrature::RuleSet;

/// Dense local matrix and load vector over `dofs` (field-local numbering).
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub dofs: Vec<usize>,
    /// Row-major `dofs.len()^2`.
    pub k: Vec<f64>,
    pub f: Vec<f64>,
}

impl Contribution {
    fn zeros(dofs: Vec<usize>) -> Self {
        let n = dofs.len();
        Contribution { dofs, k: vec![0.0; n * n], f: vec![0.0; n] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let n = self.dofs.len();
        self.k[i * n + j] += v;
    }
}

/// Converged temperature feeding the thermal strain of an elastic problem.
#[derive(Debug, Clone, Copy)]
pub struct TemperatureInput<'a> {
    pub field: usize,
    pub coeffs: &'a [f64],
}

pub fn dirichlet_penalty(c: f64, k: f64, h: f64) -> f64 {
    c * k / h
}

/// Averaging weights `(w_m, w_n)` and the shared denominator
/// `meas_m/k_m + meas_n/k_n`; `None` when the denominator vanishes.
pub fn interface_weights(meas_m: f64, k_m: f64, meas_n: f64, k_n: f64, inverse: bool) -> Option<(f64, f64, f64)> {
    let (a, b) = (meas_m / k_m, meas_n / k_n);
    let s = a + b;
    if !(s > 0.0) || !s.is_finite() {
        return None;
    }
    let (wm, wn) = (a / s, b / s);
    Some(if inverse { (wn, wm, s) } else { (wm, wn, s) })
}

/// Per-field view used by all assembly routines.
struct Ctx<'a> {
    disc: &'a Discretization,
    prob: &'a Problem,
    field: &'a Field,
    nc: usize,
    p: usize,
    rules: RuleSet,
    temp: Option<TemperatureInput<'a>>,
}

impl<'a> Ctx<'a> {
    /// `thermal` marks routines that evaluate the thermal strain.
    fn new(disc: &'a Discretization, prob: &'a Problem, temp: Option<TemperatureInput<'a>>, thermal: bool) -> Result<Self> {
        prob.validate(disc)?;
        let field = &disc.fields[prob.field];
        if thermal && prob.kind == FieldKind::Elastic {
            let needs_t = prob.materials.iter().any(|m| !m.void && m.alpha != 0.0);
            if needs_t && temp.is_none() {
                return Err(Error::Sequencing("thermo-elastic assembly needs a temperature solution".into()));
            }
        }
        if let Some(t) = temp {
            let tf = disc.fields.get(t.field).ok_or_else(|| Error::Config("temperature field missing".into()))?;
            if t.coeffs.len() != disc.n_dof(t.field) || tf.components != 1 {
                return Err(Error::Sequencing("temperature solution does not match its field".into()));
            }
        }
        let p = field.degree();
        Ok(Ctx { disc, prob, field, nc: field.components, p, rules: RuleSet::for_degree(p)?, temp })
    }

    fn mat(&self, phase: usize) -> &Material {
        &self.prob.materials[phase]
    }

    /// Conductivity or Young's modulus.
    fn k(&self, phase: usize) -> f64 {
        match self.prob.kind {
            FieldKind::Thermal => self.mat(phase).kappa,
            FieldKind::Elastic => self.mat(phase).e,
        }
    }

    fn sub_dofs(&self, s: usize) -> Vec<usize> {
        let nc = self.nc;
        self.field.enrichment.sub_map[s].iter().flat_map(|&r| (0..nc).map(move |a| r * nc + a)).collect()
    }

    fn temperature(&self, c: usize, s: usize, x: [f64; 2]) -> Result<f64> {
        match self.temp {
            Some(t) => Ok(self.disc.fields[t.field].eval_in(&self.disc.union, c, s, x, t.coeffs)?.0[0]),
            None => Ok(0.0),
        }
    }

    fn thermal_stress(&self, c: usize, s: usize, x: [f64; 2], phase: usize) -> Result<f64> {
        let m = self.mat(phase);
        if m.alpha == 0.0 {
            return Ok(0.0);
        }
        Ok(m.thermal_stress(self.prob.config.plane, self.temperature(c, s, x)?))
    }

    fn volume_points(&self, s: usize) -> Vec<([f64; 2], f64)> {
        volume_points(self.disc, &self.rules, s)
    }

    fn line_points(&self, a: [f64; 2], b: [f64; 2]) -> Vec<([f64; 2], f64)> {
        let len = crate::cut::seg_length(a, b);
        self.rules
            .line
            .points
            .iter()
            .zip(&self.rules.line.weights)
            .map(|(t, w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], w * len))
            .collect()
    }
}

/// Quadrature points and weights covering subphase `s`.
pub(crate) fn volume_points(disc: &Discretization, rules: &RuleSet, s: usize) -> Vec<([f64; 2], f64)> {
    let mesh = &disc.mesh;
    let sp = &mesh.subphases[s];
    let cell = &disc.union.cells[sp.cell];
    if mesh.cells[sp.cell].uncut_phase.is_some() {
        let a = cell.area();
        return rules.quad.points.iter().zip(&rules.quad.weights).map(|(r, w)| (cell.to_global(*r), w * a)).collect();
    }
    let mut out = Vec::new();
    for &t in &sp.tris {
        let tri = &mesh.tris[t];
        let a2 = 2.0 * tri.area().abs();
        out.extend(rules.tri.points.iter().zip(&rules.tri.weights).map(|(r, w)| (tri.map(*r), w * a2)));
    }
    out
}

/// Voigt strain of the unit displacement `N e_b` with gradient `g`.
pub(crate) fn strain(g: [f64; 2], b: usize) -> [f64; 3] {
    if b == 0 {
        [g[0], 0.0, g[1]]
    } else {
        [0.0, g[1], g[0]]
    }
}

pub(crate) fn mul3(d: &[[f64; 3]; 3], e: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|r| d[r][0] * e[0] + d[r][1] * e[1] + d[r][2] * e[2])
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn traction(sig: [f64; 3], n: [f64; 2]) -> [f64; 2] {
    [sig[0] * n[0] + sig[2] * n[1], sig[2] * n[0] + sig[1] * n[1]]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Boundary piece with the material side's subphase and outward normal.
struct Seg {
    cell: usize,
    sub: usize,
    a: [f64; 2],
    b: [f64; 2],
    n: [f64; 2],
    phase: usize,
}

fn segments(disc: &Discretization, region: BoundaryRegion) -> Vec<Seg> {
    let mesh = &disc.mesh;
    match region {
        BoundaryRegion::Side(side) => mesh
            .boundary
            .iter()
            .filter(|s| s.side == side && !disc.void[s.phase])
            .map(|s| Seg { cell: s.cell, sub: s.sub, a: s.a, b: s.b, n: s.normal, phase: s.phase })
            .collect(),
        BoundaryRegion::Immersed | BoundaryRegion::ImmersedPhase(_) => mesh
            .interfaces
            .iter()
            .filter_map(|s| {
                let (vm, vn) = (disc.void[s.phase_m], disc.void[s.phase_n]);
                if vm == vn {
                    return None;
                }
                let seg = if vn {
                    Seg { cell: s.cell, sub: s.sub_m, a: s.a, b: s.b, n: s.normal, phase: s.phase_m }
                } else {
                    Seg { cell: s.cell_n, sub: s.sub_n, a: s.b, b: s.a, n: [-s.normal[0], -s.normal[1]], phase: s.phase_n }
                };
                match region {
                    BoundaryRegion::ImmersedPhase(m) if m != seg.phase => None,
                    _ => Some(seg),
                }
            })
            .collect(),
    }
}

/// Volume terms: diffusion or elasticity, thermal strain and sources.
pub fn assemble_bulk(disc: &Discretization, prob: &Problem, temp: Option<TemperatureInput>) -> Result<Vec<Contribution>> {
    let cx = Ctx::new(disc, prob, temp, true)?;
    let per_cell: Vec<Vec<Contribution>> = (0..disc.union.len())
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for &s in &disc.mesh.cells[c].subphases {
                let phase = disc.mesh.subphases[s].phase;
                if disc.void[phase] {
                    continue;
                }
                out.push(bulk_subphase(&cx, c, s, phase)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn bulk_subphase(cx: &Ctx, c: usize, s: usize, phase: usize) -> Result<Contribution> {
    let mut loc = Contribution::zeros(cx.sub_dofs(s));
    let nc = cx.nc;
    let mat = cx.mat(phase);
    let d = mat.stiffness(cx.prob.config.plane);
    for (x, w) in cx.volume_points(s) {
        let sh = cx.field.shapes(&cx.disc.union, c, cx.disc.union.cells[c].to_local(x));
        let nf = sh.val.len();
        let src = cx.prob.source.as_ref().map(|f| f(x));
        match cx.prob.kind {
            FieldKind::Thermal => {
                for i in 0..nf {
                    for j in 0..nf {
                        loc.add(i, j, w * mat.kappa * dot2(sh.grad[i], sh.grad[j]));
                    }
                    if let Some(q) = src {
                        loc.f[i] += w * sh.val[i] * q[0];
                    }
                }
            }
            FieldKind::Elastic => {
                let sth = cx.thermal_stress(c, s, x, phase)?;
                let sig: Vec<[f64; 3]> = (0..nf * nc).map(|ia| mul3(&d, strain(sh.grad[ia / nc], ia % nc))).collect();
                for ia in 0..nf * nc {
                    let eps = strain(sh.grad[ia / nc], ia % nc);
                    for jb in 0..nf * nc {
                        loc.add(ia, jb, w * dot3(eps, sig[jb]));
                    }
                    loc.f[ia] += w * sth * (eps[0] + eps[1]);
                    if let Some(b) = src {
                        loc.f[ia] += w * sh.val[ia / nc] * b[ia % nc];
                    }
                }
            }
        }
    }
    Ok(loc)
}

pub fn assemble_neumann(disc: &Discretization, prob: &Problem) -> Result<Vec<Contribution>> {
    let cx = Ctx::new(disc, prob, None, false)?;
    let mut out = Vec::new();
    for bc in &prob.bcs {
        let BoundaryCondition::Neumann { region, flux } = bc else { continue };
        let segs = segments(disc, *region);
        let part: Vec<Contribution> = segs
            .par_iter()
            .map(|sg| {
                let mut loc = Contribution::zeros(cx.sub_dofs(sg.sub));
                let nc = cx.nc;
                for (x, w) in cx.line_points(sg.a, sg.b) {
                    let sh = cx.field.shapes(&disc.union, sg.cell, disc.union.cells[sg.cell].to_local(x));
                    let q = flux(x, sg.n);
                    for ia in 0..loc.dofs.len() {
                        loc.f[ia] += w * sh.val[ia / nc] * q[ia % nc];
                    }
                }
                loc
            })
            .collect();
        out.extend(part);
    }
    Ok(out)
}

/// Unsymmetric Nitsche terms for every Dirichlet condition of `prob`.
pub fn assemble_nitsche_dirichlet(disc: &Discretization, prob: &Problem, temp: Option<TemperatureInput>) -> Result<Vec<Contribution>> {
    let cx = Ctx::new(disc, prob, temp, true)?;
    let mut out = Vec::new();
    for bc in &prob.bcs {
        let BoundaryCondition::Dirichlet { region, value, mask } = bc else { continue };
        let segs = segments(disc, *region);
        let part = segs
            .par_iter()
            .map(|sg| dirichlet_segment(&cx, sg, value.as_ref(), *mask))
            .collect::<Result<Vec<_>>>()?;
        out.extend(part);
    }
    Ok(out)
}

fn dirichlet_segment(cx: &Ctx, sg: &Seg, value: &(dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync), mask: [bool; 2]) -> Result<Contribution> {
    let disc = cx.disc;
    let mut loc = Contribution::zeros(cx.sub_dofs(sg.sub));
    let nc = cx.nc;
    let mat = cx.mat(sg.phase);
    let gamma = dirichlet_penalty(cx.prob.config.c_dirichlet(cx.p), cx.k(sg.phase), disc.cell_h(sg.cell));
    let d = mat.stiffness(cx.prob.config.plane);
    let pm: [f64; 2] = mask.map(|m| m as u8 as f64);
    let n = sg.n;
    for (x, w) in cx.line_points(sg.a, sg.b) {
        let sh = cx.field.shapes(&disc.union, sg.cell, disc.union.cells[sg.cell].to_local(x));
        let ud = value(x);
        let nf = sh.val.len();
        match cx.prob.kind {
            FieldKind::Thermal => {
                if !mask[0] {
                    continue;
                }
                let flux: Vec<f64> = sh.grad.iter().map(|g| mat.kappa * dot2(*g, n)).collect();
                for i in 0..nf {
                    for j in 0..nf {
                        let v = -sh.val[i] * flux[j] + flux[i] * sh.val[j] + gamma * sh.val[i] * sh.val[j];
                        loc.add(i, j, w * v);
                    }
                    loc.f[i] += w * (flux[i] + gamma * sh.val[i]) * ud[0];
                }
            }
            FieldKind::Elastic => {
                let sth = cx.thermal_stress(sg.cell, sg.sub, x, sg.phase)?;
                let tr: Vec<[f64; 2]> = (0..nf * nc).map(|ia| traction(mul3(&d, strain(sh.grad[ia / nc], ia % nc)), n)).collect();
                for ia in 0..nf * nc {
                    let (i, a) = (ia / nc, ia % nc);
                    for jb in 0..nf * nc {
                        let (j, b) = (jb / nc, jb % nc);
                        let mut v = -sh.val[i] * pm[a] * tr[jb][a] + tr[ia][b] * pm[b] * sh.val[j];
                        if a == b {
                            v += gamma * pm[a] * sh.val[i] * sh.val[j];
                        }
                        loc.add(ia, jb, w * v);
                    }
                    let adj: f64 = (0..2).map(|b| tr[ia][b] * pm[b] * ud[b]).sum();
                    loc.f[ia] += w * (adj + gamma * pm[a] * sh.val[i] * ud[a] - sh.val[i] * pm[a] * sth * n[a]);
                }
            }
        }
    }
    Ok(loc)
}

/// Per-cell phase areas and per-cell interface lengths keyed by `(m, n)`.
fn cell_measures(disc: &Discretization) -> (Vec<Vec<f64>>, Vec<Vec<(usize, usize, f64)>>) {
    let mesh = &disc.mesh;
    let mut area = vec![vec![0.0; mesh.n_phases]; mesh.cells.len()];
    for sp in &mesh.subphases {
        area[sp.cell][sp.phase] += sp.area;
    }
    let mut len: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); mesh.cells.len()];
    for s in &mesh.interfaces {
        let l = crate::cut::seg_length(s.a, s.b);
        match len[s.cell].iter_mut().find(|e| e.0 == s.phase_m && e.1 == s.phase_n) {
            Some(e) => e.2 += l,
            None => len[s.cell].push((s.phase_m, s.phase_n, l)),
        }
    }
    (area, len)
}

/// Nitsche coupling across material interfaces. Returns the contributions
/// and diagnostics for skipped segments.
pub fn assemble_nitsche_interface(
    disc: &Discretization,
    prob: &Problem,
    temp: Option<TemperatureInput>,
) -> Result<(Vec<Contribution>, Vec<String>)> {
    let cx = Ctx::new(disc, prob, temp, true)?;
    let (area, len) = cell_measures(disc);
    let cfg = &prob.config;
    let res: Vec<std::result::Result<Contribution, String>> = disc
        .mesh
        .interfaces
        .par_iter()
        .filter(|s| !disc.void[s.phase_m] && !disc.void[s.phase_n])
        .map(|seg| {
            let (m, n) = (seg.phase_m, seg.phase_n);
            let (km, kn) = (cx.k(m), cx.k(n));
            let Some((wm, wn, denom)) = interface_weights(area[seg.cell][m], km, area[seg.cell_n][n], kn, cfg.inverse_weights) else {
                return Err(format!("interface segment in cell {} skipped: zero combined measure", seg.cell));
            };
            let lg = len[seg.cell].iter().find(|e| e.0 == m && e.1 == n).map(|e| e.2).unwrap_or(0.0);
            let gamma = 2.0 * cfg.c_interface(cx.p) * lg / denom;
            interface_segment(&cx, seg, [wm, wn], gamma).map_err(|e| e.to_string())
        })
        .collect();
    let mut out = Vec::new();
    let mut diag = Vec::new();
    for r in res {
        match r {
            Ok(c) => out.push(c),
            Err(d) if d.contains("skipped") => diag.push(d),
            Err(d) => return Err(Error::Evaluation(d)),
        }
    }
    Ok((out, diag))
}

fn interface_segment(cx: &Ctx, seg: &crate::cut::InterfaceSeg, wts: [f64; 2], gamma: f64) -> Result<Contribution> {
    let disc = cx.disc;
    let nc = cx.nc;
    let dm = cx.sub_dofs(seg.sub_m);
    let nm = dm.len();
    let mut dofs = dm;
    dofs.extend(cx.sub_dofs(seg.sub_n));
    let mut loc = Contribution::zeros(dofs);
    let nl = loc.dofs.len();
    let phases = [seg.phase_m, seg.phase_n];
    let subs = [seg.sub_m, seg.sub_n];
    let ds = phases.map(|p| cx.mat(p).stiffness(cx.prob.config.plane));
    let n = seg.normal;
    for (x, w) in cx.line_points(seg.a, seg.b) {
        let sh_m = cx.field.shapes(&disc.union, seg.cell, disc.union.cells[seg.cell].to_local(x));
        let sh_n = if seg.cell_n == seg.cell { None } else { Some(cx.field.shapes(&disc.union, seg.cell_n, disc.union.cells[seg.cell_n].to_local(x))) };
        let shs = [&sh_m, sh_n.as_ref().unwrap_or(&sh_m)];
        // side, column and component of each local unknown
        let at = |i: usize| {
            let side = (i >= nm) as usize;
            let r = i - side * nm;
            (side, r / nc, r % nc)
        };
        match cx.prob.kind {
            FieldKind::Thermal => {
                let jump: Vec<f64> = (0..nl).map(|i| {
                    let (sd, k, _) = at(i);
                    if sd == 0 { shs[0].val[k] } else { -shs[1].val[k] }
                }).collect();
                let avg: Vec<f64> = (0..nl)
                    .map(|i| {
                        let (sd, k, _) = at(i);
                        wts[sd] * cx.mat(phases[sd]).kappa * dot2(shs[sd].grad[k], n)
                    })
                    .collect();
                for i in 0..nl {
                    for j in 0..nl {
                        loc.add(i, j, w * (-jump[i] * avg[j] + avg[i] * jump[j] + gamma * jump[i] * jump[j]));
                    }
                }
            }
            FieldKind::Elastic => {
                let jump: Vec<f64> = (0..nl).map(|i| {
                    let (sd, k, _) = at(i);
                    if sd == 0 { shs[0].val[k] } else { -shs[1].val[k] }
                }).collect();
                let avg: Vec<[f64; 2]> = (0..nl)
                    .map(|i| {
                        let (sd, k, a) = at(i);
                        let t = traction(mul3(&ds[sd], strain(shs[sd].grad[k], a)), n);
                        [wts[sd] * t[0], wts[sd] * t[1]]
                    })
                    .collect();
                let sth_avg = wts[0] * cx.thermal_stress(seg.cell, subs[0], x, phases[0])?
                    + wts[1] * cx.thermal_stress(seg.cell_n, subs[1], x, phases[1])?;
                for i in 0..nl {
                    let a = at(i).2;
                    for j in 0..nl {
                        let b = at(j).2;
                        let mut v = -jump[i] * avg[j][a] + avg[i][b] * jump[j];
                        if a == b {
                            v += gamma * jump[i] * jump[j];
                        }
                        loc.add(i, j, w * v);
                    }
                    loc.f[i] -= w * jump[i] * sth_avg * n[a];
                }
            }
        }
    }
    Ok(loc)
}

/// Face-oriented ghost penalty on the `p`-th normal derivative jumps.
pub fn assemble_ghost(disc: &Discretization, prob: &Problem) -> Result<Vec<Contribution>> {
    let cx = Ctx::new(disc, prob, None, false)?;
    if !prob.config.use_ghost || prob.config.ghost == 0.0 {
        return Ok(Vec::new());
    }
    let mut jobs = Vec::new();
    for m in 0..disc.mesh.n_phases {
        if disc.void[m] {
            continue;
        }
        for (fi, pairs) in disc.mesh.ghost_facets(m) {
            for pr in pairs {
                jobs.push((m, fi, pr));
            }
        }
    }
    let p = cx.p;
    let kt = (2 * p - 1) as i32;
    Ok(jobs
        .par_iter()
        .map(|&(m, fi, (sa, sb))| {
            let f = &disc.mesh.facets[fi];
            let h = disc.cell_h(f.minus).min(disc.cell_h(f.plus));
            let gamma = prob.config.ghost * cx.k(m) * h.powi(kt);
            let dp = cx.sub_dofs(sb);
            let np = dp.len();
            let mut dofs = dp;
            dofs.extend(cx.sub_dofs(sa));
            let mut loc = Contribution::zeros(dofs);
            let nl = loc.dofs.len();
            let nc = cx.nc;
            for (t, wt) in cx.rules.line.points.iter().zip(&cx.rules.line.weights) {
                let x = f.point(*t);
                let w = wt * f.length();
                let dplus = cx.field.normal_derivative(&disc.union, f.plus, disc.union.cells[f.plus].to_local(x), f.axis, p);
                let dminus = cx.field.normal_derivative(&disc.union, f.minus, disc.union.cells[f.minus].to_local(x), f.axis, p);
                let jump: Vec<(f64, usize)> = (0..nl)
                    .map(|i| if i < np { (dplus[i / nc], i % nc) } else { (-dminus[(i - np) / nc], (i - np) % nc) })
                    .collect();
                for i in 0..nl {
                    for j in 0..nl {
                        if jump[i].1 == jump[j].1 {
                            loc.add(i, j, w * gamma * jump[i].0 * jump[j].0);
                        }
                    }
                }
            }
            loc
        })
        .collect())
}

/// Full system of one problem.
pub fn assemble(disc: &Discretization, prob: &Problem, temp: Option<TemperatureInput>) -> Result<LinearSystem> {
    let mut parts = assemble_bulk(disc, prob, temp)?;
    parts.extend(assemble_neumann(disc, prob)?);
    parts.extend(assemble_nitsche_dirichlet(disc, prob, temp)?);
    let (iface, diag) = assemble_nitsche_interface(disc, prob, temp)?;
    parts.extend(iface);
    parts.extend(assemble_ghost(disc, prob)?);
    let mut sys = LinearSystem::from_contributions(disc.n_dof(prob.field), &parts);
    sys.diagnostics = diag;
    let field = &disc.fields[prob.field];
    let nc = field.components;
    let pinned: Vec<usize> = field
        .enrichment
        .redundant
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .flat_map(|(r, _)| (0..nc).map(move |a| r * nc + a))
        .collect();
    sys.pin_zero(&pinned)?;
    Ok(sys)
}
