//! Generalized Heaviside enrichment. Every basis function gets one copy
//! per connected non-void region (same phase, facet-connected) of its
//! support; the copy is active only inside its region.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::cut::IntegrationMesh;
use crate::error::{Error, Result};
use crate::extraction::{Extraction, LagrangeBasis};
use crate::thb::ThbBasis;
use crate::union::UnionMesh;

/// One enriched copy of a basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentLevel {
    pub func: usize,
    /// 1-based level index within the function.
    pub level: usize,
    pub phase: usize,
    /// Subphases of the integration mesh forming the region, sorted.
    pub subphases: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Enrichment {
    /// Ordered by `(func, level)`.
    pub regions: Vec<EnrichmentLevel>,
    /// `first[j]..first[j + 1]` are the regions of function `j`.
    pub first: Vec<usize>,
    /// Per subphase: region of each column of the cell's extraction
    /// operator. Empty for void subphases.
    pub sub_map: Vec<Vec<usize>>,
    /// Copies that are linear combinations of other copies on the very
    /// same region. Truncation next to a refined patch can leave several
    /// functions with proportional pieces on a small cut fragment; these
    /// unknowns are pinned to zero by the assembly.
    pub redundant: Vec<bool>,
}

/// Functions of the field element underlying each union cell.
fn cell_funcs<'a>(basis: &'a ThbBasis, union: &UnionMesh, slot: usize, c: usize) -> Result<&'a [usize]> {
    let fc = union.cells[c].field_cells[slot];
    let e = basis
        .element_index(fc)
        .ok_or_else(|| Error::Precondition(format!("field element {fc:?} missing from basis")))?;
    Ok(&basis.elements[e].funcs)
}

impl Enrichment {
    /// `slot` is the field's position in the union's AI list; `void[m]`
    /// marks phases that carry no unknowns.
    pub fn compute(basis: &ThbBasis, union: &UnionMesh, slot: usize, mesh: &IntegrationMesh, void: &[bool]) -> Result<Self> {
        let nf = basis.n_functions();
        let mut support: Vec<Vec<usize>> = vec![Vec::new(); nf];
        for c in 0..union.len() {
            for &f in cell_funcs(basis, union, slot, c)? {
                support[f].push(c);
            }
        }
        let is_void = |ph: usize| void.get(ph).copied().unwrap_or(false);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); mesh.subphases.len()];
        for (a, b) in mesh.subphase_links() {
            adj[a].push(b);
            adj[b].push(a);
        }
        let per_fn: Vec<Vec<Vec<usize>>> = support
            .par_iter()
            .map(|cells| {
                // cells are pushed in increasing order, so binary search works
                let in_supp = |c: usize| cells.binary_search(&c).is_ok();
                let mut seen: Vec<usize> = Vec::new();
                let mut comps = Vec::new();
                for &c in cells {
                    for &s in &mesh.cells[c].subphases {
                        if is_void(mesh.subphases[s].phase) || seen.contains(&s) {
                            continue;
                        }
                        let mut comp = vec![s];
                        seen.push(s);
                        let mut k = 0;
                        while k < comp.len() {
                            for &t in &adj[comp[k]] {
                                if !seen.contains(&t) && in_supp(mesh.subphases[t].cell) {
                                    seen.push(t);
                                    comp.push(t);
                                }
                            }
                            k += 1;
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
                comps.sort_by_key(|c| c[0]);
                comps
            })
            .collect();
        let mut regions = Vec::new();
        let mut first = Vec::with_capacity(nf + 1);
        for (j, comps) in per_fn.into_iter().enumerate() {
            first.push(regions.len());
            for (l, subs) in comps.into_iter().enumerate() {
                let phase = mesh.subphases[subs[0]].phase;
                regions.push(EnrichmentLevel { func: j, level: l + 1, phase, subphases: subs });
            }
        }
        first.push(regions.len());
        let mut sub_map: Vec<Vec<usize>> = vec![Vec::new(); mesh.subphases.len()];
        for (s, sp) in mesh.subphases.iter().enumerate() {
            if !is_void(sp.phase) {
                sub_map[s] = vec![usize::MAX; cell_funcs(basis, union, slot, sp.cell)?.len()];
            }
        }
        for (r, reg) in regions.iter().enumerate() {
            for &s in &reg.subphases {
                let funcs = cell_funcs(basis, union, slot, mesh.subphases[s].cell)?;
                let k = funcs.iter().position(|&f| f == reg.func).expect("region outside function support");
                sub_map[s][k] = r;
            }
        }
        let redundant = redundant_copies(basis, union, slot, mesh, &regions)?;
        Ok(Enrichment { regions, first, sub_map, redundant })
    }

    pub fn n_levels(&self, func: usize) -> usize {
        self.first[func + 1] - self.first[func]
    }

    pub fn n_enriched(&self) -> usize {
        self.regions.len()
    }

    pub fn n_redundant(&self) -> usize {
        self.redundant.iter().filter(|r| **r).count()
    }
}

/// Flags copies whose restriction to their region is spanned by earlier
/// copies on the identical region. Each copy is represented by its
/// B-spline coefficient rows on the field elements under the region, so
/// the test is exact up to round-off.
fn redundant_copies(basis: &ThbBasis, union: &UnionMesh, slot: usize, mesh: &IntegrationMesh, regions: &[EnrichmentLevel]) -> Result<Vec<bool>> {
    const TOL: f64 = 1e-10;
    let mut groups: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (r, reg) in regions.iter().enumerate() {
        groups.entry(&reg.subphases).or_default().push(r);
    }
    let nl = (basis.degree + 1).pow(2);
    let mut out = vec![false; regions.len()];
    let mut shared: Vec<&Vec<usize>> = groups.values().filter(|g| g.len() > 1).collect();
    shared.sort();
    for members in shared {
        let mut elems: Vec<usize> = Vec::new();
        for &s in &regions[members[0]].subphases {
            let fc = union.cells[mesh.subphases[s].cell].field_cells[slot];
            let e = basis.element_index(fc).ok_or_else(|| Error::Precondition(format!("field element {fc:?} missing from basis")))?;
            if !elems.contains(&e) {
                elems.push(e);
            }
        }
        let mut kept: Vec<Vec<f64>> = Vec::new();
        for &r in members {
            let mut v = Vec::with_capacity(elems.len() * nl);
            for &e in &elems {
                let el = &basis.elements[e];
                match el.funcs.iter().position(|&f| f == regions[r].func) {
                    Some(k) => v.extend_from_slice(&el.coeffs[k * nl..(k + 1) * nl]),
                    None => v.extend(std::iter::repeat(0.0).take(nl)),
                }
            }
            let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for q in &kept {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm <= TOL * norm0 {
                out[r] = true;
            } else {
                v.iter_mut().for_each(|a| *a /= norm);
                kept.push(v);
            }
        }
    }
    Ok(out)
}

/// Global unknown numbering over all fields in `(field, function, level,
/// component)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofTable {
    pub offsets: Vec<usize>,
    pub components: Vec<usize>,
    pub n_dof: usize,
}

impl DofTable {
    pub fn build(fields: &[(&Enrichment, usize)]) -> Self {
        let mut offsets = Vec::new();
        let mut n = 0;
        for (e, nc) in fields {
            offsets.push(n);
            n += e.n_enriched() * nc;
        }
        DofTable { offsets, components: fields.iter().map(|f| f.1).collect(), n_dof: n }
    }

    pub fn dof(&self, field: usize, region: usize, comp: usize) -> usize {
        self.offsets[field] + region * self.components[field] + comp
    }

    /// Unknowns of one field.
    pub fn field_len(&self, field: usize) -> usize {
        let end = self.offsets.get(field + 1).copied().unwrap_or(self.n_dof);
        end - self.offsets[field]
    }
}

/// A discretized field on the union mesh: basis, extraction operators per
/// union cell and enrichment.
#[derive(Debug, Clone)]
pub struct Field {
    pub name: String,
    pub basis: ThbBasis,
    pub lag: LagrangeBasis,
    pub slot: usize,
    pub components: usize,
    pub extraction: Vec<Extraction>,
    pub enrichment: Enrichment,
}

/// Shape values at one point of a cell: `val[k]`, `grad[k]` per extraction
/// column.
#[derive(Debug, Clone, Default)]
pub struct Shapes {
    pub val: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
}

impl Field {
    pub fn build(
        name: &str,
        basis: ThbBasis,
        union: &UnionMesh,
        slot: usize,
        components: usize,
        mesh: &IntegrationMesh,
        void: &[bool],
    ) -> Result<Self> {
        let lag = LagrangeBasis::new(basis.degree);
        let extraction =
            (0..union.len()).into_par_iter().map(|c| union.extraction(c, slot, &basis, &lag)).collect::<Result<Vec<_>>>()?;
        let enrichment = Enrichment::compute(&basis, union, slot, mesh, void)?;
        Ok(Field { name: name.to_string(), basis, lag, slot, components, extraction, enrichment })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    /// Values and physical gradients of the cell's functions at local `s`.
    pub fn shapes(&self, union: &UnionMesh, c: usize, s: [f64; 2]) -> Shapes {
        let ex = &self.extraction[c];
        let h = union.cells[c].h;
        let n = self.lag.n();
        let nf = ex.n_funcs();
        let mut w = vec![0.0; n];
        let mut out = Shapes { val: vec![0.0; nf], grad: vec![[0.0; 2]; nf] };
        let mut tmp = vec![0.0; nf];
        self.lag.eval_all(s, 0, 0, &mut w);
        ex.apply(&w, &mut out.val);
        for d in 0..2 {
            self.lag.eval_all(s, (d == 0) as usize, (d == 1) as usize, &mut w);
            ex.apply(&w, &mut tmp);
            for k in 0..nf {
                out.grad[k][d] = tmp[k] / h[d];
            }
        }
        out
    }

    /// `d^order/dn^order` along coordinate axis `axis` of the cell's
    /// functions at local `s` (polynomial extension beyond the cell allowed).
    pub fn normal_derivative(&self, union: &UnionMesh, c: usize, s: [f64; 2], axis: usize, order: usize) -> Vec<f64> {
        let ex = &self.extraction[c];
        let h = union.cells[c].h[axis];
        let mut w = vec![0.0; self.lag.n()];
        let (dx, dy) = if axis == 0 { (order, 0) } else { (0, order) };
        self.lag.eval_all(s, dx, dy, &mut w);
        let mut out = vec![0.0; ex.n_funcs()];
        ex.apply(&w, &mut out);
        let scale = h.powi(order as i32);
        out.iter_mut().for_each(|v| *v /= scale);
        out
    }

    /// Field value and gradient per component at physical `x` inside
    /// subphase `sub` of union cell `c`. `coeffs` is indexed by
    /// `region * components + comp`.
    pub fn eval_in(&self, union: &UnionMesh, c: usize, sub: usize, x: [f64; 2], coeffs: &[f64]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
        let map = &self.enrichment.sub_map[sub];
        if map.is_empty() {
            return Err(Error::Evaluation(format!("point {x:?} lies in a void phase")));
        }
        let sh = self.shapes(union, c, union.cells[c].to_local(x));
        let nc = self.components;
        let mut v = vec![0.0; nc];
        let mut g = vec![[0.0; 2]; nc];
        for (k, &r) in map.iter().enumerate() {
            for a in 0..nc {
                let cf = coeffs[r * nc + a];
                v[a] += sh.val[k] * cf;
                g[a][0] += sh.grad[k][0] * cf;
                g[a][1] += sh.grad[k][1] * cf;
            }
        }
        Ok((v, g))
    }

    /// Evaluation at an arbitrary point; `phase` selects the side on
    /// interfaces.
    pub fn eval_at(
        &self,
        union: &UnionMesh,
        mesh: &IntegrationMesh,
        x: [f64; 2],
        phase: Option<usize>,
        coeffs: &[f64],
    ) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
        let c = union.locate(x).ok_or_else(|| Error::Domain(format!("point {x:?} outside mesh")))?;
        let sub = mesh
            .locate_subphase(c, x, phase)
            .ok_or_else(|| Error::Evaluation(format!("no subphase of phase {phase:?} at {x:?}")))?;
        self.eval_in(union, c, sub, x, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{Circle, Geometry, HalfPlane, LevelSet};
    use crate::polytree::{CellKey, PolyTreeForest};
    use std::collections::VecDeque;
    use std::sync::Arc;

    struct Setup {
        union: UnionMesh,
        mesh: IntegrationMesh,
        geom: Geometry,
        field: Field,
    }

    fn setup(n: usize, p: usize, geom: Geometry, refine: &[CellKey], void: &[bool]) -> Setup {
        let mut f = PolyTreeForest::init_base(n, n, [0.0; 2], [1.0; 2], 1).unwrap();
        if !refine.is_empty() {
            f.refine_for_ai(0, refine, p, false).unwrap();
        }
        let basis = ThbBasis::build(&f, 0, p, true).unwrap();
        let union = UnionMesh::build_union(&f, &[0], 1).unwrap();
        let mesh = IntegrationMesh::build(&union, &geom).unwrap();
        let field = Field::build("u", basis, &union, 0, 1, &mesh, void).unwrap();
        Setup { union, mesh, geom, field }
    }

    /// Independent oracle: flood fill on a fine pixel grid restricted to the
    /// support of function `j`, connecting 4-neighbours of the same phase.
    fn pixel_regions(s: &Setup, j: usize, res: usize, void: &[bool]) -> usize {
        let b = &s.field.basis;
        let inside = |x: [f64; 2]| {
            b.locate(x).map(|e| b.elements[e].funcs.contains(&j)).unwrap_or(false)
        };
        let mut lab = vec![usize::MAX; res * res];
        let px = |i: usize, k: usize| [(i as f64 + 0.5) / res as f64, (k as f64 + 0.5) / res as f64];
        let mut n = 0;
        for start in 0..res * res {
            let (i, k) = (start % res, start / res);
            let x = px(i, k);
            let ph = s.geom.classify_point(x);
            if lab[start] != usize::MAX || !inside(x) || void[ph] {
                continue;
            }
            let mut q = VecDeque::from([start]);
            lab[start] = n;
            while let Some(c) = q.pop_front() {
                let (ci, ck) = ((c % res) as i64, (c / res) as i64);
                for (di, dk) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (ni, nk) = (ci + di, ck + dk);
                    if ni < 0 || nk < 0 || ni >= res as i64 || nk >= res as i64 {
                        continue;
                    }
                    let nid = nk as usize * res + ni as usize;
                    let y = px(ni as usize, nk as usize);
                    if lab[nid] == usize::MAX && inside(y) && s.geom.classify_point(y) == ph {
                        lab[nid] = n;
                        q.push_back(nid);
                    }
                }
            }
            n += 1;
        }
        n
    }

    /// One-cell band of quadratic refinement around a circle; truncation
    /// leaves proportional pieces on some cut fragments.
    fn ring_setup() -> Setup {
        let (n, r) = (6usize, 0.31);
        let h = 1.0 / n as f64;
        let mut refine = Vec::new();
        for j in 0..n as i64 {
            for i in 0..n as i64 {
                let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                if ((c[0] - 0.5).hypot(c[1] - 0.5) - r).abs() < h * 2f64.sqrt() {
                    refine.push(CellKey::new(0, i, j));
                }
            }
        }
        setup(n, 2, Geometry::single(Arc::new(Circle { center: [0.5, 0.5], radius: r })), &refine, &[false, false])
    }

    /// Numerical rank by Gram-Schmidt with column pivoting.
    fn rank(mut cols: Vec<Vec<f64>>, tol: f64) -> usize {
        let scale = cols.iter().map(|c| c.iter().map(|a| a * a).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let mut r = 0;
        while !cols.is_empty() {
            let (k, nk) = cols
                .iter()
                .map(|c| c.iter().map(|a| a * a).sum::<f64>().sqrt())
                .enumerate()
                .fold((0, -1.0), |b, (i, v)| if v > b.1 { (i, v) } else { b });
            if nk <= tol * scale {
                break;
            }
            let q: Vec<f64> = cols.swap_remove(k).iter().map(|a| a / nk).collect();
            for c in &mut cols {
                let d: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
                c.iter_mut().zip(&q).for_each(|(a, b)| *a -= d * b);
            }
            r += 1;
        }
        r
    }

    #[test]
    fn redundant_copies_match_sampled_rank() {
        let s = ring_setup();
        let e = &s.field.enrichment;
        let b = &s.field.basis;
        assert!(e.n_redundant() > 0);
        let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (r, reg) in e.regions.iter().enumerate() {
            groups.entry(reg.subphases.clone()).or_default().push(r);
        }
        for (subs, members) in groups {
            let mut pts = Vec::new();
            for t in s.mesh.tris.iter().filter(|t| subs.binary_search(&t.sub).is_ok()) {
                for w in [[1.0 / 3.0, 1.0 / 3.0], [0.6, 0.2], [0.2, 0.6], [0.2, 0.2]] {
                    let l = [w[0], w[1], 1.0 - w[0] - w[1]];
                    pts.push([0, 1].map(|d| l[0] * t.v[0][d] + l[1] * t.v[1][d] + l[2] * t.v[2][d]));
                }
            }
            let cols: Vec<Vec<f64>> = members
                .iter()
                .map(|&r| {
                    let j = e.regions[r].func;
                    pts.iter().map(|&x| b.eval_point(x).unwrap().iter().find(|v| v.0 == j).map_or(0.0, |v| v.1)).collect()
                })
                .collect();
            let kept = members.iter().filter(|&&r| !e.redundant[r]).count();
            assert_eq!(kept, rank(cols, 1e-9), "region {subs:?}");
        }
    }

    #[test]
    fn uncut_has_one_level_each() {
        let s = setup(4, 2, Geometry::uniform(), &[], &[false]);
        let e = &s.field.enrichment;
        assert_eq!(e.n_enriched(), s.field.basis.n_functions());
        assert!((0..s.field.basis.n_functions()).all(|j| e.n_levels(j) == 1));
        let d = DofTable::build(&[(e, 2)]);
        assert_eq!(d.n_dof, 2 * 36);
    }

    #[test]
    fn circle_splits_straddling_support() {
        let geom = Geometry::single(Arc::new(Circle { center: [0.5, 0.5], radius: 0.3 }));
        let s = setup(6, 2, geom, &[CellKey::new(0, 2, 2)], &[false, false]);
        let e = &s.field.enrichment;
        let mut seen2 = false;
        for j in 0..s.field.basis.n_functions() {
            let oracle = pixel_regions(&s, j, 240, &[false, false]);
            assert_eq!(e.n_levels(j), oracle, "function {j}");
            seen2 |= oracle == 2;
        }
        assert!(seen2);
    }

    #[test]
    fn strip_gives_three_regions() {
        // phase 1 is a thin vertical strip splitting phase 0 in two
        let ls: Vec<Arc<dyn LevelSet>> = vec![
            Arc::new(HalfPlane { point: [0.47, 0.0], angle: std::f64::consts::FRAC_PI_2 }),
            Arc::new(HalfPlane { point: [0.53, 0.0], angle: std::f64::consts::FRAC_PI_2 }),
        ];
        let l0 = ls[0].value([0.5, 0.5]);
        let l1 = ls[1].value([0.5, 0.5]);
        let want = (l0 > 0.0) as u32 | (((l1 > 0.0) as u32) << 1);
        let geom = Geometry::with_rule(ls, 2, |b| (b == want) as usize).unwrap();
        assert_eq!(geom.classify_point([0.5, 0.5]), 1);
        assert_eq!(geom.classify_point([0.1, 0.5]), 0);
        let s = setup(4, 2, geom, &[], &[false, false]);
        let e = &s.field.enrichment;
        let mut seen3 = false;
        for j in 0..s.field.basis.n_functions() {
            assert_eq!(e.n_levels(j), pixel_regions(&s, j, 200, &[false, false]), "function {j}");
            seen3 |= e.n_levels(j) == 3;
        }
        assert!(seen3);
    }

    #[test]
    fn void_phase_excluded() {
        let geom = Geometry::single(Arc::new(Circle { center: [0.5, 0.5], radius: 0.3 }));
        let s = setup(6, 1, geom, &[], &[true, false]);
        let e = &s.field.enrichment;
        for j in 0..s.field.basis.n_functions() {
            assert_eq!(e.n_levels(j), pixel_regions(&s, j, 240, &[true, false]));
        }
        // functions centred in the hole have no unknowns
        assert!(e.n_enriched() < s.field.basis.n_functions());
        assert!(e.regions.iter().all(|r| r.phase == 1));
    }

    #[test]
    fn enriched_partition_of_unity() {
        let geom = Geometry::single(Arc::new(Circle { center: [0.43, 0.52], radius: 0.27 }));
        let s = setup(5, 3, geom, &[CellKey::new(0, 1, 2)], &[false, false]);
        let ones = vec![1.0; s.field.enrichment.n_enriched()];
        for t in &s.mesh.tris {
            let c = s.mesh.subphases[t.sub].cell;
            let x = t.map([1.0 / 3.0, 1.0 / 3.0]);
            let (v, g) = s.field.eval_in(&s.union, c, t.sub, x, &ones).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-12);
            assert!(g[0][0].abs() < 1e-9 && g[0][1].abs() < 1e-9);
        }
    }

    #[test]
    fn reproduces_per_phase_linear_fields_with_jump() {
        let geom = Geometry::single(Arc::new(Circle { center: [0.5, 0.5], radius: 0.31 }));
        let s = setup(6, 2, geom.clone(), &[], &[false, false]);
        let fa = |x: [f64; 2]| 1.0 + 2.0 * x[0] - x[1];
        let fb = |x: [f64; 2]| -3.0 + 0.5 * x[0] + 4.0 * x[1];
        // B-spline coefficients of a linear function are its values at the
        // Greville points; each region takes the polynomial of its phase
        let b = &s.field.basis;
        let p = b.degree as f64;
        let coeffs: Vec<f64> = s
            .field
            .enrichment
            .regions
            .iter()
            .map(|r| {
                let k = b.functions[r.func];
                let h = b.cell_size(k.level);
                let g = [(k.i as f64 + 0.5 - p / 2.0) * h[0], (k.j as f64 + 0.5 - p / 2.0) * h[1]];
                if r.phase == 0 { fa(g) } else { fb(g) }
            })
            .collect();
        for t in &s.mesh.tris {
            let c = s.mesh.subphases[t.sub].cell;
            for r in [[0.2, 0.2], [0.6, 0.3], [0.1, 0.7]] {
                let x = t.map(r);
                let (v, _) = s.field.eval_in(&s.union, c, t.sub, x, &coeffs).unwrap();
                let want = if t.phase == 0 { fa(x) } else { fb(x) };
                assert!((v[0] - want).abs() < 1e-10, "{x:?} {} {}", v[0], want);
            }
        }
        // the jump across the interface is reproduced
        let x = [0.81, 0.5];
        let a = s.field.eval_at(&s.union, &s.mesh, x, Some(0), &coeffs).unwrap().0[0];
        let bb = s.field.eval_at(&s.union, &s.mesh, x, Some(1), &coeffs).unwrap().0[0];
        assert!(((a - bb) - (fa(x) - fb(x))).abs() < 1e-10);
    }

    #[test]
    fn single_phase_matches_plain_basis() {
        let s = setup(4, 2, Geometry::uniform(), &[CellKey::new(0, 1, 1)], &[false]);
        let coeffs: Vec<f64> = (0..s.field.enrichment.n_enriched()).map(|i| (i as f64 * 0.37).sin()).collect();
        for x in [[0.1, 0.2], [0.33, 0.41], [0.9, 0.77]] {
            let (v, g) = s.field.eval_at(&s.union, &s.mesh, x, None, &coeffs).unwrap();
            let direct = s.field.basis.eval_point(x).unwrap();
            let dv: f64 = direct.iter().map(|(f, b, _)| b * coeffs[*f]).sum();
            let dg: f64 = direct.iter().map(|(f, _, gg)| gg[1] * coeffs[*f]).sum();
            assert!((v[0] - dv).abs() < 1e-12);
            assert!((g[0][1] - dg).abs() < 1e-10);
        }
    }

    #[test]
    fn dof_layout_two_fields() {
        let s = setup(3, 1, Geometry::uniform(), &[], &[false]);
        let e = &s.field.enrichment;
        let d = DofTable::build(&[(e, 1), (e, 2)]);
        assert_eq!(d.offsets, vec![0, 16]);
        assert_eq!(d.n_dof, 48);
        assert_eq!(d.dof(1, 3, 1), 16 + 7);
        assert_eq!(d.field_len(1), 32);
    }

    #[test]
    fn void_evaluation_errors() {
        let geom = Geometry::single(Arc::new(Circle { center: [0.5, 0.5], radius: 0.3 }));
        let s = setup(4, 1, geom, &[], &[true, false]);
        let c = vec![0.0; s.field.enrichment.n_enriched()];
        assert!(matches!(s.field.eval_at(&s.union, &s.mesh, [0.5, 0.5], None, &c), Err(Error::Evaluation(_))));
    }
}
