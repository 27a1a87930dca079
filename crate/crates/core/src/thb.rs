//! Hierarchical and truncated hierarchical B-spline bases over the active
//! mesh of one activation index.
//!
//! Each active element stores its nonzero functions as rows of coefficients
//! over the `(p+1)^2` uniform B-splines of the element's own level. Rows are
//! built top-down: starting from the level-0 ancestor, rows are pushed
//! through the local subdivision matrices, truncated against `Omega^{l+1}`
//! (truncated variant only) and joined by the active functions of the next
//! level.

use std::collections::{HashMap, HashSet};

use crate::bspline::{local_subdivision_2d, local_values, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::polytree::{CellKey, PolyTreeForest, State};

/// Hierarchical function identity: level plus lattice index. Ordering is
/// (level, j, i), which is also the global function numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FnKey {
    pub level: u32,
    pub j: i64,
    pub i: i64,
}

#[derive(Debug, Clone)]
pub struct ElementBasis {
    pub cell: CellKey,
    /// Global function indices, ascending.
    pub funcs: Vec<usize>,
    /// `funcs.len()` rows of `(p+1)^2` local coefficients.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ThbBasis {
    pub ai: usize,
    pub degree: usize,
    pub truncated: bool,
    pub functions: Vec<FnKey>,
    pub elements: Vec<ElementBasis>,
    fn_index: HashMap<FnKey, usize>,
    elem_index: HashMap<CellKey, usize>,
    omega: HashSet<CellKey>,
    lo: [f64; 2],
    h0: [f64; 2],
    counts: [usize; 2],
}

/// Values of the `(p+1)^2` local tensor B-splines (derivative order
/// `dx, dy` in local units) at local coordinates `s` in `[0,1]^2`.
pub fn local_tensor(p: usize, s: [f64; 2], dx: usize, dy: usize, out: &mut [f64]) {
    let mut bx = [0.0; MAX_DEGREE + 1];
    let mut by = [0.0; MAX_DEGREE + 1];
    local_values(p, s[0], dx, &mut bx);
    local_values(p, s[1], dy, &mut by);
    let n = p + 1;
    for ay in 0..n {
        for ax in 0..n {
            out[ax + n * ay] = bx[ax] * by[ay];
        }
    }
}

struct Builder<'a> {
    p: usize,
    truncate: bool,
    omega: &'a HashSet<CellKey>,
    active: &'a HashSet<CellKey>,
    counts: [usize; 2],
    fn_index: &'a HashMap<FnKey, usize>,
    subdiv: Vec<Vec<f64>>,
    support_cache: HashMap<FnKey, bool>,
    out: Vec<ElementBasis>,
}

fn support_cells(p: usize, counts: [usize; 2], k: FnKey) -> impl Iterator<Item = CellKey> {
    let n = [(counts[0] << k.level) as i64, (counts[1] << k.level) as i64];
    let p = p as i64;
    let (i0, i1) = ((k.i - p).max(0), k.i.min(n[0] - 1));
    let (j0, j1) = ((k.j - p).max(0), k.j.min(n[1] - 1));
    (j0..=j1).flat_map(move |j| (i0..=i1).map(move |i| CellKey::new(k.level, i, j)))
}

impl Builder<'_> {
    /// supp(B_k) inside Omega^l (in-domain support cells only).
    fn supp_in_omega(&mut self, k: FnKey) -> bool {
        if let Some(&v) = self.support_cache.get(&k) {
            return v;
        }
        let v = support_cells(self.p, self.counts, k).all(|c| self.omega.contains(&c));
        self.support_cache.insert(k, v);
        v
    }

    fn descend(&mut self, c: CellKey, mut rows: Vec<(usize, Vec<f64>)>) {
        let n = self.p + 1;
        for ay in 0..n {
            for ax in 0..n {
                let k = FnKey { level: c.level, j: c.j + ay as i64, i: c.i + ax as i64 };
                if let Some(&idx) = self.fn_index.get(&k) {
                    let mut r = vec![0.0; n * n];
                    r[ax + n * ay] = 1.0;
                    rows.push((idx, r));
                }
            }
        }
        if self.active.contains(&c) {
            rows.retain(|(_, r)| r.iter().any(|v| *v != 0.0));
            rows.sort_by_key(|r| r.0);
            let funcs = rows.iter().map(|r| r.0).collect();
            let coeffs = rows.into_iter().flat_map(|r| r.1).collect();
            self.out.push(ElementBasis { cell: c, funcs, coeffs });
            return;
        }
        for (pos, ch) in c.children().into_iter().enumerate() {
            let mut trunc = vec![false; n * n];
            if self.truncate {
                for ay in 0..n {
                    for ax in 0..n {
                        let k = FnKey { level: ch.level, j: ch.j + ay as i64, i: ch.i + ax as i64 };
                        trunc[ax + n * ay] = self.supp_in_omega(k);
                    }
                }
            }
            let s = &self.subdiv[pos];
            let child_rows: Vec<(usize, Vec<f64>)> = rows
                .iter()
                .map(|(idx, r)| {
                    let mut nr = vec![0.0; n * n];
                    for (a, &ra) in r.iter().enumerate() {
                        if ra == 0.0 {
                            continue;
                        }
                        for b in 0..n * n {
                            nr[b] += ra * s[a * n * n + b];
                        }
                    }
                    for b in 0..n * n {
                        if trunc[b] {
                            nr[b] = 0.0;
                        }
                    }
                    (*idx, nr)
                })
                .filter(|(_, r)| r.iter().any(|v| *v != 0.0))
                .collect();
            self.descend(ch, child_rows);
        }
    }
}

impl ThbBasis {
    /// Non-truncated hierarchical basis for `ai`. Requires buffer regularity
    /// with `b_buffer = degree`.
    pub fn build_hierarchical(forest: &PolyTreeForest, ai: usize, degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!("degree must lie in 1..={MAX_DEGREE}")));
        }
        forest.check_regular(ai, degree)?;
        let mut omega = HashSet::new();
        let mut refined = HashSet::new();
        for (c, _) in forest.cells() {
            match forest.state(c, ai) {
                State::Active => {
                    omega.insert(c);
                }
                State::Refined => {
                    omega.insert(c);
                    refined.insert(c);
                }
                State::Inactive => {}
            }
        }
        let counts = forest.counts();
        let mut functions = Vec::new();
        let mut seen = HashSet::new();
        let mut cand: Vec<CellKey> = omega.iter().copied().collect();
        cand.sort();
        for c in cand {
            for dj in 0..=degree as i64 {
                for di in 0..=degree as i64 {
                    let k = FnKey { level: c.level, j: c.j + dj, i: c.i + di };
                    if !seen.insert(k) {
                        continue;
                    }
                    let mut all_omega = true;
                    let mut all_refined = true;
                    for s in support_cells(degree, counts, k) {
                        all_omega &= omega.contains(&s);
                        all_refined &= refined.contains(&s);
                    }
                    if all_omega && !all_refined {
                        functions.push(k);
                    }
                }
            }
        }
        functions.sort();
        let (lo, _) = forest.bounds();
        let mut b = ThbBasis {
            ai,
            degree,
            truncated: false,
            fn_index: functions.iter().enumerate().map(|(i, k)| (*k, i)).collect(),
            functions,
            elements: Vec::new(),
            elem_index: HashMap::new(),
            omega,
            lo,
            h0: forest.cell_size(0),
            counts,
        };
        b.build_elements(false);
        Ok(b)
    }

    /// Truncated counterpart with the same function set and numbering.
    pub fn build_truncated(basis: &ThbBasis) -> ThbBasis {
        let mut b = basis.clone();
        b.build_elements(true);
        b.truncated = true;
        b
    }

    /// Convenience: hierarchical construction followed by truncation.
    pub fn build(forest: &PolyTreeForest, ai: usize, degree: usize, truncate: bool) -> Result<Self> {
        let h = Self::build_hierarchical(forest, ai, degree)?;
        Ok(if truncate { Self::build_truncated(&h) } else { h })
    }

    fn build_elements(&mut self, truncate: bool) {
        let active: HashSet<CellKey> = self
            .omega
            .iter()
            .filter(|c| !c.children().iter().any(|k| self.omega.contains(k)))
            .copied()
            .collect();
        let mut bl = Builder {
            p: self.degree,
            truncate,
            omega: &self.omega,
            active: &active,
            counts: self.counts,
            fn_index: &self.fn_index,
            subdiv: (0..4).map(|pos| local_subdivision_2d(self.degree, pos)).collect(),
            support_cache: HashMap::new(),
            out: Vec::new(),
        };
        for j in 0..self.counts[1] as i64 {
            for i in 0..self.counts[0] as i64 {
                bl.descend(CellKey::new(0, i, j), Vec::new());
            }
        }
        let mut out = bl.out;
        out.sort_by_key(|e| e.cell);
        self.elem_index = out.iter().enumerate().map(|(i, e)| (e.cell, i)).collect();
        self.elements = out;
    }

    pub fn n_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn fn_index(&self, k: FnKey) -> Option<usize> {
        self.fn_index.get(&k).copied()
    }

    pub fn element_index(&self, c: CellKey) -> Option<usize> {
        self.elem_index.get(&c).copied()
    }

    pub fn cell_size(&self, level: u32) -> [f64; 2] {
        let s = (1u64 << level) as f64;
        [self.h0[0] / s, self.h0[1] / s]
    }

    pub fn cell_origin(&self, c: CellKey) -> [f64; 2] {
        let h = self.cell_size(c.level);
        [self.lo[0] + c.i as f64 * h[0], self.lo[1] + c.j as f64 * h[1]]
    }

    /// Active element containing `x`; points on shared edges go to the
    /// upper/right cell except at the domain end.
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let mut t = [(x[0] - self.lo[0]) / self.h0[0], (x[1] - self.lo[1]) / self.h0[1]];
        for d in 0..2 {
            let n = self.counts[d] as f64;
            if !(t[d] >= -1e-12 && t[d] <= n + 1e-12) {
                return None;
            }
            t[d] = t[d].clamp(0.0, n * (1.0 - 1e-15));
        }
        let mut c = CellKey::new(0, t[0].floor() as i64, t[1].floor() as i64);
        loop {
            if let Some(e) = self.element_index(c) {
                return Some(e);
            }
            if !self.omega.contains(&c) || c.level >= 40 {
                return None;
            }
            let s = (1u64 << (c.level + 1)) as f64;
            c = CellKey::new(c.level + 1, (t[0] * s).floor() as i64, (t[1] * s).floor() as i64);
        }
    }

    /// Values and physical gradients of the nonzero functions of element `e`
    /// at physical point `x`: entries `(function, value, [dx, dy])`.
    pub fn eval_active(&self, e: usize, x: [f64; 2]) -> Result<Vec<(usize, f64, [f64; 2])>> {
        let el = &self.elements[e];
        let h = self.cell_size(el.cell.level);
        let o = self.cell_origin(el.cell);
        let s = [(x[0] - o[0]) / h[0], (x[1] - o[1]) / h[1]];
        let tol = 1e-10;
        if s.iter().any(|v| *v < -tol || *v > 1.0 + tol) {
            return Err(Error::Domain(format!("point {x:?} outside element {:?}", el.cell)));
        }
        let s = [s[0].clamp(0.0, 1.0), s[1].clamp(0.0, 1.0)];
        let n2 = (self.degree + 1) * (self.degree + 1);
        let mut v = vec![0.0; n2];
        let mut gx = vec![0.0; n2];
        let mut gy = vec![0.0; n2];
        local_tensor(self.degree, s, 0, 0, &mut v);
        local_tensor(self.degree, s, 1, 0, &mut gx);
        local_tensor(self.degree, s, 0, 1, &mut gy);
        Ok(el
            .funcs
            .iter()
            .enumerate()
            .map(|(r, &f)| {
                let row = &el.coeffs[r * n2..(r + 1) * n2];
                let dot = |w: &[f64]| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                (f, dot(&v), [dot(&gx) / h[0], dot(&gy) / h[1]])
            })
            .collect())
    }

    /// Evaluation at any point of the mesh.
    pub fn eval_point(&self, x: [f64; 2]) -> Result<Vec<(usize, f64, [f64; 2])>> {
        let e = self.locate(x).ok_or_else(|| Error::Domain(format!("point {x:?} outside mesh")))?;
        self.eval_active(e, x)
    }
}
