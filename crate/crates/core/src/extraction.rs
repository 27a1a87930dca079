//! Lagrange and h-refinement extraction operators.
//!
//! A field's THB functions restricted to a union cell are written as
//! `B_k(xi) = sum_i T_ik L_i(xi)` with equispaced tensor Lagrange shapes
//! `L_i` of the field degree. Node order follows the Exodus quadrilateral
//! convention: corners counter-clockwise, then edge nodes, then interior
//! nodes ordered the same way recursively.

use crate::error::{Error, Result};
use crate::thb::{local_tensor, ThbBasis};

/// Deepest descent chain accepted when composing operators.
pub const MAX_CHAIN: usize = 40;

/// Node lattice positions `(ix, iy)`, `0..=p`, in Exodus order.
pub fn lagrange_nodes(p: usize) -> Vec<[usize; 2]> {
    fn ring(lo: usize, hi: usize, out: &mut Vec<[usize; 2]>) {
        if lo > hi {
            return;
        }
        if lo == hi {
            out.push([lo, lo]);
            return;
        }
        out.extend([[lo, lo], [hi, lo], [hi, hi], [lo, hi]]);
        out.extend((lo + 1..hi).map(|i| [i, lo]));
        out.extend((lo + 1..hi).map(|j| [hi, j]));
        out.extend((lo + 1..hi).rev().map(|i| [i, hi]));
        out.extend((lo + 1..hi).rev().map(|j| [lo, j]));
        ring(lo + 1, hi - 1, out);
    }
    let mut out = Vec::with_capacity((p + 1) * (p + 1));
    ring(0, p, &mut out);
    out
}

/// 1D Lagrange polynomials on `[0,1]` with nodes `m/p`, stored as monomial
/// coefficients so derivatives of any order are exact.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub p: usize,
    coeffs: Vec<Vec<f64>>,
}

impl Lagrange1d {
    pub fn new(p: usize) -> Self {
        let nodes: Vec<f64> = (0..=p).map(|m| m as f64 / p as f64).collect();
        let coeffs = (0..=p)
            .map(|m| {
                let mut c = vec![1.0];
                let mut denom = 1.0;
                for (q, &tq) in nodes.iter().enumerate() {
                    if q == m {
                        continue;
                    }
                    // multiply by (t - tq)
                    let mut n = vec![0.0; c.len() + 1];
                    for (d, &cd) in c.iter().enumerate() {
                        n[d + 1] += cd;
                        n[d] -= tq * cd;
                    }
                    c = n;
                    denom *= nodes[m] - tq;
                }
                c.iter().map(|v| v / denom).collect()
            })
            .collect();
        Lagrange1d { p, coeffs }
    }

    /// `d`-th derivative of polynomial `m` at `t`.
    pub fn eval(&self, m: usize, t: f64, d: usize) -> f64 {
        let c = &self.coeffs[m];
        let mut s = 0.0;
        for k in (d..c.len()).rev() {
            let mut f = 1.0;
            for r in 0..d {
                f *= (k - r) as f64;
            }
            s = s * t + c[k] * f;
        }
        s
    }
}

/// Tensor Lagrange shapes of one degree plus the four h-refinement tables.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pub p: usize,
    pub nodes: Vec<[usize; 2]>,
    pub l1: Lagrange1d,
    /// `href[pos][i * n + j] = L_j(child node i)` for child `pos = bx + 2 by`.
    pub href: [Vec<f64>; 4],
}

impl LagrangeBasis {
    pub fn new(p: usize) -> Self {
        let nodes = lagrange_nodes(p);
        let l1 = Lagrange1d::new(p);
        let n = nodes.len();
        let mut href: [Vec<f64>; 4] = Default::default();
        for (pos, tab) in href.iter_mut().enumerate() {
            let (bx, by) = ((pos & 1) as f64, (pos >> 1) as f64);
            *tab = vec![0.0; n * n];
            for (i, ni) in nodes.iter().enumerate() {
                let xi = [(bx + ni[0] as f64 / p as f64) / 2.0, (by + ni[1] as f64 / p as f64) / 2.0];
                for (j, nj) in nodes.iter().enumerate() {
                    tab[i * n + j] = l1.eval(nj[0], xi[0], 0) * l1.eval(nj[1], xi[1], 0);
                }
            }
        }
        LagrangeBasis { p, nodes, l1, href }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_coord(&self, i: usize) -> [f64; 2] {
        [self.nodes[i][0] as f64 / self.p as f64, self.nodes[i][1] as f64 / self.p as f64]
    }

    /// Mixed partial `d^(dx+dy)/dx^dx dy^dy` of every shape at local `xi`.
    pub fn eval_all(&self, xi: [f64; 2], dx: usize, dy: usize, out: &mut [f64]) {
        for (i, nd) in self.nodes.iter().enumerate() {
            out[i] = self.l1.eval(nd[0], xi[0], dx) * self.l1.eval(nd[1], xi[1], dy);
        }
    }
}

/// Dense extraction operator of one field on one cell: `t` holds
/// `n_nodes x funcs.len()` entries row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub funcs: Vec<usize>,
    pub t: Vec<f64>,
}

impl Extraction {
    pub fn n_funcs(&self) -> usize {
        self.funcs.len()
    }

    /// Contract Lagrange shape values with the operator: `out_k = sum_i w_i T_ik`.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let nf = self.funcs.len();
        out[..nf].iter_mut().for_each(|v| *v = 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let row = &self.t[i * nf..(i + 1) * nf];
            for k in 0..nf {
                out[k] += wi * row[k];
            }
        }
    }
}

/// `T^L_jk = B_k(xi_j)` on active element `e` of `basis`.
pub fn lagrange_extraction(basis: &ThbBasis, e: usize, lag: &LagrangeBasis) -> Extraction {
    let el = &basis.elements[e];
    let p = basis.degree;
    let n2 = (p + 1) * (p + 1);
    let nf = el.funcs.len();
    let n = lag.n();
    let mut t = vec![0.0; n * nf];
    let mut loc = vec![0.0; n2];
    for j in 0..n {
        local_tensor(p, lag.node_coord(j), 0, 0, &mut loc);
        for k in 0..nf {
            let row = &el.coeffs[k * n2..(k + 1) * n2];
            t[j * nf + k] = row.iter().zip(&loc).map(|(a, b)| a * b).sum();
        }
    }
    Extraction { funcs: el.funcs.clone(), t }
}

/// The h-refinement table for child `pos`.
pub fn href_extraction_table(pos: usize, lag: &LagrangeBasis) -> Result<&[f64]> {
    lag.href.get(pos).map(|v| v.as_slice()).ok_or_else(|| Error::InvalidArgument(format!("child position {pos}")))
}

/// `T = T^h_cn ... T^h_c1 T^L` for a cell reached from element `e` by the
/// child positions in `chain` (outermost first).
pub fn compose_extraction(basis: &ThbBasis, e: usize, chain: &[u8], lag: &LagrangeBasis) -> Result<Extraction> {
    if chain.len() > MAX_CHAIN {
        return Err(Error::InvalidArgument(format!("extraction chain of depth {} too deep", chain.len())));
    }
    if lag.p != basis.degree {
        return Err(Error::InvalidArgument("Lagrange degree differs from basis degree".into()));
    }
    let mut ex = lagrange_extraction(basis, e, lag);
    let n = lag.n();
    let nf = ex.funcs.len();
    for &pos in chain {
        let th = href_extraction_table(pos as usize, lag)?;
        let mut next = vec![0.0; n * nf];
        for i in 0..n {
            for j in 0..n {
                let a = th[i * n + j];
                if a == 0.0 {
                    continue;
                }
                for k in 0..nf {
                    next[i * nf + k] += a * ex.t[j * nf + k];
                }
            }
        }
        ex.t = next;
    }
    Ok(ex)
}
