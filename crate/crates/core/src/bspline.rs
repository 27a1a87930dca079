//! Uniform B-splines on dyadic lattices.
//!
//! Knots are implicit: at level `l` the knot spacing is `h0 / 2^l` and
//! function `k` lives on cells `k - p ..= k` of that level. On a grid with
//! `n` cells per direction there are `n + p` functions per direction; the
//! ones near the grid boundary are clipped rather than clamped.

use crate::error::{Error, Result};

/// Maximum degree supported by the fixed-size element tables.
pub const MAX_DEGREE: usize = 4;

/// Cardinal B-spline `M_p` supported on `[0, p+1]`, or its `d`-th derivative.
pub fn cardinal(p: usize, t: f64, d: usize) -> f64 {
    if d > p {
        // the (p+1)-th derivative is a sum of Dirac masses; zero a.e.
        return 0.0;
    }
    if d > 0 {
        return cardinal(p - 1, t, d - 1) - cardinal(p - 1, t - 1.0, d - 1);
    }
    if t < 0.0 || t >= (p + 1) as f64 {
        return 0.0;
    }
    if p == 0 {
        return 1.0;
    }
    let pf = p as f64;
    t / pf * cardinal(p - 1, t, 0) + (pf + 1.0 - t) / pf * cardinal(p - 1, t - 1.0, 0)
}

/// Values (or derivatives in local units) of the `p+1` functions that are
/// nonzero on a cell, at local coordinate `s` in `[0, 1]`. Entry `a` belongs
/// to function `cell + a`.
pub fn local_values(p: usize, s: f64, d: usize, out: &mut [f64]) {
    // s = 1 must still see the cell's own polynomial pieces
    let s = s.clamp(0.0, 1.0 - f64::EPSILON);
    for (a, o) in out.iter_mut().enumerate().take(p + 1) {
        *o = cardinal(p, s + (p - a) as f64, d);
    }
}

/// `2^-p * binom(p+1, j)` for `j = 0..=p+1`.
pub fn subdivision_coefficients(p: usize) -> Vec<f64> {
    let scale = 0.5f64.powi(p as i32);
    let mut c = Vec::with_capacity(p + 2);
    let mut b = 1.0;
    for j in 0..=p + 1 {
        c.push(scale * b);
        b = b * (p + 1 - j) as f64 / (j + 1) as f64;
    }
    c
}

/// 1D local subdivision matrix for child `b` (0 = left, 1 = right):
/// `N^l_{c+a} = sum_a' S[a][a'] N^{l+1}_{2c+b+a'}` on the child cell.
pub fn local_subdivision_1d(p: usize, b: usize) -> Vec<Vec<f64>> {
    let c = subdivision_coefficients(p);
    let n = p + 1;
    let mut s = vec![vec![0.0; n]; n];
    for (a, row) in s.iter_mut().enumerate() {
        for (a2, v) in row.iter_mut().enumerate() {
            let j = b as i64 + a2 as i64 - 2 * a as i64 + p as i64;
            if (0..=p as i64 + 1).contains(&j) {
                *v = c[j as usize];
            }
        }
    }
    s
}

/// 2D local subdivision matrix for child position `pos = bx + 2 by`, with
/// local function index `a = ax + (p+1) ay`.
pub fn local_subdivision_2d(p: usize, pos: usize) -> Vec<f64> {
    let n = p + 1;
    let sx = local_subdivision_1d(p, pos & 1);
    let sy = local_subdivision_1d(p, pos >> 1);
    let mut s = vec![0.0; n * n * n * n];
    for ay in 0..n {
        for ax in 0..n {
            let a = ax + n * ay;
            for by in 0..n {
                for bx in 0..n {
                    s[a * n * n + bx + n * by] = sx[ax][bx] * sy[ay][by];
                }
            }
        }
    }
    s
}

/// Description of one uniform tensor grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSplineGrid {
    pub degree: [usize; 2],
    pub level: u32,
    pub origin: [f64; 2],
    /// Level-0 cell size.
    pub spacing: [f64; 2],
    /// Level-0 cell counts.
    pub counts: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorIndex {
    pub level: u32,
    pub ij: [i64; 2],
}

impl UniformSplineGrid {
    pub fn new(
        degree: [usize; 2],
        level: u32,
        origin: [f64; 2],
        spacing: [f64; 2],
        counts: [usize; 2],
    ) -> Result<Self> {
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        if counts.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("grid counts must be nonzero".into()));
        }
        if degree.iter().any(|&p| p == 0 || p > MAX_DEGREE) {
            return Err(Error::InvalidArgument(format!(
                "degree must lie in 1..={MAX_DEGREE}"
            )));
        }
        Ok(UniformSplineGrid { degree, level, origin, spacing, counts })
    }

    pub fn cell_size(&self, dir: usize) -> f64 {
        self.spacing[dir] / (1u64 << self.level) as f64
    }

    pub fn cells(&self, dir: usize) -> usize {
        self.counts[dir] << self.level
    }

    pub fn functions(&self, dir: usize) -> usize {
        self.cells(dir) + self.degree[dir]
    }

    fn to_lattice(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let mut t = [0.0; 2];
        for d in 0..2 {
            t[d] = (x[d] - self.origin[d]) / self.cell_size(d);
            let n = self.cells(d) as f64;
            if !(t[d] >= -1e-12 && t[d] <= n + 1e-12) {
                return Err(Error::Domain(format!("point {x:?} outside grid")));
            }
            t[d] = t[d].clamp(0.0, n);
        }
        Ok(t)
    }

    /// Univariate function `k` along `dir` (or its derivative, physical units).
    pub fn eval_univariate(&self, dir: usize, k: i64, x: f64, deriv: usize) -> Result<f64> {
        let p = self.degree[dir];
        if deriv > p + 1 {
            return Err(Error::Unsupported(format!("derivative order {deriv} > p+1")));
        }
        if k < 0 || k as usize >= self.functions(dir) {
            return Err(Error::Domain(format!("function index {k} out of range")));
        }
        let h = self.cell_size(dir);
        let n = self.cells(dir) as f64;
        let t = (x - self.origin[dir]) / h;
        if !(t >= -1e-12 && t <= n + 1e-12) {
            return Err(Error::Domain(format!("coordinate {x} outside grid")));
        }
        // right grid end belongs to the last cell
        let t = t.clamp(0.0, n * (1.0 - f64::EPSILON));
        let v = cardinal(p, t - k as f64 + p as f64, deriv);
        Ok(v / h.powi(deriv as i32))
    }

    /// Tensor-product function value (`grad_order = 0`), gradient (`1`) or
    /// all `grad_order`-th partials ordered by the number of y-derivatives.
    pub fn eval_tensor(&self, idx: TensorIndex, x: [f64; 2], grad_order: usize) -> Result<Vec<f64>> {
        if grad_order > self.degree[0].max(self.degree[1]) + 1 {
            return Err(Error::Unsupported(format!("gradient order {grad_order}")));
        }
        if idx.level != self.level {
            return Err(Error::Domain("tensor index level differs from grid level".into()));
        }
        self.to_lattice(x)?;
        let mut out = Vec::with_capacity(grad_order + 1);
        for dy in 0..=grad_order {
            let dx = grad_order - dy;
            let vx = self.eval_univariate(0, idx.ij[0], x[0], dx)?;
            let vy = self.eval_univariate(1, idx.ij[1], x[1], dy)?;
            out.push(vx * vy);
        }
        Ok(out)
    }

    /// Nonzero functions on the cell containing `x`, with their values.
    pub fn element_values(&self, x: [f64; 2]) -> Result<Vec<(TensorIndex, f64)>> {
        let t = self.to_lattice(x)?;
        let mut cell = [0i64; 2];
        let mut s = [0.0; 2];
        for d in 0..2 {
            let c = (t[d].floor() as i64).min(self.cells(d) as i64 - 1);
            cell[d] = c;
            s[d] = t[d] - c as f64;
        }
        let (px, py) = (self.degree[0], self.degree[1]);
        let mut bx = [0.0; MAX_DEGREE + 1];
        let mut by = [0.0; MAX_DEGREE + 1];
        local_values(px, s[0], 0, &mut bx);
        local_values(py, s[1], 0, &mut by);
        let mut out = Vec::with_capacity((px + 1) * (py + 1));
        for ay in 0..=py {
            for ax in 0..=px {
                out.push((
                    TensorIndex { level: self.level, ij: [cell[0] + ax as i64, cell[1] + ay as i64] },
                    bx[ax] * by[ay],
                ));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(p: usize) -> UniformSplineGrid {
        UniformSplineGrid::new([p, p], 0, [0.0, 0.0], [1.0, 1.0], [8, 8]).unwrap()
    }

    // Cox-de Boor by hand for p = 2: M_2(t) = t^2/2, (-2t^2+6t-3)/2, (3-t)^2/2
    fn quadratic_by_hand(t: f64) -> f64 {
        if (0.0..1.0).contains(&t) {
            t * t / 2.0
        } else if (1.0..2.0).contains(&t) {
            (-2.0 * t * t + 6.0 * t - 3.0) / 2.0
        } else if (2.0..3.0).contains(&t) {
            (3.0 - t) * (3.0 - t) / 2.0
        } else {
            0.0
        }
    }

    #[test]
    fn hat_apex() {
        let g = unit_grid(1);
        // function k=3 covers cells 2..=3, apex at x = 3
        assert_eq!(g.eval_univariate(0, 3, 3.0, 0).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_midpoint() {
        let g = unit_grid(2);
        // function k=4 covers cells 2..=4; middle span is cell 3
        let v = g.eval_univariate(0, 4, 3.5, 0).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!((v - quadratic_by_hand(1.5)).abs() < 1e-15);
        for i in 0..300 {
            let t = i as f64 * 0.01;
            assert!((cardinal(2, t, 0) - quadratic_by_hand(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_values() {
        let g = unit_grid(1);
        let v = g.eval_tensor(TensorIndex { level: 0, ij: [2, 5] }, [2.0, 5.0], 0).unwrap();
        assert_eq!(v[0], 1.0);
        let g = unit_grid(2);
        let v = g.eval_tensor(TensorIndex { level: 0, ij: [4, 4] }, [3.5, 3.5], 0).unwrap();
        assert!((v[0] - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn subdivision_values() {
        assert_eq!(subdivision_coefficients(1), vec![0.5, 1.0, 0.5]);
        assert_eq!(subdivision_coefficients(2), vec![0.25, 0.75, 0.75, 0.25]);
        for p in 0..6 {
            let s: f64 = subdivision_coefficients(p).iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn errors() {
        let g = unit_grid(2);
        assert!(g.eval_univariate(0, -1, 1.0, 0).is_err());
        assert!(g.eval_univariate(0, 10, 1.0, 0).is_err());
        assert!(g.eval_univariate(0, 2, 9.0, 0).is_err());
        assert!(g.eval_univariate(0, 2, 1.0, 4).is_err());
        let idx = TensorIndex { level: 0, ij: [2, 2] };
        assert!(g.eval_tensor(idx, [1.0, 1.0], 4).is_err());
        assert!(UniformSplineGrid::new([2, 2], 0, [0.0; 2], [0.0, 1.0], [1, 1]).is_err());
    }

    #[test]
    fn local_subdivision_matches_global() {
        // the local matrices must reproduce parent functions on each child
        for p in 1..=3 {
            for b in 0..2 {
                let s = local_subdivision_1d(p, b);
                for i in 0..=10 {
                    let sc = i as f64 / 10.0;
                    let x = (b as f64 + sc) / 2.0;
                    let mut parent = [0.0; MAX_DEGREE + 1];
                    let mut child = [0.0; MAX_DEGREE + 1];
                    local_values(p, x, 0, &mut parent);
                    local_values(p, sc, 0, &mut child);
                    for a in 0..=p {
                        let r: f64 = (0..=p).map(|a2| s[a][a2] * child[a2]).sum();
                        assert!((r - parent[a]).abs() < 1e-13, "p={p} b={b} a={a}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_and_nonnegativity(p in 1usize..=3, x in 0.0f64..8.0, y in 0.0f64..8.0) {
            let g = unit_grid(p);
            let vals = g.element_values([x, y]).unwrap();
            let s: f64 = vals.iter().map(|v| v.1).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(vals.iter().all(|v| v.1 >= 0.0));
            let mut gs = [0.0; 2];
            for (idx, _) in &vals {
                let gr = g.eval_tensor(*idx, [x, y], 1).unwrap();
                gs[0] += gr[0];
                gs[1] += gr[1];
            }
            prop_assert!(gs[0].abs() < 1e-10 && gs[1].abs() < 1e-10);
        }

        #[test]
        fn subdivision_identity(p in 1usize..=3, t in -1.0f64..5.0) {
            let c = subdivision_coefficients(p);
            let lhs = cardinal(p, t, 0);
            let rhs: f64 = c.iter().enumerate().map(|(j, cj)| cj * cardinal(p, 2.0 * t - j as f64, 0)).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn derivative_matches_fd(p in 1usize..=3, k in 3i64..8, x in 0.3f64..7.7) {
            let g = unit_grid(p);
            // keep clear of knots where higher pieces switch
            prop_assume!((x - x.round()).abs() > 1e-4);
            let e = 1e-6;
            let fd = (g.eval_univariate(0, k, x + e, 0).unwrap() - g.eval_univariate(0, k, x - e, 0).unwrap()) / (2.0 * e);
            let an = g.eval_univariate(0, k, x, 1).unwrap();
            prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0));
        }
    }
}
