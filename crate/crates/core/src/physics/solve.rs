use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;

use super::assemble::{assemble, Contribution, TemperatureInput};
use super::{FieldKind, Problem};
use crate::discretization::Discretization;
use crate::error::{Error, Result};

const COND_ITERATIONS: usize = 50;

/// Square sparse system in CSR form. Generally unsymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl LinearSystem {
    /// Sums local contributions in a fixed order, independent of threading.
    pub fn from_contributions(n: usize, parts: &[Contribution]) -> Self {
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(parts.iter().map(|c| c.dofs.len().pow(2)).sum());
        let mut rhs = vec![0.0; n];
        for c in parts {
            let m = c.dofs.len();
            for (i, &r) in c.dofs.iter().enumerate() {
                rhs[r] += c.f[i];
                for (j, &col) in c.dofs.iter().enumerate() {
                    trip.push((r, col, c.k[i * m + j]));
                }
            }
        }
        // stable: duplicates keep insertion order, so sums are reproducible
        trip.par_sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        LinearSystem { n, row_ptr, cols, vals, rhs, diagnostics: Vec::new() }
    }

    /// Fixes the listed unknowns to zero: their rows and columns are
    /// cleared and the diagonal set to the mean diagonal magnitude, which
    /// leaves the scale of the remaining system untouched.
    pub fn pin_zero(&mut self, dofs: &[usize]) -> Result<()> {
        if dofs.is_empty() {
            return Ok(());
        }
        let mut pinned = vec![false; self.n];
        for &d in dofs {
            pinned[d] = true;
        }
        let (mut sum, mut cnt) = (0.0, 0usize);
        for r in (0..self.n).filter(|&r| !pinned[r]) {
            sum += self.get(r, r).abs();
            cnt += 1;
        }
        let scale = if cnt > 0 && sum > 0.0 { sum / cnt as f64 } else { 1.0 };
        for r in 0..self.n {
            let mut has_diag = false;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if pinned[r] && c == r {
                    self.vals[k] = scale;
                    has_diag = true;
                } else if pinned[r] || pinned[c] {
                    self.vals[k] = 0.0;
                }
            }
            if pinned[r] {
                if !has_diag {
                    return Err(Error::Precondition(format!("unknown {r} has no diagonal entry to pin")));
                }
                self.rhs[r] = 0.0;
            }
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[row.clone()].binary_search(&c) {
            Ok(k) => self.vals[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum())
            .collect()
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k]] += self.vals[k] * x[r];
            }
        }
        y
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let amax = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut d = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d = d.max((self.vals[k] - self.get(self.cols[k], r)).abs());
            }
        }
        if amax > 0.0 { d / amax } else { 0.0 }
    }

    /// `|A x - b| / |b|`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let r: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let b: f64 = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b > 0.0 { r / b } else { r }
    }

    fn factor(&self) -> Result<faer::sparse::linalg::solvers::Lu<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, k)))
            .map(|(r, k)| Triplet { row: r, col: self.cols[k], val: self.vals[k] })
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| Error::InvalidArgument(format!("sparse matrix: {e:?}")))?;
        a.sp_lu().map_err(|e| Error::Singular(format!("factorization failed ({e:?}); {}", self.pivot_hint())))
    }

    /// Smallest diagonal magnitude, a proxy for the weakest pivot.
    fn pivot_hint(&self) -> String {
        let (i, v) = (0..self.n).map(|i| (i, self.get(i, i).abs())).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        format!("smallest |diagonal| {v:.3e} at unknown {i}; check for small cut fragments without ghost stabilization")
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let lu = self.factor()?;
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| self.rhs[i]);
        lu.solve_in_place(x.as_mut());
        let x: Vec<f64> = x.col_as_slice(0).to_vec();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(format!("non-finite solution; {}", self.pivot_hint())));
        }
        let res = self.relative_residual(&x);
        if res > 1e-6 {
            return Err(Error::Singular(format!("relative residual {res:.3e} after direct solve; {}", self.pivot_hint())));
        }
        Ok(x)
    }

    /// Estimate of the 2-norm condition number: power iteration on `A^T A`
    /// for the largest singular value and inverse iteration through the
    /// factorization for the smallest.
    pub fn condition_estimate(&self) -> Result<f64> {
        if self.n == 0 {
            return Ok(1.0);
        }
        let lu = self.factor()?;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let start: Vec<f64> = (0..self.n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        let mut v = start.clone();
        let mut smax = 0.0;
        for _ in 0..COND_ITERATIONS {
            let nv = norm(&v);
            v.iter_mut().for_each(|a| *a /= nv);
            let w = self.matvec_t(&self.matvec(&v));
            smax = norm(&w).sqrt();
            v = w;
        }
        let mut v = start;
        let mut smin_inv = 0.0;
        for _ in 0..COND_ITERATIONS {
            let nv = norm(&v);
            let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| v[i] / nv);
            // (A^T A)^{-1} v = A^{-1} A^{-T} v
            lu.solve_transpose_in_place(m.as_mut());
            lu.solve_in_place(m.as_mut());
            v = m.col_as_slice(0).to_vec();
            smin_inv = norm(&v).sqrt();
        }
        let c = smax * smin_inv;
        if !c.is_finite() {
            return Err(Error::Singular(format!("condition estimate overflowed; {}", self.pivot_hint())));
        }
        Ok(c)
    }
}

/// Thermal solve followed by the elastic solve with the resulting thermal
/// strain.
pub fn solve_staggered(disc: &Discretization, thermal: &Problem, elastic: &Problem) -> Result<(Vec<f64>, Vec<f64>)> {
    if thermal.kind != FieldKind::Thermal || elastic.kind != FieldKind::Elastic {
        return Err(Error::Sequencing("staggered solve expects a thermal then an elastic problem".into()));
    }
    let t = assemble(disc, thermal, None)?.solve()?;
    let temp = TemperatureInput { field: thermal.field, coeffs: &t };
    let u = assemble(disc, elastic, Some(temp))?.solve()?;
    Ok((t, u))
}
