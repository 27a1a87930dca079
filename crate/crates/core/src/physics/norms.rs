use rayon::prelude::*;

use super::assemble::{mul3, volume_points, TemperatureInput};
use super::{Material, Plane};
use crate::discretization::Discretization;
use crate::error::Result;
use crate::quadrature::RuleSet;

/// A quadrature point with its union cell, subphase and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub cell: usize,
    pub sub: usize,
    pub x: [f64; 2],
    pub phase: usize,
}

/// Field value and gradient per component.
pub type Eval = (Vec<f64>, Vec<[f64; 2]>);

pub trait Reference: Sync {
    fn eval(&self, s: &Sample) -> Result<Eval>;
}

/// Closed-form reference `f(x, phase)`.
pub struct Analytic<F>(pub F);

impl<F> Reference for Analytic<F>
where
    F: Fn([f64; 2], usize) -> Eval + Sync,
{
    fn eval(&self, s: &Sample) -> Result<Eval> {
        Ok((self.0)(s.x, s.phase))
    }
}

/// Another discrete solution. When both discretizations share the union
/// mesh, samples are evaluated in the same cell and subphase; otherwise by
/// point location.
pub struct Discrete<'a> {
    pub disc: &'a Discretization,
    pub field: usize,
    pub coeffs: &'a [f64],
    pub same_mesh: bool,
}

impl<'a> Discrete<'a> {
    pub fn new(disc: &'a Discretization, field: usize, coeffs: &'a [f64], target: &Discretization) -> Self {
        Discrete { disc, field, coeffs, same_mesh: disc.same_union(target) }
    }
}

impl Reference for Discrete<'_> {
    fn eval(&self, s: &Sample) -> Result<Eval> {
        let f = &self.disc.fields[self.field];
        if self.same_mesh {
            f.eval_in(&self.disc.union, s.cell, s.sub, s.x, self.coeffs)
        } else {
            f.eval_at(&self.disc.union, &self.disc.mesh, s.x, Some(s.phase), self.coeffs)
        }
    }
}

/// Quadrature samples over all non-void subphases for degree `p` rules.
fn samples(disc: &Discretization, p: usize) -> Result<Vec<(Sample, f64)>> {
    let rules = RuleSet::for_degree(p)?;
    let mut out = Vec::new();
    for (s, sp) in disc.mesh.subphases.iter().enumerate() {
        if disc.void[sp.phase] {
            continue;
        }
        for (x, w) in volume_points(disc, &rules, s) {
            out.push((Sample { cell: sp.cell, sub: s, x, phase: sp.phase }, w));
        }
    }
    Ok(out)
}

/// `L2` norm and `H1` semi-norm of `reference - u_h` over all material
/// phases.
pub fn error_norms(disc: &Discretization, field: usize, coeffs: &[f64], reference: &dyn Reference) -> Result<(f64, f64)> {
    let f = &disc.fields[field];
    let pts = samples(disc, f.degree())?;
    let parts = pts
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc = (0.0, 0.0);
            for (s, w) in chunk {
                let (v, g) = f.eval_in(&disc.union, s.cell, s.sub, s.x, coeffs)?;
                let (rv, rg) = reference.eval(s)?;
                for a in 0..v.len() {
                    acc.0 += w * (rv[a] - v[a]).powi(2);
                    acc.1 += w * ((rg[a][0] - g[a][0]).powi(2) + (rg[a][1] - g[a][1]).powi(2));
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Von Mises stress of an elastic solution at a sample.
pub fn von_mises(
    disc: &Discretization,
    field: usize,
    coeffs: &[f64],
    materials: &[Material],
    plane: Plane,
    temp: Option<TemperatureInput>,
    s: &Sample,
) -> Result<f64> {
    let (_, g) = disc.fields[field].eval_in(&disc.union, s.cell, s.sub, s.x, coeffs)?;
    let m = &materials[s.phase];
    let t = match temp {
        Some(t) => disc.fields[t.field].eval_in(&disc.union, s.cell, s.sub, s.x, t.coeffs)?.0[0],
        None => m.t0,
    };
    let sth = m.thermal_stress(plane, t);
    let eps = [g[0][0], g[1][1], g[0][1] + g[1][0]];
    let sig = mul3(&m.stiffness(plane), eps);
    let (sx, sy, sxy) = (sig[0] - sth, sig[1] - sth, sig[2]);
    let sz = match plane {
        Plane::Stress => 0.0,
        Plane::Strain => m.nu * (sx + sy) - m.e * m.alpha * (t - m.t0),
    };
    Ok((0.5 * ((sx - sy).powi(2) + (sy - sz).powi(2) + (sz - sx).powi(2)) + 3.0 * sxy * sxy).sqrt())
}

/// `L2` error of a scalar stress measure along all material interfaces,
/// integrated on both sides.
pub fn von_mises_interface_error(
    disc: &Discretization,
    p: usize,
    approx: &(dyn Fn(&Sample) -> Result<f64> + Sync),
    reference: &(dyn Fn(&Sample) -> Result<f64> + Sync),
) -> Result<f64> {
    let rules = RuleSet::for_degree(p)?;
    let parts = disc
        .mesh
        .interfaces
        .par_iter()
        .filter(|s| !disc.void[s.phase_m] && !disc.void[s.phase_n])
        .map(|seg| {
            let len = crate::cut::seg_length(seg.a, seg.b);
            let mut acc = 0.0;
            for (t, w) in rules.line.points.iter().zip(&rules.line.weights) {
                let x = [seg.a[0] + t * (seg.b[0] - seg.a[0]), seg.a[1] + t * (seg.b[1] - seg.a[1])];
                for (cell, sub, phase) in [(seg.cell, seg.sub_m, seg.phase_m), (seg.cell_n, seg.sub_n, seg.phase_n)] {
                    let s = Sample { cell, sub, x, phase };
                    acc += w * len * (approx(&s)? - reference(&s)?).powi(2);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}
