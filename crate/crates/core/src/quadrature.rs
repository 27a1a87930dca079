//! Quadrature rules mapped onto unit reference domains.

use fenris_quadrature::{polyquad, univariate};

use crate::error::{Error, Result};

/// Points and weights; weights sum to the reference measure.
#[derive(Debug, Clone)]
pub struct Rule2 {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Rule1 {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Symmetric rule on the triangle `(0,0) (1,0) (0,1)` exact for
/// polynomials of total degree `strength`.
pub fn triangle(strength: usize) -> Result<Rule2> {
    let (w, p) = polyquad::triangle(strength).map_err(|e| Error::Unsupported(format!("triangle rule: {e:?}")))?;
    Ok(Rule2 {
        points: p.iter().map(|x| [(x[0] + 1.0) / 2.0, (x[1] + 1.0) / 2.0]).collect(),
        weights: w.iter().map(|v| v / 4.0).collect(),
    })
}

/// `n`-point Gauss rule on `[0,1]`.
pub fn gauss(n: usize) -> Rule1 {
    let (w, p) = univariate::gauss(n);
    Rule1 { points: p.iter().map(|x| (x[0] + 1.0) / 2.0).collect(), weights: w.iter().map(|v| v / 2.0).collect() }
}

/// Tensor Gauss rule with `n` points per direction on `[0,1]^2`.
pub fn tensor_gauss(n: usize) -> Rule2 {
    let g = gauss(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (yj, wj) in g.points.iter().zip(&g.weights) {
        for (xi, wi) in g.points.iter().zip(&g.weights) {
            points.push([*xi, *yj]);
            weights.push(wi * wj);
        }
    }
    Rule2 { points, weights }
}

/// Rules used for a field discretization of degree `p`.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub tri: Rule2,
    pub quad: Rule2,
    pub line: Rule1,
}

impl RuleSet {
    pub fn for_degree(p: usize) -> Result<Self> {
        Ok(RuleSet { tri: triangle(2 * p + 2)?, quad: tensor_gauss(p + 2), line: gauss(p + 2) })
    }
}
