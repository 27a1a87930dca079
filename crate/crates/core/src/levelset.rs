//! Level-set geometry: analytic and sampled level sets, a by-name registry
//! of analytic kinds, and the rule mapping sign patterns to phases.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

/// Scalar field whose zero contour bounds a region. Implementations should
/// behave roughly like a signed distance near the contour, since vertex
/// snapping compares |phi| against a length.
pub trait LevelSet: Send + Sync + Debug {
    fn value(&self, x: [f64; 2]) -> f64;
}

#[derive(Debug, Clone)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl LevelSet for Circle {
    fn value(&self, x: [f64; 2]) -> f64 {
        ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)).sqrt() - self.radius
    }
}

/// Axis-aligned ellipse with semi-axes `a` (x) and `b` (y).
#[derive(Debug, Clone)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub a: f64,
    pub b: f64,
}

impl LevelSet for Ellipse {
    fn value(&self, x: [f64; 2]) -> f64 {
        let u = (x[0] - self.center[0]) / self.a;
        let v = (x[1] - self.center[1]) / self.b;
        ((u * u + v * v).sqrt() - 1.0) * self.a.min(self.b)
    }
}

/// Signed distance to the line through `point` with direction angle
/// `angle`; positive on the right of the direction.
#[derive(Debug, Clone)]
pub struct HalfPlane {
    pub point: [f64; 2],
    pub angle: f64,
}

impl LevelSet for HalfPlane {
    fn value(&self, x: [f64; 2]) -> f64 {
        let (s, c) = self.angle.sin_cos();
        (x[0] - self.point[0]) * s - (x[1] - self.point[1]) * c
    }
}

/// Bilinear interpolation of vertex samples on a uniform lattice.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub lo: [f64; 2],
    pub h: [f64; 2],
    /// Vertex counts per direction.
    pub n: [usize; 2],
    pub values: Vec<f64>,
}

impl LevelSet for Sampled {
    fn value(&self, x: [f64; 2]) -> f64 {
        let mut idx = [0usize; 2];
        let mut s = [0.0; 2];
        for d in 0..2 {
            let t = ((x[d] - self.lo[d]) / self.h[d]).clamp(0.0, (self.n[d] - 1) as f64);
            let i = (t.floor() as usize).min(self.n[d] - 2);
            idx[d] = i;
            s[d] = t - i as f64;
        }
        let at = |i: usize, j: usize| self.values[j * self.n[0] + i];
        let (i, j) = (idx[0], idx[1]);
        (1.0 - s[0]) * (1.0 - s[1]) * at(i, j)
            + s[0] * (1.0 - s[1]) * at(i + 1, j)
            + (1.0 - s[0]) * s[1] * at(i, j + 1)
            + s[0] * s[1] * at(i + 1, j + 1)
    }
}

/// Reads `i, j, phi_1 ... phi_N` rows (optional header) into `N` sampled
/// level sets on the lattice with origin `lo` and spacing `h`.
pub fn read_sampled_csv<R: std::io::Read>(reader: R, lo: [f64; 2], h: [f64; 2]) -> Result<Vec<Sampled>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(format!("level-set csv: {e}")))?;
        let fields: Vec<&str> = rec.iter().collect();
        if fields.len() < 3 {
            return Err(Error::Config("level-set csv rows need i, j and at least one value".into()));
        }
        let (Ok(i), Ok(j)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) else {
            if rows.is_empty() {
                continue; // header
            }
            return Err(Error::Config(format!("bad lattice index in row {fields:?}")));
        };
        let vals = fields[2..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| Error::Config(format!("bad value {v}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((i, j, vals));
    }
    let nk = rows.first().map(|r| r.2.len()).ok_or_else(|| Error::Config("empty level-set csv".into()))?;
    let n = [rows.iter().map(|r| r.0).max().unwrap() + 1, rows.iter().map(|r| r.1).max().unwrap() + 1];
    if n[0] < 2 || n[1] < 2 || rows.len() != n[0] * n[1] {
        return Err(Error::Config("level-set csv must cover a full lattice of at least 2x2 vertices".into()));
    }
    let mut out: Vec<Sampled> = (0..nk).map(|_| Sampled { lo, h, n, values: vec![0.0; n[0] * n[1]] }).collect();
    for (i, j, v) in rows {
        if v.len() != nk {
            return Err(Error::Config("inconsistent level-set column count".into()));
        }
        for (k, val) in v.into_iter().enumerate() {
            out[k].values[j * n[0] + i] = val;
        }
    }
    Ok(out)
}

/// Level sets plus the map from sign patterns to phases. Bit `k` of a
/// pattern is set when `phi_k > 0`; zero counts as negative, so a point on
/// a contour joins the phase of the negative side.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub level_sets: Vec<Arc<dyn LevelSet>>,
    pub phase_of_bits: Vec<usize>,
    pub n_phases: usize,
}

impl Geometry {
    /// One level set: phase 0 where `phi <= 0`, phase 1 elsewhere.
    pub fn single(ls: Arc<dyn LevelSet>) -> Self {
        Geometry { level_sets: vec![ls], phase_of_bits: vec![0, 1], n_phases: 2 }
    }

    /// Everything in phase 0.
    pub fn uniform() -> Self {
        Geometry { level_sets: Vec::new(), phase_of_bits: vec![0], n_phases: 1 }
    }

    pub fn with_rule(level_sets: Vec<Arc<dyn LevelSet>>, n_phases: usize, rule: impl Fn(u32) -> usize) -> Result<Self> {
        if level_sets.len() > 16 {
            return Err(Error::InvalidArgument("at most 16 level sets".into()));
        }
        let phase_of_bits: Vec<usize> = (0..1u32 << level_sets.len()).map(rule).collect();
        if phase_of_bits.iter().any(|&p| p >= n_phases) {
            return Err(Error::InvalidArgument("phase rule returns an undeclared phase".into()));
        }
        Ok(Geometry { level_sets, phase_of_bits, n_phases })
    }

    pub fn bits(&self, x: [f64; 2]) -> u32 {
        self.level_sets.iter().enumerate().fold(0, |b, (k, ls)| if ls.value(x) > 0.0 { b | (1 << k) } else { b })
    }

    pub fn classify_point(&self, x: [f64; 2]) -> usize {
        self.phase_of_bits[self.bits(x) as usize]
    }
}

/// Builds an analytic level set from named parameters.
pub trait LevelSetKind: Named + Send + Sync {
    fn params(&self) -> &'static [&'static str];
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Arc<dyn LevelSet>>;
}

fn get(p: &BTreeMap<String, f64>, kind: &str, key: &str) -> Result<f64> {
    p.get(key).copied().ok_or_else(|| Error::Config(format!("level set '{kind}' needs parameter '{key}'")))
}

pub struct CircleKind;
impl Named for CircleKind {
    fn name(&self) -> &'static str {
        "circle"
    }
}
impl LevelSetKind for CircleKind {
    fn params(&self) -> &'static [&'static str] {
        &["cx", "cy", "r"]
    }
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Arc<dyn LevelSet>> {
        let r = get(p, "circle", "r")?;
        if r <= 0.0 {
            return Err(Error::Config("circle radius must be positive".into()));
        }
        Ok(Arc::new(Circle { center: [get(p, "circle", "cx")?, get(p, "circle", "cy")?], radius: r }))
    }
}

pub struct EllipseKind;
impl Named for EllipseKind {
    fn name(&self) -> &'static str {
        "ellipse"
    }
}
impl LevelSetKind for EllipseKind {
    fn params(&self) -> &'static [&'static str] {
        &["cx", "cy", "a", "b"]
    }
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Arc<dyn LevelSet>> {
        let (a, b) = (get(p, "ellipse", "a")?, get(p, "ellipse", "b")?);
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::Config("ellipse semi-axes must be positive".into()));
        }
        Ok(Arc::new(Ellipse { center: [get(p, "ellipse", "cx")?, get(p, "ellipse", "cy")?], a, b }))
    }
}

pub struct HalfPlaneKind;
impl Named for HalfPlaneKind {
    fn name(&self) -> &'static str {
        "half_plane"
    }
}
impl LevelSetKind for HalfPlaneKind {
    fn params(&self) -> &'static [&'static str] {
        &["px", "py", "angle"]
    }
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Arc<dyn LevelSet>> {
        Ok(Arc::new(HalfPlane {
            point: [get(p, "half_plane", "px")?, get(p, "half_plane", "py")?],
            angle: get(p, "half_plane", "angle")?,
        }))
    }
}

pub type LevelSetRegistry = Registry<dyn LevelSetKind>;

/// Registry holding the built-in analytic kinds.
pub fn level_set_registry() -> LevelSetRegistry {
    let mut r: LevelSetRegistry = Registry::new();
    r.register(Box::new(CircleKind));
    r.register(Box::new(EllipseKind));
    r.register(Box::new(HalfPlaneKind));
    r
}

impl Registry<dyn LevelSetKind> {
    pub fn build(&self, name: &str, params: &BTreeMap<String, f64>) -> Result<Arc<dyn LevelSet>> {
        self.get(name).ok_or_else(|| Error::Config(format!("unknown level set kind '{name}'")))?.build(params)
    }
}
