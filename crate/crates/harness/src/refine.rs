//! Local refinement criteria and the per-step refinement schedule.

use std::collections::BTreeMap;

use thbx_core::levelset::Geometry;
use thbx_core::polytree::{CellKey, PolyTreeForest};
use thbx_core::registry::{Named, Registry};
use thbx_core::{Error, Result};

use crate::config::StudyConfig;

/// Decides whether a cell with corners `lo`, `hi` gets refined.
pub trait Criterion: Send + Sync {
    fn flag(&self, geom: &Geometry, lo: [f64; 2], hi: [f64; 2]) -> bool;
}

/// Builds a criterion from named parameters.
pub trait CriterionKind: Named + Send + Sync {
    fn params(&self) -> &'static [&'static str];
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Box<dyn Criterion>>;
}

pub type CriterionRegistry = Registry<dyn CriterionKind>;

pub fn criterion_registry() -> CriterionRegistry {
    let mut r: CriterionRegistry = Registry::new();
    r.register(Box::new(InterfaceBandKind));
    r.register(Box::new(BoxKind));
    r.register(Box::new(BoundaryDistanceKind));
    r
}

fn get(p: &BTreeMap<String, f64>, kind: &str, key: &str) -> Result<f64> {
    p.get(key).copied().ok_or_else(|| Error::Config(format!("criterion '{kind}' needs parameter '{key}'")))
}

fn check_keys(p: &BTreeMap<String, f64>, kind: &str, allowed: &[&str]) -> Result<()> {
    match p.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!("criterion '{kind}' has no parameter '{k}'"))),
        None => Ok(()),
    }
}

fn center(lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]
}

fn diameter(lo: [f64; 2], hi: [f64; 2]) -> f64 {
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

/// `|phi(center)| < c h` for one level set (or any, when `level_set` is
/// absent), `h` being the cell diameter.
pub struct InterfaceBand {
    pub c: f64,
    pub level_set: Option<usize>,
}

impl Criterion for InterfaceBand {
    fn flag(&self, geom: &Geometry, lo: [f64; 2], hi: [f64; 2]) -> bool {
        let (x, h) = (center(lo, hi), diameter(lo, hi));
        geom.level_sets
            .iter()
            .enumerate()
            .filter(|(k, _)| self.level_set.is_none_or(|l| l == *k))
            .any(|(_, ls)| ls.value(x).abs() < self.c * h)
    }
}

struct InterfaceBandKind;
impl Named for InterfaceBandKind {
    fn name(&self) -> &'static str {
        "interface_band"
    }
    fn describe(&self) -> &'static str {
        "cells whose center lies within c times their diameter of a level-set contour"
    }
}
impl CriterionKind for InterfaceBandKind {
    fn params(&self) -> &'static [&'static str] {
        &["c", "level_set"]
    }
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Box<dyn Criterion>> {
        check_keys(p, self.name(), self.params())?;
        let c = p.get("c").copied().unwrap_or(2.0);
        if !(c > 0.0) {
            return Err(Error::Config("interface_band: c must be positive".into()));
        }
        let level_set = match p.get("level_set") {
            Some(&v) if v >= 0.0 && v.fract() == 0.0 => Some(v as usize),
            Some(v) => return Err(Error::Config(format!("interface_band: level_set {v} is not an index"))),
            None => None,
        };
        Ok(Box::new(InterfaceBand { c, level_set }))
    }
}

/// Cells overlapping the closed box `[x0, x1] x [y0, y1]`.
pub struct InBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Criterion for InBox {
    fn flag(&self, _: &Geometry, lo: [f64; 2], hi: [f64; 2]) -> bool {
        lo[0] <= self.hi[0] && hi[0] >= self.lo[0] && lo[1] <= self.hi[1] && hi[1] >= self.lo[1]
    }
}

struct BoxKind;
impl Named for BoxKind {
    fn name(&self) -> &'static str {
        "box"
    }
    fn describe(&self) -> &'static str {
        "cells overlapping an axis-aligned box"
    }
}
impl CriterionKind for BoxKind {
    fn params(&self) -> &'static [&'static str] {
        &["x0", "y0", "x1", "y1"]
    }
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Box<dyn Criterion>> {
        check_keys(p, self.name(), self.params())?;
        let n = self.name();
        let b = InBox { lo: [get(p, n, "x0")?, get(p, n, "y0")?], hi: [get(p, n, "x1")?, get(p, n, "y1")?] };
        if !(b.hi[0] >= b.lo[0] && b.hi[1] >= b.lo[1]) {
            return Err(Error::Config("box: x1 >= x0 and y1 >= y0 required".into()));
        }
        Ok(Box::new(b))
    }
}

/// Cells whose center lies within `c` diameters of the segment
/// `(x0, y0)-(x1, y1)`; a point when both ends coincide.
pub struct SegmentDistance {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: f64,
}

impl SegmentDistance {
    pub fn distance(&self, x: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = if l2 > 0.0 { (((x[0] - self.a[0]) * d[0] + (x[1] - self.a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let q = [self.a[0] + t * d[0], self.a[1] + t * d[1]];
        ((x[0] - q[0]).powi(2) + (x[1] - q[1]).powi(2)).sqrt()
    }
}

impl Criterion for SegmentDistance {
    fn flag(&self, _: &Geometry, lo: [f64; 2], hi: [f64; 2]) -> bool {
        self.distance(center(lo, hi)) < self.c * diameter(lo, hi)
    }
}

struct BoundaryDistanceKind;
impl Named for BoundaryDistanceKind {
    fn name(&self) -> &'static str {
        "boundary_distance"
    }
    fn describe(&self) -> &'static str {
        "cells within c times their diameter of a boundary segment or point"
    }
}
impl CriterionKind for BoundaryDistanceKind {
    fn params(&self) -> &'static [&'static str] {
        &["x0", "y0", "x1", "y1", "c"]
    }
    fn build(&self, p: &BTreeMap<String, f64>) -> Result<Box<dyn Criterion>> {
        check_keys(p, self.name(), self.params())?;
        let n = self.name();
        let c = p.get("c").copied().unwrap_or(2.0);
        if !(c > 0.0) {
            return Err(Error::Config("boundary_distance: c must be positive".into()));
        }
        Ok(Box::new(SegmentDistance { a: [get(p, n, "x0")?, get(p, n, "y0")?], b: [get(p, n, "x1")?, get(p, n, "y1")?], c }))
    }
}

/// Refines every active cell of `ai` once.
pub fn refine_uniform(forest: &mut PolyTreeForest, ai: usize, buffer: usize) -> Result<()> {
    let flags = forest.active_mesh(ai)?;
    forest.refine_for_ai(ai, &flags, buffer, false)?;
    Ok(())
}

/// One local pass: refines the active cells of `ai` the criterion flags.
/// Returns the number of flagged cells before the buffer closure.
pub fn refine_pass(forest: &mut PolyTreeForest, ai: usize, buffer: usize, geom: &Geometry, crit: &dyn Criterion) -> Result<usize> {
    let flags: Vec<CellKey> = forest
        .active_mesh(ai)?
        .into_iter()
        .filter(|&c| {
            let (lo, hi) = forest.cell_bounds(c);
            crit.flag(geom, lo, hi)
        })
        .collect();
    if !flags.is_empty() {
        forest.refine_for_ai(ai, &flags, buffer, false)?;
    }
    Ok(flags.len())
}

/// Forest for refinement step `step`, plus the activation index of the
/// geometry-only union level if one is configured.
pub fn build_forest(cfg: &StudyConfig, step: usize, geom: &Geometry, criteria: &CriterionRegistry) -> Result<(PolyTreeForest, Option<usize>)> {
    let scale = if cfg.mesh.base_doubling { 1usize << step } else { 1 };
    let ais = cfg.field_ais();
    let geom_ai = cfg.mesh.union_level.map(|_| ais.last().copied().unwrap_or(0) + 1);
    let n_ai = geom_ai.map_or(ais.last().copied().unwrap_or(0) + 1, |g| g + 1);
    let mut forest = PolyTreeForest::init_base(cfg.mesh.base[0] * scale, cfg.mesh.base[1] * scale, cfg.mesh.lo, cfg.mesh.hi, n_ai)?;
    let buffer = cfg.buffer();
    for &ai in &ais {
        let f = cfg.fields.iter().find(|f| f.ai == ai).expect("ai taken from the fields");
        for _ in 0..f.uniform.at(step) {
            refine_uniform(&mut forest, ai, buffer)?;
        }
        let rules: Vec<(Box<dyn Criterion>, u32)> = f
            .local
            .iter()
            .map(|r| Ok((criteria.require(&r.criterion)?.build(&r.params)?, r.passes.at(step))))
            .collect::<Result<_>>()?;
        let passes = rules.iter().map(|r| r.1).max().unwrap_or(0);
        for pass in 0..passes {
            for (crit, n) in &rules {
                if pass < *n {
                    refine_pass(&mut forest, ai, buffer, geom, crit.as_ref())?;
                }
            }
        }
    }
    if let (Some(g), Some(level)) = (geom_ai, cfg.mesh.union_level) {
        for _ in 0..level {
            refine_uniform(&mut forest, g, buffer)?;
        }
    }
    Ok((forest, geom_ai))
}
