//! Built-in studies and the helpers they share.

mod bar;
mod conditioning;
mod elliptic;
mod lshape;
mod plate;

use std::sync::Arc;
use std::time::Instant;

use thbx_core::discretization::{Discretization, FieldSpec};
use thbx_core::levelset::{Geometry, LevelSet};
use thbx_core::physics::Material;
use thbx_core::registry::{Named, Registry};
use thbx_core::{Error, Result};

pub use bar::Bar2d;
pub use conditioning::GhostConditioning;
pub use elliptic::EllipticHole;
pub use lshape::LShape;
pub use plate::TwoMaterialPlate;

use crate::config::StudyConfig;
use crate::refine::build_forest;
use crate::report::{ExportTriangle, FieldExport, StudyReport};
use crate::Strategies;

pub struct StudyOutput {
    pub report: StudyReport,
    /// Fields of the last step, when requested.
    pub export: Option<FieldExport>,
}

pub trait Study: Named + Send + Sync {
    fn default_config(&self) -> StudyConfig;

    /// Named alternative configurations, e.g. local instead of uniform
    /// refinement.
    fn variants(&self) -> Vec<(&'static str, StudyConfig)> {
        Vec::new()
    }

    /// Study-specific checks on top of the schema validation.
    fn check(&self, _cfg: &StudyConfig) -> Vec<String> {
        Vec::new()
    }

    fn run(&self, cfg: &StudyConfig, s: &Strategies) -> Result<StudyOutput>;
}

pub type StudyRegistry = Registry<dyn Study>;

pub fn study_registry() -> StudyRegistry {
    let mut r: StudyRegistry = Registry::new();
    r.register(Box::new(Bar2d));
    r.register(Box::new(LShape));
    r.register(Box::new(EllipticHole));
    r.register(Box::new(TwoMaterialPlate));
    r.register(Box::new(GhostConditioning));
    r
}

/// Unknowns per node: `u` is a displacement, everything else a scalar.
pub fn components(field: &str) -> usize {
    if field == "u" {
        2
    } else {
        1
    }
}

pub(crate) fn level_sets(cfg: &StudyConfig, s: &Strategies) -> Result<Vec<Arc<dyn LevelSet>>> {
    cfg.geometry.iter().map(|g| s.level_sets.build(&g.kind, &g.params)).collect()
}

/// One level set: phase 0 where `phi <= 0`.
pub(crate) fn single_geometry(cfg: &StudyConfig, s: &Strategies) -> Result<Geometry> {
    let mut ls = level_sets(cfg, s)?;
    if ls.len() != 1 {
        return Err(Error::Config(format!("study '{}' expects exactly one level set", cfg.study)));
    }
    Ok(Geometry::single(ls.remove(0)))
}

pub(crate) fn materials(cfg: &StudyConfig) -> Vec<Material> {
    cfg.materials.iter().map(|m| m.material()).collect()
}

pub(crate) fn void_flags(cfg: &StudyConfig) -> Vec<bool> {
    cfg.materials.iter().map(|m| m.void).collect()
}

/// Discretization of refinement step `step` and its largest element edge.
pub(crate) fn discretize(cfg: &StudyConfig, step: usize, geom: Geometry, s: &Strategies) -> Result<(Discretization, f64)> {
    let (forest, geom_ai) = build_forest(cfg, step, &geom, &s.criteria)?;
    let mut h = 0.0f64;
    for ai in cfg.field_ais() {
        let coarsest = forest.active_mesh(ai)?.iter().map(|c| c.level).min().unwrap_or(0);
        let sz = forest.cell_size(coarsest);
        h = h.max(sz[0].max(sz[1]));
    }
    let specs: Vec<FieldSpec> = cfg.fields.iter().map(|f| FieldSpec::new(&f.name, f.ai, f.degree, components(&f.name))).collect();
    let extra: Vec<usize> = geom_ai.into_iter().collect();
    let disc = Discretization::build_on(forest, &specs, &extra, geom, void_flags(cfg), cfg.mesh.geom_refine)?;
    Ok((disc, h))
}

pub(crate) fn field_index(disc: &Discretization, name: &str) -> Result<usize> {
    disc.field_index(name).ok_or_else(|| Error::Config(format!("field '{name}' missing")))
}

/// Issues for fields a study needs but the configuration lacks.
pub(crate) fn require_fields(cfg: &StudyConfig, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| cfg.field(n).is_none())
        .map(|n| format!("study '{}' needs a field named '{n}'", cfg.study))
        .collect()
}

pub(crate) fn require_counts(cfg: &StudyConfig, level_sets: usize, materials: usize) -> Vec<String> {
    let mut v = Vec::new();
    if cfg.geometry.len() != level_sets {
        v.push(format!("study '{}' needs {level_sets} level set(s), got {}", cfg.study, cfg.geometry.len()));
    }
    if cfg.materials.len() != materials {
        v.push(format!("study '{}' needs {materials} material(s), got {}", cfg.study, cfg.materials.len()));
    }
    v
}

/// Triangle soup of the given fields over every material subphase.
pub(crate) fn export_fields(disc: &Discretization, fields: &[(usize, &[f64])]) -> Result<FieldExport> {
    let mut columns = Vec::new();
    for &(f, _) in fields {
        let fd = &disc.fields[f];
        if fd.components == 1 {
            columns.push(fd.name.clone());
        } else {
            columns.extend(["x", "y"].iter().take(fd.components).map(|a| format!("{}_{a}", fd.name)));
        }
    }
    let mut triangles = Vec::new();
    for t in &disc.mesh.tris {
        if disc.void[t.phase] {
            continue;
        }
        let cell = disc.mesh.subphases[t.sub].cell;
        let mut values: [Vec<f64>; 3] = Default::default();
        for (v, out) in t.v.iter().zip(values.iter_mut()) {
            for &(f, coeffs) in fields {
                out.extend(disc.fields[f].eval_in(&disc.union, cell, t.sub, *v, coeffs)?.0);
            }
        }
        triangles.push(ExportTriangle { phase: t.phase, vertices: t.v, values });
    }
    Ok(FieldExport { columns, triangles })
}

pub(crate) fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}
