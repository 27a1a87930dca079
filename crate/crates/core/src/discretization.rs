//! The full discretization pipeline for one refinement state: union mesh,
//! integration mesh, per-field bases, extraction and enrichment.

use crate::cut::IntegrationMesh;
use crate::enrichment::{DofTable, Field};
use crate::error::{Error, Result};
use crate::levelset::Geometry;
use crate::polytree::PolyTreeForest;
use crate::thb::ThbBasis;
use crate::union::UnionMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub ai: usize,
    pub degree: usize,
    pub components: usize,
}

impl FieldSpec {
    pub fn new(name: &str, ai: usize, degree: usize, components: usize) -> Self {
        FieldSpec { name: name.to_string(), ai, degree, components }
    }
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub forest: PolyTreeForest,
    pub union: UnionMesh,
    pub geom: Geometry,
    pub mesh: IntegrationMesh,
    pub fields: Vec<Field>,
    pub dofs: DofTable,
    pub void: Vec<bool>,
}

impl Discretization {
    /// `void[m]` marks phases without material.
    pub fn build(forest: PolyTreeForest, specs: &[FieldSpec], geom: Geometry, void: Vec<bool>, geom_refine: u32) -> Result<Self> {
        Self::build_on(forest, specs, &[], geom, void, geom_refine)
    }

    /// As `build`, with `extra_ais` joining the union mesh without carrying
    /// a field, e.g. a uniformly refined geometry index.
    pub fn build_on(
        forest: PolyTreeForest,
        specs: &[FieldSpec],
        extra_ais: &[usize],
        geom: Geometry,
        void: Vec<bool>,
        geom_refine: u32,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("no fields".into()));
        }
        if void.len() != geom.n_phases {
            return Err(Error::Config(format!("{} void flags for {} phases", void.len(), geom.n_phases)));
        }
        let mut ais: Vec<usize> = Vec::new();
        for a in specs.iter().map(|s| s.ai).chain(extra_ais.iter().copied()) {
            if !ais.contains(&a) {
                ais.push(a);
            }
        }
        let union = UnionMesh::build_union(&forest, &ais, geom_refine)?;
        let mesh = IntegrationMesh::build(&union, &geom)?;
        let mut fields = Vec::with_capacity(specs.len());
        for s in specs {
            let basis = ThbBasis::build(&forest, s.ai, s.degree, true)?;
            let slot = ais.iter().position(|&a| a == s.ai).expect("ai collected above");
            fields.push(Field::build(&s.name, basis, &union, slot, s.components, &mesh, &void)?);
        }
        let dofs = DofTable::build(&fields.iter().map(|f| (&f.enrichment, f.components)).collect::<Vec<_>>());
        Ok(Discretization { forest, union, geom, mesh, fields, dofs, void })
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Unknowns of field `f`.
    pub fn n_dof(&self, f: usize) -> usize {
        self.dofs.field_len(f)
    }

    /// Shortest edge of union cell `c`.
    pub fn cell_h(&self, c: usize) -> f64 {
        let h = self.union.cells[c].h;
        h[0].min(h[1])
    }

    /// Whether two discretizations share union cells, so that cell and
    /// subphase indices coincide.
    pub fn same_union(&self, other: &Discretization) -> bool {
        self.union.len() == other.union.len()
            && self.union.cells.iter().zip(&other.union.cells).all(|(a, b)| a.key == b.key)
            && self.mesh.subphases.len() == other.mesh.subphases.len()
    }
}
