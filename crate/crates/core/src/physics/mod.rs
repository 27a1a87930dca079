//! Stabilized thermo-elastic model: materials, weak form settings,
//! boundary conditions, assembly, solution and error measures.

mod assemble;
mod norms;
mod solve;
#[cfg(test)]
mod tests;

use std::fmt;
use std::sync::Arc;

pub use assemble::{
    assemble, assemble_bulk, assemble_ghost, assemble_neumann, assemble_nitsche_dirichlet, assemble_nitsche_interface,
    dirichlet_penalty, interface_weights, Contribution, TemperatureInput,
};
pub use norms::{error_norms, von_mises, von_mises_interface_error, Analytic, Discrete, Eval, Reference, Sample};
pub use solve::{solve_staggered, LinearSystem};

use crate::cut::Side;
use crate::discretization::Discretization;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub e: f64,
    pub nu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub t0: f64,
    pub void: bool,
}

impl Material {
    pub fn solid(e: f64, nu: f64, kappa: f64, alpha: f64, t0: f64) -> Self {
        Material { e, nu, kappa, alpha, t0, void: false }
    }

    pub fn void() -> Self {
        Material { e: 0.0, nu: 0.0, kappa: 0.0, alpha: 0.0, t0: 0.0, void: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.void {
            return Ok(());
        }
        if !(self.e > 0.0 && self.kappa > 0.0 && self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::Config(format!("invalid material {self:?}")));
        }
        Ok(())
    }

    /// Voigt stiffness `[xx, yy, xy]` with engineering shear strain.
    pub fn stiffness(&self, plane: Plane) -> [[f64; 3]; 3] {
        let (e, nu) = (self.e, self.nu);
        match plane {
            Plane::Stress => {
                let c = e / (1.0 - nu * nu);
                [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]]
            }
            Plane::Strain => {
                let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
                [[c * (1.0 - nu), c * nu, 0.0], [c * nu, c * (1.0 - nu), 0.0], [0.0, 0.0, c * (1.0 - 2.0 * nu) / 2.0]]
            }
        }
    }

    /// Isotropic in-plane stress caused by a temperature `t`.
    pub fn thermal_stress(&self, plane: Plane, t: f64) -> f64 {
        let d = self.alpha * (t - self.t0);
        match plane {
            Plane::Stress => self.e * d / (1.0 - self.nu),
            Plane::Strain => self.e * d / (1.0 - 2.0 * self.nu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Plane {
    #[default]
    Stress,
    Strain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Thermal,
    Elastic,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Thermal => 1,
            FieldKind::Elastic => 2,
        }
    }
}

/// Penalty and stabilization settings. Unset penalty constants default
/// to `2 (p + 1)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFormConfig {
    pub c_dirichlet: Option<f64>,
    pub c_interface: Option<f64>,
    /// Ghost penalty as a multiple of `kappa` or `E`.
    pub ghost: f64,
    pub use_ghost: bool,
    pub plane: Plane,
    /// Swap the interface averaging weights.
    pub inverse_weights: bool,
}

impl Default for WeakFormConfig {
    fn default() -> Self {
        WeakFormConfig {
            c_dirichlet: None,
            c_interface: None,
            ghost: 0.001,
            use_ghost: true,
            plane: Plane::Stress,
            inverse_weights: false,
        }
    }
}

impl WeakFormConfig {
    pub fn c_dirichlet(&self, p: usize) -> f64 {
        self.c_dirichlet.unwrap_or(default_penalty(p))
    }

    pub fn c_interface(&self, p: usize) -> f64 {
        self.c_interface.unwrap_or(default_penalty(p))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |v: Option<f64>| v.is_some_and(|c| !(c >= 0.0));
        if bad(self.c_dirichlet) || bad(self.c_interface) || !(self.ghost >= 0.0) {
            return Err(Error::Config("penalty constants must be non-negative".into()));
        }
        Ok(())
    }
}

fn default_penalty(p: usize) -> f64 {
    2.0 * ((p + 1) * (p + 1)) as f64
}

/// Where a boundary condition acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRegion {
    /// A side of the background mesh.
    Side(Side),
    /// Every interface between material and void.
    Immersed,
    /// Interface between this material phase and void.
    ImmersedPhase(usize),
}

pub type PointFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Flux or traction as a function of position and outward normal.
pub type FluxFn = Arc<dyn Fn([f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Weak Dirichlet condition on the components selected by `mask`
    /// (only the first entry is used for thermal fields).
    Dirichlet { region: BoundaryRegion, value: PointFn, mask: [bool; 2] },
    /// Prescribed heat flux into the body or traction.
    Neumann { region: BoundaryRegion, flux: FluxFn },
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet { region, mask, .. } => write!(f, "Dirichlet({region:?}, {mask:?})"),
            BoundaryCondition::Neumann { region, .. } => write!(f, "Neumann({region:?})"),
        }
    }
}

impl BoundaryCondition {
    pub fn dirichlet(region: BoundaryRegion, value: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        BoundaryCondition::Dirichlet { region, value: Arc::new(value), mask: [true, true] }
    }

    pub fn dirichlet_masked(
        region: BoundaryRegion,
        mask: [bool; 2],
        value: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        BoundaryCondition::Dirichlet { region, value: Arc::new(value), mask }
    }

    pub fn neumann(region: BoundaryRegion, flux: impl Fn([f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        BoundaryCondition::Neumann { region, flux: Arc::new(flux) }
    }

    pub fn region(&self) -> BoundaryRegion {
        match self {
            BoundaryCondition::Dirichlet { region, .. } | BoundaryCondition::Neumann { region, .. } => *region,
        }
    }
}

/// One field's boundary value problem.
#[derive(Clone)]
pub struct Problem {
    pub kind: FieldKind,
    pub field: usize,
    /// Indexed by phase.
    pub materials: Vec<Material>,
    pub bcs: Vec<BoundaryCondition>,
    /// Heat source or body force per unit area.
    pub source: Option<PointFn>,
    pub config: WeakFormConfig,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("kind", &self.kind)
            .field("field", &self.field)
            .field("materials", &self.materials)
            .field("bcs", &self.bcs)
            .field("config", &self.config)
            .finish()
    }
}

impl Problem {
    pub fn new(kind: FieldKind, field: usize, materials: Vec<Material>) -> Self {
        Problem { kind, field, materials, bcs: Vec::new(), source: None, config: WeakFormConfig::default() }
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bcs.push(bc);
        self
    }

    pub fn with_source(mut self, s: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(s));
        self
    }

    pub fn with_config(mut self, c: WeakFormConfig) -> Self {
        self.config = c;
        self
    }

    pub fn validate(&self, disc: &Discretization) -> Result<()> {
        self.config.validate()?;
        let f = disc
            .fields
            .get(self.field)
            .ok_or_else(|| Error::Config(format!("field {} does not exist", self.field)))?;
        if f.components != self.kind.components() {
            return Err(Error::Config(format!("field '{}' has {} components, {:?} needs {}", f.name, f.components, self.kind, self.kind.components())));
        }
        if self.materials.len() != disc.geom.n_phases {
            return Err(Error::Config(format!("{} materials for {} phases", self.materials.len(), disc.geom.n_phases)));
        }
        for (m, mat) in self.materials.iter().enumerate() {
            mat.validate()?;
            if mat.void != disc.void[m] {
                return Err(Error::Config(format!("void flag of phase {m} differs from the discretization")));
            }
        }
        for bc in &self.bcs {
            if let BoundaryRegion::ImmersedPhase(m) = bc.region() {
                if self.materials.get(m).is_none_or(|mt| mt.void) {
                    return Err(Error::Config(format!("boundary condition {bc:?} on void or unknown phase {m}")));
                }
            }
        }
        Ok(())
    }
}
