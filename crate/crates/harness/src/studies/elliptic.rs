use std::collections::BTreeMap;
use std::time::Instant;

use thbx_core::cut::Side;
use thbx_core::discretization::Discretization;
use thbx_core::physics::{
    assemble, error_norms, BoundaryCondition, BoundaryRegion, Discrete, FieldKind, Problem, TemperatureInput,
};
use thbx_core::registry::Named;
use thbx_core::{Error, Result};

use super::{discretize, export_fields, field_index, materials, require_counts, require_fields, seconds_since, single_geometry, Study, StudyOutput};
use crate::config::{FieldConfig, LevelSetConfig, Levels, MaterialConfig, MeshConfig, StudyConfig};
use crate::report::StudyReport;
use crate::Strategies;

/// Quarter plate with an elliptic hole, heated through the hole boundary.
/// Errors are measured against a run with both fields at
/// `reference_level` on the same union mesh.
pub struct EllipticHole;

impl Named for EllipticHole {
    fn name(&self) -> &'static str {
        "elliptic_hole"
    }
    fn describe(&self) -> &'static str {
        "staggered thermo-elastic plate with elliptic hole, fine-mesh self-reference"
    }
}

fn coarse_temperature(name: &str) -> StudyConfig {
    let p = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>();
    StudyConfig {
        study: name.into(),
        steps: 3,
        mesh: MeshConfig { base: [10, 10], lo: [0.0, 0.0], hi: [2.0, 2.0], geom_refine: 0, union_level: Some(4), base_doubling: false, buffer: None },
        fields: vec![
            FieldConfig { name: "T".into(), degree: 1, ai: 0, uniform: Levels { offset: 0.0, per_step: 1.0 }, local: Vec::new() },
            FieldConfig { name: "u".into(), degree: 2, ai: 1, uniform: Levels::fixed(4), local: Vec::new() },
        ],
        geometry: vec![LevelSetConfig { kind: "ellipse".into(), params: p(&[("cx", 0.0), ("cy", 0.0), ("a", 0.8136), ("b", 0.5753)]) }],
        materials: vec![MaterialConfig::void(), MaterialConfig::solid(1.0, 0.3, 1.0, 1.0)],
        penalty: Default::default(),
        params: p(&[("flux", 10.0), ("t_right", 1.0), ("reference_level", 4.0)]),
        output: Default::default(),
    }
}

fn equal_levels(name: &str) -> StudyConfig {
    let mut c = coarse_temperature(name);
    c.fields[1].uniform = Levels { offset: 0.0, per_step: 1.0 };
    c
}

struct Solution {
    disc: Discretization,
    h: f64,
    t: Vec<f64>,
    u: Vec<f64>,
}

fn solve(cfg: &StudyConfig, step: usize, s: &Strategies) -> Result<Solution> {
    let (disc, h) = discretize(cfg, step, single_geometry(cfg, s)?, s)?;
    let (ft, fu) = (field_index(&disc, "T")?, field_index(&disc, "u")?);
    let (q, tr) = (cfg.param("flux", 10.0), cfg.param("t_right", 1.0));
    let wf = cfg.penalty.weak_form();
    let thermal = Problem::new(FieldKind::Thermal, ft, materials(cfg))
        .with_config(wf.clone())
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Immersed, move |_, _| [q, 0.0]))
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Right), move |_| [tr, 0.0]));
    let elastic = Problem::new(FieldKind::Elastic, fu, materials(cfg))
        .with_config(wf)
        .with_bc(BoundaryCondition::dirichlet_masked(BoundaryRegion::Side(Side::Left), [true, false], |_| [0.0; 2]))
        .with_bc(BoundaryCondition::dirichlet_masked(BoundaryRegion::Side(Side::Bottom), [false, true], |_| [0.0; 2]));
    let t = assemble(&disc, &thermal, None)?.solve()?;
    let u = assemble(&disc, &elastic, Some(TemperatureInput { field: ft, coeffs: &t }))?.solve()?;
    Ok(Solution { disc, h, t, u })
}

/// Both fields uniformly at `reference_level`, everything else unchanged.
fn reference_config(cfg: &StudyConfig) -> StudyConfig {
    let mut r = cfg.clone();
    let level = cfg.param("reference_level", 4.0) as u32;
    for f in &mut r.fields {
        f.uniform = Levels::fixed(level);
        f.local.clear();
    }
    r.steps = 1;
    r
}

impl Study for EllipticHole {
    fn default_config(&self) -> StudyConfig {
        coarse_temperature(self.name())
    }

    fn variants(&self) -> Vec<(&'static str, StudyConfig)> {
        let mut elevated = equal_levels(self.name());
        elevated.fields[1].degree = elevated.fields[0].degree + 1;
        vec![("coarse_temperature", coarse_temperature(self.name())), ("equal_levels", elevated)]
    }

    fn check(&self, cfg: &StudyConfig) -> Vec<String> {
        let mut v = require_fields(cfg, &["T", "u"]);
        v.extend(require_counts(cfg, 1, 2));
        if cfg.materials.len() == 2 && (!cfg.materials[0].void || cfg.materials[1].void) {
            v.push("elliptic_hole needs a void phase 0 inside the ellipse and a solid phase 1".into());
        }
        if cfg.mesh.union_level.is_none() {
            v.push("elliptic_hole compares against a reference on the same union mesh; set mesh.union_level".into());
        }
        v
    }

    fn run(&self, cfg: &StudyConfig, s: &Strategies) -> Result<StudyOutput> {
        let level = cfg.param("reference_level", 4.0) as u32;
        if cfg.mesh.union_level.is_some_and(|u| u < level) {
            return Err(Error::Config("mesh.union_level must be at least params.reference_level".into()));
        }
        let reference = solve(&reference_config(cfg), 0, s)?;
        let rd = &reference.disc;
        let mut report = StudyReport::new(self.name());
        let mut export = None;
        for step in 0..cfg.steps {
            let t0 = Instant::now();
            let run = solve(cfg, step, s)?;
            let d = &run.disc;
            if !d.same_union(rd) {
                return Err(Error::Config("run and reference do not share the union mesh; raise mesh.union_level".into()));
            }
            let secs = seconds_since(t0);
            for (name, coeffs, rc) in [("T", &run.t, &reference.t), ("u", &run.u, &reference.u)] {
                let (f, rf) = (field_index(d, name)?, field_index(rd, name)?);
                let (l2, h1) = error_norms(d, f, coeffs, &Discrete::new(rd, rf, rc, d))?;
                report.push(step, name, d.n_dof(f), run.h, (l2, Some(h1)), secs);
            }
            if cfg.output.export && step + 1 == cfg.steps {
                let (ft, fu) = (field_index(d, "T")?, field_index(d, "u")?);
                export = Some(export_fields(d, &[(ft, &run.t), (fu, &run.u)])?);
            }
        }
        report.compute_rates();
        report.metrics.insert("reference_level".into(), level as f64);
        Ok(StudyOutput { report, export })
    }
}
