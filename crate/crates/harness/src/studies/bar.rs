use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use thbx_core::cut::Side;
use thbx_core::physics::{assemble, error_norms, Analytic, BoundaryCondition, BoundaryRegion, FieldKind, Problem};
use thbx_core::registry::Named;
use thbx_core::Result;

use super::{discretize, export_fields, field_index, materials, require_counts, require_fields, seconds_since, single_geometry, Study, StudyOutput};
use crate::config::{FieldConfig, LevelSetConfig, Levels, MaterialConfig, MeshConfig, StudyConfig};
use crate::report::StudyReport;
use crate::Strategies;

/// Clamped bar under an axial body load, cut by an inclined interface
/// between two identical materials. The 1D closed form is exact in 2D for
/// `nu = 0`.
pub struct Bar2d;

impl Named for Bar2d {
    fn name(&self) -> &'static str {
        "bar2d"
    }
    fn describe(&self) -> &'static str {
        "two-material inclined-interface bar, body load b_x = load x^2 / area, analytic reference"
    }
}

/// `u(x) = load / (12 E area) (4 L^3 x - x^4)`, the clamped-free solution
/// of `E area u'' = -load x^2`.
pub fn bar_solution(load: f64, e: f64, area: f64, len: f64, x: f64) -> (f64, f64) {
    let c = load / (12.0 * e * area);
    (c * (4.0 * len.powi(3) * x - x.powi(4)), c * (4.0 * len.powi(3) - 4.0 * x.powi(3)))
}

impl Study for Bar2d {
    fn default_config(&self) -> StudyConfig {
        let p = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>();
        StudyConfig {
            study: self.name().into(),
            steps: 5,
            mesh: MeshConfig { base: [8, 4], lo: [0.0, 0.0], hi: [1.0, 0.5], geom_refine: 0, union_level: None, base_doubling: true, buffer: None },
            fields: vec![FieldConfig { name: "u".into(), degree: 2, ai: 0, uniform: Levels::default(), local: Vec::new() }],
            geometry: vec![LevelSetConfig { kind: "half_plane".into(), params: p(&[("px", 0.5123), ("py", 0.2571), ("angle", 3.0 * PI / 8.0)]) }],
            materials: vec![MaterialConfig::solid(1.0, 0.0, 1.0, 0.0); 2],
            penalty: Default::default(),
            params: p(&[("load", 2.0), ("area", 0.25)]),
            output: Default::default(),
        }
    }

    fn check(&self, cfg: &StudyConfig) -> Vec<String> {
        let mut v = require_fields(cfg, &["u"]);
        v.extend(require_counts(cfg, 1, 2));
        if cfg.materials.iter().any(|m| m.void || m.e != cfg.materials[0].e || m.nu != 0.0) {
            v.push("bar2d compares against the closed form, which needs matched materials with nu = 0".into());
        }
        v
    }

    fn run(&self, cfg: &StudyConfig, s: &Strategies) -> Result<StudyOutput> {
        let (load, area) = (cfg.param("load", 2.0), cfg.param("area", 0.25));
        let e = cfg.materials[0].e;
        let (x0, len) = (cfg.mesh.lo[0], cfg.mesh.hi[0] - cfg.mesh.lo[0]);
        let mut report = StudyReport::new(self.name());
        let mut export = None;
        for step in 0..cfg.steps {
            let t0 = Instant::now();
            let (disc, h) = discretize(cfg, step, single_geometry(cfg, s)?, s)?;
            let f = field_index(&disc, "u")?;
            let prob = Problem::new(FieldKind::Elastic, f, materials(cfg))
                .with_config(cfg.penalty.weak_form())
                .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |_| [0.0; 2]))
                .with_source(move |x| [load * (x[0] - x0).powi(2) / area, 0.0]);
            let u = assemble(&disc, &prob, None)?.solve()?;
            let exact = Analytic(move |x: [f64; 2], _| {
                let (v, d) = bar_solution(load, e, area, len, x[0] - x0);
                (vec![v, 0.0], vec![[d, 0.0], [0.0, 0.0]])
            });
            let (l2, h1) = error_norms(&disc, f, &u, &exact)?;
            report.push(step, "u", disc.n_dof(f), h, (l2, Some(h1)), seconds_since(t0));
            if cfg.output.export && step + 1 == cfg.steps {
                export = Some(export_fields(&disc, &[(f, &u)])?);
            }
        }
        report.compute_rates();
        Ok(StudyOutput { report, export })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_tip_and_slope() {
        // area 0.25, load 2: u = (4x - x^4) / 1.5
        let (u, d) = bar_solution(2.0, 1.0, 0.25, 1.0, 1.0);
        assert!((u - 2.0).abs() < 1e-15);
        assert!(d.abs() < 1e-15);
        let (u, d) = bar_solution(2.0, 1.0, 0.25, 1.0, 0.5);
        assert!((u - (2.0 - 0.0625) / 1.5).abs() < 1e-15);
        assert!((d - (4.0 - 0.5) / 1.5).abs() < 1e-15);
    }
}
