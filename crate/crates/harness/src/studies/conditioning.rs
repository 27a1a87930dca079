use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use thbx_core::cut::Side;
use thbx_core::physics::{assemble, error_norms, Analytic, BoundaryCondition, BoundaryRegion, FieldKind, Problem};
use thbx_core::registry::Named;
use thbx_core::{Error, Result};

use super::{discretize, field_index, materials, require_counts, require_fields, seconds_since, single_geometry, Study, StudyOutput};
use crate::config::{FieldConfig, LevelSetConfig, Levels, MaterialConfig, MeshConfig, StudyConfig};
use crate::report::StudyReport;
use crate::Strategies;

/// Vertical boundary a distance `delta h` past an element facet, so the
/// last column of cut cells keeps a sliver of material. Each step shrinks
/// `delta` and records the condition estimate with and without the ghost
/// terms.
pub struct GhostConditioning;

impl Named for GhostConditioning {
    fn name(&self) -> &'static str {
        "ghost_conditioning"
    }
    fn describe(&self) -> &'static str {
        "sliver-cut condition estimates with and without ghost stabilization"
    }
}

/// Offset of step `step` in units of the element width.
pub fn sliver_offset(cfg: &StudyConfig, step: usize) -> f64 {
    cfg.param("delta0", 1e-2) * cfg.param("delta_factor", 1e-2).powi(step as i32)
}

fn config_for(cfg: &StudyConfig, step: usize) -> StudyConfig {
    let mut c = cfg.clone();
    let h = (cfg.mesh.hi[0] - cfg.mesh.lo[0]) / cfg.mesh.base[0] as f64;
    let x = cfg.param("facet", 0.5) + sliver_offset(cfg, step) * h;
    c.geometry[0].params.insert("px".into(), x);
    c
}

impl Study for GhostConditioning {
    fn default_config(&self) -> StudyConfig {
        let p = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>();
        StudyConfig {
            study: self.name().into(),
            steps: 3,
            mesh: MeshConfig { base: [10, 10], lo: [0.0, 0.0], hi: [1.0, 1.0], geom_refine: 0, union_level: None, base_doubling: false, buffer: None },
            fields: vec![FieldConfig { name: "T".into(), degree: 2, ai: 0, uniform: Levels::default(), local: Vec::new() }],
            geometry: vec![LevelSetConfig { kind: "half_plane".into(), params: p(&[("px", 0.5), ("py", 0.0), ("angle", FRAC_PI_2)]) }],
            materials: vec![MaterialConfig::solid(1.0, 0.3, 1.0, 0.0), MaterialConfig::void()],
            penalty: Default::default(),
            params: p(&[("facet", 0.5), ("delta0", 1e-2), ("delta_factor", 1e-2), ("flux", 1.0)]),
            output: Default::default(),
        }
    }

    fn check(&self, cfg: &StudyConfig) -> Vec<String> {
        let mut v = require_fields(cfg, &["T"]);
        v.extend(require_counts(cfg, 1, 2));
        if cfg.geometry.first().is_some_and(|g| g.kind != "half_plane") {
            v.push("ghost_conditioning moves a half_plane level set".into());
        }
        if cfg.materials.len() == 2 && (cfg.materials[0].void || !cfg.materials[1].void) {
            v.push("ghost_conditioning needs a solid phase 0 and a void phase 1".into());
        }
        v
    }

    fn run(&self, cfg: &StudyConfig, s: &Strategies) -> Result<StudyOutput> {
        let q = cfg.param("flux", 1.0);
        let kappa = cfg.materials[0].kappa;
        let x0 = cfg.mesh.lo[0];
        let mut report = StudyReport::new(self.name());
        for step in 0..cfg.steps {
            let t0 = Instant::now();
            let c = config_for(cfg, step);
            let (disc, h) = discretize(&c, step, single_geometry(&c, s)?, s)?;
            let f = field_index(&disc, "T")?;
            let mut conds = [0.0; 2];
            let mut t = Vec::new();
            for (i, ghost) in [true, false].into_iter().enumerate() {
                let mut wf = c.penalty.weak_form();
                wf.use_ghost = ghost;
                let prob = Problem::new(FieldKind::Thermal, f, materials(&c))
                    .with_config(wf)
                    .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |_| [0.0; 2]))
                    .with_bc(BoundaryCondition::neumann(BoundaryRegion::Immersed, move |_, _| [q, 0.0]));
                let sys = assemble(&disc, &prob, None)?;
                conds[i] = sys.condition_estimate()?;
                if ghost {
                    t = sys.solve()?;
                }
            }
            if t.is_empty() {
                return Err(Error::Config("no stabilized solution".into()));
            }
            let exact = Analytic(move |x: [f64; 2], _| (vec![q * (x[0] - x0) / kappa], vec![[q / kappa, 0.0]]));
            let (l2, h1) = error_norms(&disc, f, &t, &exact)?;
            report.push(step, "T", disc.n_dof(f), h, (l2, Some(h1)), seconds_since(t0));
            report.metrics.insert(format!("delta_{step}"), sliver_offset(cfg, step));
            report.metrics.insert(format!("cond_ghost_{step}"), conds[0]);
            report.metrics.insert(format!("cond_plain_{step}"), conds[1]);
        }
        Ok(StudyOutput { report, export: None })
    }
}
