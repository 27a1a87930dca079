use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::Instant;

use thbx_core::levelset::Geometry;
use thbx_core::physics::{assemble, error_norms, Analytic, BoundaryCondition, BoundaryRegion, FieldKind, Problem};
use thbx_core::registry::Named;
use thbx_core::Result;

use super::{discretize, export_fields, field_index, level_sets, materials, require_counts, require_fields, seconds_since, Study, StudyOutput};
use crate::config::{FieldConfig, LevelSetConfig, Levels, LocalRule, MaterialConfig, MeshConfig, StudyConfig};
use crate::report::StudyReport;
use crate::Strategies;

/// Laplace problem on an L-shaped domain with the reentrant corner at the
/// origin, immersed in a shifted square.
pub struct LShape;

impl Named for LShape {
    fn name(&self) -> &'static str {
        "lshape"
    }
    fn describe(&self) -> &'static str {
        "corner singularity T = r^(2/3) sin(2 theta / 3), uniform or corner-local refinement"
    }
}

/// Exact temperature and gradient. The angle runs from the edge `y = 0,
/// x > 0` counter-clockwise through the material to `x = 0, y < 0`.
pub fn corner_solution(x: [f64; 2]) -> (f64, [f64; 2]) {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == 0.0 {
        return (0.0, [0.0; 2]);
    }
    let mut th = x[1].atan2(x[0]);
    if th < -FRAC_PI_4 {
        th += 2.0 * PI;
    }
    let a = 2.0 / 3.0;
    let t = r.powf(a) * (a * th).sin();
    let dr = a * r.powf(a - 1.0) * (a * th).sin();
    let dth = a * r.powf(a - 1.0) * (a * th).cos();
    let (c, s) = (th.cos(), th.sin());
    (t, [dr * c - dth * s, dr * s + dth * c])
}

fn half_plane(px: f64, py: f64, angle: f64) -> LevelSetConfig {
    let params = [("px", px), ("py", py), ("angle", angle)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    LevelSetConfig { kind: "half_plane".into(), params }
}

/// Phase 0 inside `[-1, 1]^2` minus the quadrant `x > 0, y < 0`; the six
/// half-planes are the four square sides and the two notch edges.
fn l_phase(bits: u32) -> usize {
    let outside_square = bits & 0b1111 != 0;
    let in_notch = bits & 0b110000 == 0b110000;
    (outside_square || in_notch) as usize
}

fn uniform_config(name: &str) -> StudyConfig {
    let d = -0.127;
    StudyConfig {
        study: name.into(),
        steps: 5,
        mesh: MeshConfig { base: [6, 6], lo: [-1.25 + d; 2], hi: [1.25 + d; 2], geom_refine: 0, union_level: None, base_doubling: false, buffer: None },
        fields: vec![FieldConfig { name: "T".into(), degree: 2, ai: 0, uniform: Levels { offset: 0.0, per_step: 1.0 }, local: Vec::new() }],
        geometry: vec![
            half_plane(1.0, 0.0, FRAC_PI_2),
            half_plane(-1.0, 0.0, -FRAC_PI_2),
            half_plane(0.0, 1.0, PI),
            half_plane(0.0, -1.0, 0.0),
            half_plane(0.0, 0.0, FRAC_PI_2),
            half_plane(0.0, 0.0, 0.0),
        ],
        materials: vec![MaterialConfig::solid(1.0, 0.3, 1.0, 0.0), MaterialConfig::void()],
        penalty: Default::default(),
        params: BTreeMap::new(),
        output: Default::default(),
    }
}

impl Study for LShape {
    fn default_config(&self) -> StudyConfig {
        uniform_config(self.name())
    }

    fn variants(&self) -> Vec<(&'static str, StudyConfig)> {
        let mut local = uniform_config(self.name());
        local.steps = 7;
        let f = &mut local.fields[0];
        f.uniform = Levels { offset: 0.0, per_step: 0.5 };
        let params = [("x0", 0.0), ("y0", 0.0), ("x1", 0.0), ("y1", 0.0), ("c", 2.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        f.local = vec![LocalRule { criterion: "boundary_distance".into(), passes: Levels { offset: 0.0, per_step: 1.0 }, params }];
        vec![("uniform", uniform_config(self.name())), ("local", local)]
    }

    fn check(&self, cfg: &StudyConfig) -> Vec<String> {
        let mut v = require_fields(cfg, &["T"]);
        v.extend(require_counts(cfg, 6, 2));
        if cfg.materials.len() == 2 && (cfg.materials[0].void || !cfg.materials[1].void) {
            v.push("lshape needs a solid phase 0 and a void phase 1".into());
        }
        v
    }

    fn run(&self, cfg: &StudyConfig, s: &Strategies) -> Result<StudyOutput> {
        let mut report = StudyReport::new(self.name());
        let mut export = None;
        for step in 0..cfg.steps {
            let t0 = Instant::now();
            let geom = Geometry::with_rule(level_sets(cfg, s)?, 2, l_phase)?;
            let (disc, h) = discretize(cfg, step, geom, s)?;
            let f = field_index(&disc, "T")?;
            let prob = Problem::new(FieldKind::Thermal, f, materials(cfg))
                .with_config(cfg.penalty.weak_form())
                .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Immersed, |x| [corner_solution(x).0, 0.0]));
            let t = assemble(&disc, &prob, None)?.solve()?;
            let exact = Analytic(|x: [f64; 2], _| {
                let (v, g) = corner_solution(x);
                (vec![v], vec![g])
            });
            let (l2, h1) = error_norms(&disc, f, &t, &exact)?;
            report.push(step, "T", disc.n_dof(f), h, (l2, Some(h1)), seconds_since(t0));
            if cfg.output.export && step + 1 == cfg.steps {
                export = Some(export_fields(&disc, &[(f, &t)])?);
            }
        }
        report.compute_rates();
        Ok(StudyOutput { report, export })
    }
}
