//! Study configuration: TOML schema, `--set` overrides and validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thbx_core::physics::{Material, Plane, WeakFormConfig};

use crate::Strategies;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: String,
    /// Number of refinement steps, at least one.
    pub steps: usize,
    pub mesh: MeshConfig,
    pub fields: Vec<FieldConfig>,
    #[serde(default)]
    pub geometry: Vec<LevelSetConfig>,
    /// One entry per phase.
    pub materials: Vec<MaterialConfig>,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    /// Study-specific scalars: loads, angles, variant switches.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub base: [usize; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Extra subdivisions of every union cell for the geometry.
    #[serde(default)]
    pub geom_refine: u32,
    /// Uniform level the union mesh is refined to regardless of the fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union_level: Option<u32>,
    /// Double the base counts each step instead of refining levels.
    #[serde(default)]
    pub base_doubling: bool,
    /// Buffer width; defaults to the largest field degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<usize>,
}

/// `floor(offset + per_step * step)`, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Levels {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub per_step: f64,
}

impl Levels {
    pub fn fixed(n: u32) -> Self {
        Levels { offset: n as f64, per_step: 0.0 }
    }

    pub fn at(&self, step: usize) -> u32 {
        (self.offset + self.per_step * step as f64 + 1e-9).floor().max(0.0) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    pub degree: usize,
    pub ai: usize,
    /// Uniform refinement levels per step.
    #[serde(default)]
    pub uniform: Levels,
    /// Local refinement passes applied after the uniform levels.
    #[serde(default)]
    pub local: Vec<LocalRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalRule {
    pub criterion: String,
    pub passes: Levels,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetConfig {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default)]
    pub e: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub void: bool,
}

impl MaterialConfig {
    pub fn solid(e: f64, nu: f64, kappa: f64, alpha: f64) -> Self {
        MaterialConfig { e, nu, kappa, alpha, t0: 0.0, void: false }
    }

    pub fn void() -> Self {
        MaterialConfig { e: 0.0, nu: 0.0, kappa: 0.0, alpha: 0.0, t0: 0.0, void: true }
    }

    pub fn material(&self) -> Material {
        if self.void {
            Material::void()
        } else {
            Material::solid(self.e, self.nu, self.kappa, self.alpha, self.t0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneConfig {
    #[default]
    Stress,
    Strain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_dirichlet: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_interface: Option<f64>,
    pub ghost: f64,
    pub use_ghost: bool,
    pub inverse_weights: bool,
    pub plane: PlaneConfig,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        let w = WeakFormConfig::default();
        PenaltyConfig {
            c_dirichlet: None,
            c_interface: None,
            ghost: w.ghost,
            use_ghost: w.use_ghost,
            inverse_weights: w.inverse_weights,
            plane: PlaneConfig::Stress,
        }
    }
}

impl PenaltyConfig {
    pub fn weak_form(&self) -> WeakFormConfig {
        WeakFormConfig {
            c_dirichlet: self.c_dirichlet,
            c_interface: self.c_interface,
            ghost: self.ghost,
            use_ghost: self.use_ghost,
            plane: match self.plane {
                PlaneConfig::Stress => Plane::Stress,
                PlaneConfig::Strain => Plane::Strain,
            },
            inverse_weights: self.inverse_weights,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: bool,
    pub plot: bool,
    pub export: bool,
    pub summary: bool,
    /// Write wall times to the CSV; off keeps reruns byte-identical.
    pub record_timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { csv: true, plot: true, export: false, summary: true, record_timing: false }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("bad override '{0}': {1}")]
    Override(String, String),
    #[error("invalid configuration:\n{0}")]
    Invalid(ValidationReport),
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.issues.push(msg());
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            writeln!(f, "  - {i}")?;
        }
        Ok(())
    }
}

/// Applies `path.to.key=value` to a parsed document. The value is read as
/// a TOML value when possible and as a bare string otherwise; numeric path
/// segments index arrays.
pub fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<(), ConfigError> {
    let bad = |m: &str| ConfigError::Override(assignment.to_string(), m.to_string());
    let (path, raw) = assignment.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let path: Vec<&str> = path.trim().split('.').collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key parsed above"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = doc;
    for (k, seg) in path.iter().enumerate() {
        let last = k + 1 == path.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    return Ok(());
                }
                t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| bad(&format!("'{seg}' is not an array index")))?;
                let len = a.len();
                let slot = a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad(&format!("'{seg}' descends into a scalar"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl StudyConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies overrides to an existing configuration.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ConfigError> {
        Self::from_toml(&self.to_toml(), overrides)
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn max_degree(&self) -> usize {
        self.fields.iter().map(|f| f.degree).max().unwrap_or(1)
    }

    pub fn buffer(&self) -> usize {
        self.mesh.buffer.unwrap_or_else(|| self.max_degree())
    }

    /// Activation indices used by the fields, ascending.
    pub fn field_ais(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.fields.iter().map(|f| f.ai).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn field(&self, name: &str) -> Option<&FieldConfig> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_mut(&mut self, name: &str) -> Option<&mut FieldConfig> {
        self.fields.iter_mut().find(|f| f.name == name)
    }

    pub fn validate(&self, strategies: &Strategies) -> ValidationReport {
        let mut r = ValidationReport::default();
        r.check(strategies.studies.get(&self.study).is_some(), || {
            format!("unknown study '{}'; known: {}", self.study, strategies.studies.list().join(", "))
        });
        r.check(self.steps >= 1, || "steps must be at least 1".into());
        let m = &self.mesh;
        r.check(m.base[0] > 0 && m.base[1] > 0, || "mesh.base counts must be positive".into());
        r.check(m.hi[0] > m.lo[0] && m.hi[1] > m.lo[1], || "mesh.hi must exceed mesh.lo".into());
        r.check(!self.fields.is_empty(), || "at least one field is required".into());
        for (k, f) in self.fields.iter().enumerate() {
            r.check((1..=3).contains(&f.degree), || format!("field '{}': degree must be 1, 2 or 3", f.name));
            r.check(!f.name.is_empty(), || format!("field {k} has an empty name"));
            r.check(self.fields.iter().filter(|g| g.name == f.name).count() == 1, || format!("field name '{}' repeats", f.name));
            r.check(f.ai < thbx_core::polytree::MAX_AI - 1, || format!("field '{}': activation index {} too large", f.name, f.ai));
            for g in self.fields.iter().filter(|g| g.ai == f.ai) {
                r.check(g.uniform == f.uniform && g.local == f.local, || {
                    format!("fields '{}' and '{}' share AI {} but differ in refinement", f.name, g.name, f.ai)
                });
            }
            for rule in &f.local {
                match strategies.criteria.get(&rule.criterion) {
                    None => r.issues.push(format!(
                        "field '{}': unknown criterion '{}'; known: {}",
                        f.name,
                        rule.criterion,
                        strategies.criteria.list().join(", ")
                    )),
                    Some(kind) => {
                        if let Err(e) = kind.build(&rule.params) {
                            r.issues.push(format!("field '{}': {e}", f.name));
                        }
                    }
                }
            }
        }
        if let Some(b) = m.buffer {
            r.check(b >= self.max_degree(), || format!("mesh.buffer {b} is below the largest degree {}", self.max_degree()));
        }
        for (k, ls) in self.geometry.iter().enumerate() {
            if let Err(e) = strategies.level_sets.build(&ls.kind, &ls.params) {
                r.issues.push(format!("geometry[{k}]: {e}"));
            }
        }
        r.check(!self.materials.is_empty(), || "at least one material is required".into());
        r.check(self.materials.iter().any(|m| !m.void), || "every material is void".into());
        for (k, mat) in self.materials.iter().enumerate() {
            if let Err(e) = mat.material().validate() {
                r.issues.push(format!("materials[{k}]: {e}"));
            }
        }
        if let Err(e) = self.penalty.weak_form().validate() {
            r.issues.push(format!("penalty: {e}"));
        }
        if r.is_ok() {
            if let Some(study) = strategies.studies.get(&self.study) {
                r.issues.extend(study.check(self));
            }
        }
        r
    }

    /// Validation as a `Result`.
    pub fn validated(self, strategies: &Strategies) -> Result<Self, ConfigError> {
        let r = self.validate(strategies);
        if r.is_ok() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(r))
        }
    }
}
