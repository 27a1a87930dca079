//! Study runner: configuration schema, refinement criteria, built-in
//! studies and report writers.

pub mod config;
pub mod refine;
pub mod report;
pub mod studies;

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use thbx_core::levelset::{level_set_registry, LevelSetRegistry};

use crate::config::StudyConfig;
use crate::refine::{criterion_registry, CriterionRegistry};
use crate::studies::{study_registry, StudyOutput, StudyRegistry};

/// Everything selectable by name from a configuration file.
pub struct Strategies {
    pub studies: StudyRegistry,
    pub level_sets: LevelSetRegistry,
    pub criteria: CriterionRegistry,
}

impl Default for Strategies {
    fn default() -> Self {
        Strategies { studies: study_registry(), level_sets: level_set_registry(), criteria: criterion_registry() }
    }
}

/// Validates and runs a configuration.
pub fn run_study(cfg: &StudyConfig, s: &Strategies) -> anyhow::Result<StudyOutput> {
    let report = cfg.validate(s);
    if !report.is_ok() {
        return Err(anyhow!("invalid configuration:\n{report}"));
    }
    let study = s.studies.require(&cfg.study)?;
    let mut out = study.run(cfg, s).with_context(|| format!("study '{}' failed", cfg.study))?;
    out.report.compute_rates();
    Ok(out)
}

/// `builtin:<study>[/<variant>]` or a path to a TOML file, with overrides
/// applied on top.
pub fn load_config(source: &str, overrides: &[String], s: &Strategies) -> anyhow::Result<StudyConfig> {
    if let Some(name) = source.strip_prefix("builtin:") {
        let (study, variant) = match name.split_once('/') {
            Some((a, b)) => (a, Some(b)),
            None => (name, None),
        };
        let st = s.studies.require(study)?;
        let cfg = match variant {
            None => st.default_config(),
            Some(v) => {
                let vars = st.variants();
                let known: Vec<&str> = vars.iter().map(|(n, _)| *n).collect();
                vars.iter()
                    .find(|(n, _)| *n == v)
                    .map(|(_, c)| c.clone())
                    .ok_or_else(|| anyhow!("study '{study}' has no variant '{v}' (known: {})", known.join(", ")))?
            }
        };
        return Ok(cfg.with_overrides(overrides)?);
    }
    let text = fs::read_to_string(Path::new(source)).with_context(|| format!("cannot read {source}"))?;
    Ok(StudyConfig::from_toml(&text, overrides)?)
}
