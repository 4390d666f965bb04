//! JSON experiment configuration; the format is described by `schema/experiment.schema.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use splr::adc::AdcConfig;
use splr::baselines::{AdmmConfig, PpalmConfig, SdcamConfig};
use splr::datagen::GenSpec;

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    AdcSidca,
    Sdcam,
    Ppalm,
    AdmmCspl,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::AdcSidca, SolverKind::Sdcam, SolverKind::Ppalm, SolverKind::AdmmCspl];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::AdcSidca => "adc_sidca",
            SolverKind::Sdcam => "sdcam",
            SolverKind::Ppalm => "ppalm",
            SolverKind::AdmmCspl => "admm_cspl",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown solver `{s}`")))
    }
}

/// Optional per-solver overrides; a missing entry uses the solver's defaults for the
/// instance's space.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfigs {
    pub adc_sidca: Option<AdcConfig>,
    pub sdcam: Option<SdcamConfig>,
    pub ppalm: Option<PpalmConfig>,
    pub admm_cspl: Option<AdmmConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Vec<GenSpec>,
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub configs: SolverConfigs,
    /// When nonempty, every instance is generated once per seed, overriding its own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write one JSON trace file per run under `output_dir/traces`.
    #[serde(default)]
    pub archive_traces: bool,
    /// Worker-pool width; the `SPLR_THREADS` environment variable takes precedence.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(instances: Vec<GenSpec>, solvers: Vec<SolverKind>) -> Self {
        ExperimentConfig {
            instances,
            solvers,
            configs: SolverConfigs::default(),
            seeds: Vec::new(),
            repetitions: 1,
            output_dir: None,
            archive_traces: false,
            threads: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(BenchError::Config("no solver selected".into()));
        }
        if self.instances.is_empty() {
            return Err(BenchError::Config("no instance given".into()));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(BenchError::Config("threads must be at least 1".into()));
        }
        for g in &self.instances {
            g.validate()?;
        }
        Ok(())
    }

    /// Instances after seed expansion, in run order.
    pub fn expanded_instances(&self) -> Vec<GenSpec> {
        if self.seeds.is_empty() {
            return self.instances.clone();
        }
        self.instances
            .iter()
            .flat_map(|g| self.seeds.iter().map(move |&seed| GenSpec { seed, ..g.clone() }))
            .collect()
    }
}
