//! Run configuration with defaults taken from the checkerboard hyperparameter table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ansatz::{Alpha, Architecture, CorrelatorSet};
use crate::error::{Error, Result};
use crate::lattice::{build_model, Family, LatticeModel};
use crate::optimizer::{Schedule, SrConfig};
use crate::sampler::{SampleConfig, UpdateRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub dims: [usize; 3],
}

impl ModelSpec {
    pub fn build(&self) -> Result<LatticeModel> {
        build_model(self.family, self.dims)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_samples: usize,
    pub n_chains: usize,
    pub n_updates: usize,
    pub n_therm: usize,
    pub n_expect: usize,
}

impl SamplingConfig {
    pub fn training(&self) -> SampleConfig {
        SampleConfig { n_samples: self.n_samples, n_updates: self.n_updates, n_therm: self.n_therm }
    }

    pub fn expectation(&self) -> SampleConfig {
        SampleConfig { n_samples: self.n_expect, n_updates: self.n_updates, n_therm: self.n_therm }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_samples % self.n_chains != 0 || self.n_expect % self.n_chains != 0 {
            return Err(Error::InvalidConfig("sample counts must be positive multiples of n_chains".into()));
        }
        if self.n_samples == 0 || self.n_updates == 0 {
            return Err(Error::InvalidConfig("n_samples and n_updates must be positive".into()));
        }
        Ok(())
    }
}

/// Sweep direction; right-left starts in the polarized phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftRight,
    RightLeft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub field: [f64; 3],
    pub architecture: Architecture,
    pub seed: u64,
    /// Standard deviation of the cold-start parameters.
    pub init_std: f64,
    /// Absent means full summation over the Hilbert space.
    pub sampling: Option<SamplingConfig>,
    #[serde(default)]
    pub update_rule: UpdateRule,
    pub sr: SrConfig,
    /// Checkpoint cadence in iterations; 0 disables intermediate checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
    pub output: Option<PathBuf>,
}

/// Largest system trained by full summation when no sampling section is given.
pub const FULL_SUMMATION_QUBITS: usize = 16;

impl RunConfig {
    /// Defaults for a lattice: full summation up to 16 qubits, otherwise the sampling column
    /// matching the linear size.
    pub fn defaults(family: Family, dims: [usize; 3], direction: Direction) -> Result<Self> {
        let model = build_model(family, dims)?;
        let l = *dims.iter().max().unwrap();
        let n_vertices = model.n_vertices();
        let sampling = (model.n_qubits > FULL_SUMMATION_QUBITS).then(|| {
            let (n_samples, n_therm, expect) = if l >= 8 { (1 << 12, 20, 96) } else { (1 << 14, 24, 24) };
            SamplingConfig { n_samples, n_chains: 1024, n_updates: n_vertices, n_therm, n_expect: expect * n_samples }
        });
        let n_iter = if l >= 8 { 1500 } else { 1200 };
        let lr_start = match (direction, sampling.is_some(), l >= 8) {
            (_, _, true) => 3e-3,
            (Direction::LeftRight, true, _) => 3e-3,
            _ => 1e-2,
        };
        Ok(RunConfig {
            model: ModelSpec { family, dims },
            field: [0.0; 3],
            architecture: Architecture::SymmetricCrbm { alpha: Alpha::new(1, 4), correlators: CorrelatorSet::ALL },
            seed: 0,
            init_std: 1e-2,
            sampling,
            update_rule: UpdateRule::default(),
            sr: SrConfig {
                n_iter,
                learning_rate: Schedule { start: lr_start, end: 1e-3 },
                ..SrConfig::default()
            },
            checkpoint_every: 100,
            output: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        self.sr.validate()?;
        self.update_rule.validate()?;
        if let Some(s) = &self.sampling {
            s.validate()?;
        }
        if !(self.init_std >= 0.0) || self.field.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidConfig("init_std and field must be finite".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
