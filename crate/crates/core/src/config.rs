//! Run configuration: one JSON document with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corruption::CorruptionConfig;
use crate::dataset::{BlobConfig, NoiseSpec};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::eval::Method;
use crate::trainer::ClassifierConfig;

/// Mixed into the master seed, one per seeded stage.
pub mod stage_seed {
    pub const SYNTH: u64 = 0x5151_0000_0000_0001;
    pub const NOISE: u64 = 0x5151_0000_0000_0002;
    pub const CORRUPT: u64 = 0x5151_0000_0000_0003;
    pub const TRAIN: u64 = 0x5151_0000_0000_0004;
    pub const ENCODER: u64 = 0x5151_0000_0000_0005;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Dynacor, Method::AvgEncoder, Method::Aum],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: BlobConfig,
    pub noise: NoiseSpec,
    pub corruption: CorruptionConfig,
    pub classifier: ClassifierConfig,
    pub encoder: EncoderConfig,
    pub eval: EvalConfig,
    /// Master seed. Section seeds are derived from it and any value given in
    /// a section is overwritten.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: BlobConfig::default(),
            noise: NoiseSpec::default(),
            corruption: CorruptionConfig::default(),
            classifier: ClassifierConfig::default(),
            encoder: EncoderConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.derive_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Replaces the master seed and re-derives the stage seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.derive_seeds();
        self
    }

    pub fn derive_seeds(&mut self) {
        self.noise.seed = self.seed ^ stage_seed::NOISE;
        self.corruption.seed = self.seed ^ stage_seed::CORRUPT;
        self.classifier.seed = self.seed ^ stage_seed::TRAIN;
        self.encoder.seed = self.seed ^ stage_seed::ENCODER;
    }

    pub fn synth_seed(&self) -> u64 {
        self.seed ^ stage_seed::SYNTH
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.noise.validate(self.data.classes)?;
        self.corruption.validate()?;
        self.classifier.validate()?;
        self.encoder.validate()?;
        if self.classifier.epochs < self.encoder.min_length() {
            return Err(Error::InvalidConfig(format!(
                "classifier epochs {} shorter than the encoder's minimum trajectory {}",
                self.classifier.epochs,
                self.encoder.min_length()
            )));
        }
        if self.eval.methods.is_empty() {
            return Err(Error::InvalidConfig("eval.methods is empty".into()));
        }
        Ok(())
    }
}
