//! Run configuration: one TOML file, validated before any compute starts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{LinkConfig, SsfmConfig, WdmConfig};
use crate::error::{Error, Result};
use crate::eval::{Equalizer, Scenario, ScenarioKind, TransceiverConfig};
use crate::hyperopt::{BoConfig, SearchSpace};
use crate::nnequalizer::{ArchSpec, TrainConfig};
use crate::rxdsp::DbpConfig;

/// Settings of `fibereq hyperopt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperoptSettings {
    /// Equalizer whose hyperparameters are searched.
    pub equalizer: Equalizer,
    /// Epochs per trial (a short budget; the final model is trained with `train.epochs`).
    pub epochs: usize,
    pub bo: BoConfig,
    pub space: SearchSpace,
}

impl Default for HyperoptSettings {
    fn default() -> Self {
        Self { equalizer: Equalizer::Crnn, epochs: 5, bo: BoConfig::default(), space: SearchSpace::default() }
    }
}

fn default_equalizers() -> Vec<Equalizer> {
    Equalizer::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Launch powers in dBm.
    pub powers: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_equalizers")]
    pub equalizers: Vec<Equalizer>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub transceiver: TransceiverConfig,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wdm: Option<WdmConfig>,
    #[serde(default)]
    pub ssfm: SsfmConfig,
    #[serde(default)]
    pub dbp: DbpConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub arch: ArchSpec,
    #[serde(default)]
    pub hyperopt: HyperoptSettings,
}

fn cfg_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config { field: field.into(), msg: msg.into() }
}

impl RunConfig {
    /// Parses and validates; errors name the offending key path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| cfg_err("<document>", e.to_string().trim_end()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.into_inner().message().trim_end().to_string();
            cfg_err(if path == "." { "<document>" } else { &path }, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err("<document>", e.to_string()))
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            kind: self.scenario,
            transceiver: self.transceiver.clone(),
            link: self.link.clone(),
            wdm: self.wdm.clone(),
            ssfm: self.ssfm.clone(),
            dbp: self.dbp.clone(),
            train: self.train.clone(),
            arch: self.arch.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        if self.powers.is_empty() {
            return Err(cfg_err("powers", "at least one launch power is required"));
        }
        for (i, p) in self.powers.iter().enumerate() {
            if !p.is_finite() || p.abs() > 40.0 {
                return Err(cfg_err(&format!("powers[{i}]"), format!("{p} dBm is not a usable launch power")));
            }
            if self.powers[..i].iter().any(|q| (q - p).abs() < 1e-9) {
                return Err(cfg_err(&format!("powers[{i}]"), format!("{p} dBm is listed twice")));
            }
        }
        if self.seeds.is_empty() {
            return Err(cfg_err("seeds", "at least one seed is required"));
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return Err(cfg_err("seeds", "seeds must be distinct"));
        }
        if self.equalizers.is_empty() {
            return Err(cfg_err("equalizers", "at least one equalizer is required"));
        }
        if self.equalizers.iter().collect::<HashSet<_>>().len() != self.equalizers.len() {
            return Err(cfg_err("equalizers", "equalizers must be distinct"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(cfg_err("output_dir", "must not be empty"));
        }
        let min_rows = self.train.train_symbols.saturating_sub(2 * self.arch.n_taps);
        if self.equalizers.iter().any(|e| e.is_neural()) && self.train.mini_batch > min_rows {
            return Err(cfg_err(
                "train.mini_batch",
                format!("{} exceeds the {min_rows} training windows", self.train.mini_batch),
            ));
        }
        self.validate_hyperopt()
    }

    fn validate_hyperopt(&self) -> Result<()> {
        let h = &self.hyperopt;
        if !h.equalizer.is_neural() {
            return Err(cfg_err("hyperopt.equalizer", "expected one of {mlp, bilstm, crnn}"));
        }
        if h.epochs == 0 {
            return Err(cfg_err("hyperopt.epochs", "must be at least 1"));
        }
        h.bo.validate()?;
        h.space.validate().map_err(|e| match e {
            Error::Config { field, msg } => cfg_err(&format!("hyperopt.space.{field}"), msg),
            e => e,
        })?;
        if h.space.n_taps.lo < 1 || h.space.filters.lo < 1 || h.space.hidden.lo < 1 || h.space.batch.lo < 1 {
            return Err(cfg_err("hyperopt.space", "ranges must start at 1 or above"));
        }
        if h.space.kernel.lo < 1 || h.space.kernel.lo % 2 == 0 || (h.space.kernel.len() > 1 && h.space.kernel.step % 2 != 0) {
            return Err(cfg_err("hyperopt.space.kernel", "kernel sizes must be odd"));
        }
        let rows = self.train.train_symbols as i64 - 2 * h.space.n_taps.hi;
        if h.space.batch.hi > rows {
            return Err(cfg_err(
                "hyperopt.space.batch",
                format!("largest batch {} exceeds the {rows} training windows", h.space.batch.hi),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of everything that affects results (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("configuration serialises to JSON");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}
