//! Neural equalizers written from scratch: windowed datasets, dense / conv1d / (bi)LSTM
//! layers with exact reverse-mode gradients, Adam, training and stream inference.

mod adam;
mod checkpoint;
mod dataset;
mod equalize;
mod layers;
mod model;
mod scalar;
mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dataset::{build_inference_windows, build_windows, Polarization, WindowedDataset, FEATURES};
pub use equalize::{equalize, equalize_frame, predict, PolarizationPair};
pub use layers::{Activation, FeatShape, LayerSpec};
pub use model::EqualizerModel;
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use train::{evaluate, train, train_pair, train_polarization, EpochRecord, TrainingLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "bilstm")]
    BiLstm,
    #[serde(rename = "crnn")]
    Crnn,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::BiLstm => "bilstm",
            Architecture::Crnn => "crnn",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Architecture::Mlp => 1,
            Architecture::BiLstm => 2,
            Architecture::Crnn => 3,
        }
    }

    pub(crate) fn from_code(c: u32) -> Result<Self> {
        match c {
            1 => Ok(Architecture::Mlp),
            2 => Ok(Architecture::BiLstm),
            3 => Ok(Architecture::Crnn),
            _ => Err(invalid(format!("unknown architecture code {c}"))),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Architecture::Mlp),
            "bilstm" => Ok(Architecture::BiLstm),
            "crnn" => Ok(Architecture::Crnn),
            _ => Err(invalid(format!("unknown architecture `{s}`; expected one of {{mlp, bilstm, crnn}}"))),
        }
    }
}

/// Hyperparameters that fix a network's layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSpec {
    /// Window half-width `N`; the memory is `M = 2N + 1` symbols.
    pub n_taps: usize,
    /// Conv1d filters `X` (CRNN only).
    pub filters: usize,
    /// Conv1d kernel size `Z` (CRNN only, odd).
    pub kernel: usize,
    /// LSTM hidden units `Y` per direction (biLSTM and CRNN).
    pub hidden: usize,
    /// Width of each of the two MLP hidden layers.
    pub mlp_units: usize,
    /// Conv1d and MLP hidden activation.
    pub activation: Activation,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self::paper()
    }
}

impl ArchSpec {
    /// N = 20, X = 244, Z = 3, Y = 226, 192 MLP units, Leaky ReLU(0.2).
    pub fn paper() -> Self {
        Self { n_taps: 20, filters: 244, kernel: 3, hidden: 226, mlp_units: 192, activation: Activation::LeakyRelu(0.2) }
    }

    pub fn memory(&self) -> usize {
        2 * self.n_taps + 1
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |field: &str, msg: &str| Error::Config { field: field.into(), msg: msg.into() };
        if self.filters == 0 {
            return Err(cfg("filters", "must be positive"));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(cfg("kernel", "must be a positive odd number"));
        }
        if self.hidden == 0 {
            return Err(cfg("hidden", "must be positive"));
        }
        if self.mlp_units == 0 {
            return Err(cfg("mlp_units", "must be positive"));
        }
        Ok(())
    }

    pub fn layers(&self, arch: Architecture) -> Vec<LayerSpec> {
        let m = self.memory();
        let (x, y) = (self.filters, self.hidden);
        match arch {
            Architecture::Mlp => vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: m * FEATURES, outputs: self.mlp_units, activation: self.activation },
                LayerSpec::Dense { inputs: self.mlp_units, outputs: self.mlp_units, activation: self.activation },
                LayerSpec::Dense { inputs: self.mlp_units, outputs: 2, activation: Activation::Linear },
            ],
            Architecture::BiLstm => vec![
                LayerSpec::Lstm { inputs: FEATURES, hidden: y, bidirectional: true },
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: m * 2 * y, outputs: 2, activation: Activation::Linear },
            ],
            Architecture::Crnn => vec![
                LayerSpec::Conv1d { in_channels: FEATURES, filters: x, kernel: self.kernel, activation: self.activation },
                LayerSpec::Lstm { inputs: x, hidden: y, bidirectional: true },
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: m * 2 * y, outputs: 2, activation: Activation::Linear },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// 32-bit arithmetic for training and inference throughput.
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mini_batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub loss: Loss,
    pub shuffle: bool,
    pub shuffle_seed: u64,
    pub train_symbols: usize,
    pub validation_symbols: usize,
    pub test_symbols: usize,
    pub precision: Precision,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: 2^16 training symbols, 50 epochs.
    fn default() -> Self {
        Self {
            mini_batch: 4331,
            epochs: 50,
            learning_rate: 1e-3,
            loss: Loss::Mse,
            shuffle: true,
            shuffle_seed: 0,
            train_symbols: 1 << 16,
            validation_symbols: 1 << 15,
            test_symbols: 1 << 15,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    /// 2^20 training symbols, 200 epochs, 2^17 validation and test symbols.
    pub fn paper() -> Self {
        Self {
            epochs: 200,
            train_symbols: 1 << 20,
            validation_symbols: 1 << 17,
            test_symbols: 1 << 17,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |field: &str, msg: &str| Error::Config { field: field.into(), msg: msg.into() };
        if self.mini_batch == 0 {
            return Err(cfg("mini_batch", "must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(cfg("learning_rate", "must be a positive finite number"));
        }
        for (name, v) in [
            ("train_symbols", self.train_symbols),
            ("validation_symbols", self.validation_symbols),
            ("test_symbols", self.test_symbols),
        ] {
            if v == 0 {
                return Err(cfg(name, "must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_crnn_shape_chain() {
        let spec = ArchSpec::paper();
        let mut s = FeatShape::Seq { len: spec.memory(), channels: FEATURES };
        let mut seen = vec![];
        for l in spec.layers(Architecture::Crnn) {
            s = l.output_shape(s).unwrap();
            seen.push(s.with_batch(7));
        }
        assert_eq!(seen, vec![vec![7, 41, 244], vec![7, 41, 452], vec![7, 18532], vec![7, 2]]);
    }

    #[test]
    fn architecture_labels() {
        for a in [Architecture::Mlp, Architecture::BiLstm, Architecture::Crnn] {
            assert_eq!(a.label().parse::<Architecture>().unwrap(), a);
            assert_eq!(Architecture::from_code(a.code()).unwrap(), a);
        }
        let e = "cnn".parse::<Architecture>().unwrap_err().to_string();
        assert!(e.contains("{mlp, bilstm, crnn}"));
    }
}
