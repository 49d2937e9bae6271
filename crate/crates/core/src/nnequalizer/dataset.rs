use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{invalid, Result};
use crate::txdsp::SymbolFrame;

/// Number of real input features per timestep: Re/Im of both polarisations.
pub const FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::X => 0,
            Polarization::Y => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::X => "x",
            Polarization::Y => "y",
        }
    }
}

/// Per-symbol feature stream `[Re x, Im x, Re y, Im y]`, `4 L` values.
pub(crate) fn feature_stream(rx: &SymbolFrame) -> Vec<f64> {
    rx.x.iter()
        .zip(&rx.y)
        .flat_map(|(a, b)| [a.re, a.im, b.re, b.im])
        .collect()
}

/// Sliding windows of `M = 2N + 1` received symbols paired with the transmitted centre symbol.
///
/// Windows over consecutive symbols with timestep-major features are contiguous slices of
/// the per-symbol feature stream, so row `s` is `stream[4s .. 4(s + M)]` and the `(S, M, 4)`
/// input tensor is never materialised unless asked for.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    stream: Vec<f64>,
    targets: Vec<f64>,
    pub n_taps: usize,
    pub target_polarization: Polarization,
}

impl WindowedDataset {
    pub fn memory(&self) -> usize {
        2 * self.n_taps + 1
    }

    pub fn rows(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.rows(), self.memory(), FEATURES]
    }

    /// Flattened `(M, 4)` window of row `s`.
    pub fn input_row(&self, s: usize) -> &[f64] {
        let w = self.memory() * FEATURES;
        &self.stream[s * FEATURES..s * FEATURES + w]
    }

    /// `[Re, Im]` of the target symbol of row `s`.
    pub fn target_row(&self, s: usize) -> [f64; 2] {
        [self.targets[2 * s], self.targets[2 * s + 1]]
    }

    pub fn inputs(&self) -> Tensor {
        let [s, m, f] = self.input_shape();
        let mut data = Vec::with_capacity(s * m * f);
        for r in 0..s {
            data.extend_from_slice(self.input_row(r));
        }
        Tensor { shape: vec![s, m, f], data }
    }

    pub fn targets(&self) -> Tensor {
        Tensor { shape: vec![self.rows(), 2], data: self.targets.clone() }
    }
}

/// Builds `L - 2N` training rows from an aligned received/transmitted frame pair.
pub fn build_windows(
    rx: &SymbolFrame,
    tx: &SymbolFrame,
    n_taps: usize,
    pol: Polarization,
) -> Result<WindowedDataset> {
    if rx.len() != tx.len() {
        return Err(invalid(format!("rx ({}) and tx ({}) frames differ in length", rx.len(), tx.len())));
    }
    let l = rx.len();
    if l <= 2 * n_taps {
        return Err(invalid(format!("frame of {l} symbols is too short for N = {n_taps} (needs more than {})", 2 * n_taps)));
    }
    let src = match pol {
        Polarization::X => &tx.x,
        Polarization::Y => &tx.y,
    };
    let targets = src[n_taps..l - n_taps].iter().flat_map(|c| [c.re, c.im]).collect();
    Ok(WindowedDataset { stream: feature_stream(rx), targets, n_taps, target_polarization: pol })
}

/// Inference-only windows (targets are zero).
pub fn build_inference_windows(rx: &SymbolFrame, n_taps: usize) -> Result<WindowedDataset> {
    let l = rx.len();
    if l <= 2 * n_taps {
        return Err(invalid(format!("stream of {l} symbols is shorter than one window of {}", 2 * n_taps + 1)));
    }
    Ok(WindowedDataset {
        stream: feature_stream(rx),
        targets: vec![0.0; 2 * (l - 2 * n_taps)],
        n_taps,
        target_polarization: Polarization::X,
    })
}
