//! Metrics (BER, Q-factor), the launch-power sweep and comparison against published curves.

mod compare;
mod metrics;
mod pipeline;
mod reference;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use compare::{compare_to_reference, write_plot_bundle, ComparisonReport, CurveSummary, REFERENCE_LABEL};
pub use metrics::{
    ber_count, ber_from_q_db, count_frame_errors, erfc, erfc_inv, evm_db, frame_ber, normal_cdf,
    normal_pdf, q_factor_from_ber, BerResult,
};
pub use pipeline::{
    dataset_seeds, model_stem, save_models, simulate_dataset, DatasetRole, LinkDataset, PointOutcome, QPoint, Scenario, ScenarioRunner,
    TransceiverConfig, RX_SPS,
};
pub use reference::ReferenceCurves;
pub use sweep::{read_results, sort_points, sweep_launch_power, write_results, SweepOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "WDM")]
    Wdm,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Sc => "SC",
            ScenarioKind::Wdm => "WDM",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SC" => Ok(ScenarioKind::Sc),
            "WDM" => Ok(ScenarioKind::Wdm),
            _ => Err(crate::error::invalid(format!("unknown scenario `{s}`, expected SC or WDM"))),
        }
    }
}

/// Every processing chain that produces a Q-factor curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equalizer {
    /// CDC + matched filter + alignment ("regular DSP").
    Dsp,
    /// Digital back-propagation with optimised scales.
    Dbp,
    Mlp,
    Bilstm,
    Crnn,
}

impl Equalizer {
    pub const ALL: [Equalizer; 5] = [Equalizer::Dsp, Equalizer::Dbp, Equalizer::Mlp, Equalizer::Bilstm, Equalizer::Crnn];

    pub fn label(self) -> &'static str {
        match self {
            Equalizer::Dsp => "dsp",
            Equalizer::Dbp => "dbp",
            Equalizer::Mlp => "mlp",
            Equalizer::Bilstm => "bilstm",
            Equalizer::Crnn => "crnn",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Equalizer::Mlp | Equalizer::Bilstm | Equalizer::Crnn)
    }

    pub fn architecture(self) -> Option<crate::nnequalizer::Architecture> {
        use crate::nnequalizer::Architecture;
        match self {
            Equalizer::Mlp => Some(Architecture::Mlp),
            Equalizer::Bilstm => Some(Architecture::BiLstm),
            Equalizer::Crnn => Some(Architecture::Crnn),
            _ => None,
        }
    }

    /// Parses a neural-equalizer label only.
    pub fn parse_neural(s: &str) -> crate::Result<Self> {
        match s.parse::<Equalizer>() {
            Ok(e) if e.is_neural() => Ok(e),
            _ => Err(crate::error::invalid(format!("unknown equalizer `{s}`; expected one of {{mlp, bilstm, crnn}}"))),
        }
    }
}

impl fmt::Display for Equalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Equalizer {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dsp" | "regular-dsp" | "regular_dsp" => Ok(Equalizer::Dsp),
            "dbp" => Ok(Equalizer::Dbp),
            "mlp" => Ok(Equalizer::Mlp),
            "bilstm" => Ok(Equalizer::Bilstm),
            "crnn" => Ok(Equalizer::Crnn),
            _ => Err(crate::error::invalid(format!(
                "unknown equalizer `{s}`; expected one of {{dsp, dbp, mlp, bilstm, crnn}}"
            ))),
        }
    }
}
