//! Receiver DSP: channel selection and resampling, CD compensation, matched filtering,
//! data-aided phase/amplitude alignment, and digital back-propagation.

mod align;
mod cdc;
mod dbp;
mod matched;
mod resample;

use serde::{Deserialize, Serialize};

pub use align::{evm_of, phase_amplitude_align, AlignmentReport};
pub use cdc::{cdc_compensate, cdc_transfer};
pub use dbp::{dbp_compensate, dbp_grid_search, DbpGridPoint};
pub use matched::matched_filter_downsample;
pub use resample::{resample, select_channel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbpConfig {
    pub steps_per_span: usize,
    /// Multiplier on the fibre Kerr coefficient.
    pub gamma_scale: f64,
    /// Multiplier on the received power seen by the back-propagation.
    pub power_scale: f64,
    pub operating_sps: usize,
    /// Grid-search `gamma_scale` x `power_scale` on validation data before use.
    pub optimize: bool,
    pub gamma_grid: [f64; 2],
    pub power_grid: [f64; 2],
    pub grid_points: usize,
}

impl Default for DbpConfig {
    fn default() -> Self {
        Self {
            steps_per_span: 3,
            gamma_scale: 1.0,
            power_scale: 1.0,
            operating_sps: 2,
            optimize: true,
            gamma_grid: [0.5, 1.2],
            power_grid: [0.8, 1.2],
            grid_points: 11,
        }
    }
}

impl DbpConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |field: &str, msg: &str| {
            Err(crate::Error::Config { field: format!("dbp.{field}"), msg: msg.into() })
        };
        if self.steps_per_span < 1 {
            return bad("steps_per_span", "must be at least 1");
        }
        if !(self.gamma_scale >= 0.0 && self.power_scale > 0.0) {
            return bad("gamma_scale", "scales must be positive");
        }
        if self.operating_sps < 2 {
            return bad("operating_sps", "must be at least 2");
        }
        if self.optimize && self.grid_points < 1 {
            return bad("grid_points", "must be at least 1");
        }
        Ok(())
    }
}
