//! Transmitter DSP: PRBS bits, DP-16QAM mapping and RRC pulse shaping.

mod prbs;
mod qam;
mod rrc;
mod shaping;

pub use prbs::{prbs_generate, BitSequence, Prbs32, PRBS_ORDER};
pub use qam::{
    frame_to_bits, qam16_demap, qam16_map, qam16_slice, qpsk_map, SymbolFrame, QAM16_LEVELS,
};
pub use rrc::{rrc_design, RrcFilter};
pub use shaping::{dbm_to_watts, shape_and_upsample, watts_to_dbm, SampledWaveform};

/// Default symbol rate (34.4 GBd).
pub const DEFAULT_BAUD_RATE: f64 = 34.4e9;
/// Default RRC roll-off.
pub const DEFAULT_ROLL_OFF: f64 = 0.1;
/// Default RRC span in symbols; also the transient window dropped at each frame edge.
pub const DEFAULT_RRC_SPAN: usize = 64;
