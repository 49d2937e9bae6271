use std::f64::consts::PI;

use num_complex::Complex64;

use super::WdmConfig;
use crate::error::{invalid, Error, Result};
use crate::seed::derive_prbs_seed;
use crate::txdsp::{
    prbs_generate, qpsk_map, rrc_design, shape_and_upsample, SampledWaveform,
    DEFAULT_RRC_SPAN,
};

/// Minimum simulation rate for a WDM comb: `grid * (n + 1) + baud * (1 + roll_off)`.
pub fn required_wdm_sample_rate(cfg: &WdmConfig) -> f64 {
    let baud = cfg.neighbor_baud_gbd * 1e9;
    cfg.grid_spacing_ghz * 1e9 * (cfg.n_neighbors as f64 + 1.0) + baud * (1.0 + cfg.neighbor_roll_off)
}

/// Adds independently modulated DP-QPSK neighbours at `+-k * grid` around the centre channel.
///
/// `center_power_dbm` is used for neighbours when the config does not pin their power.
pub fn wdm_multiplex(
    center: &SampledWaveform,
    cfg: &WdmConfig,
    center_power_dbm: f64,
    rng_seed: u64,
) -> Result<SampledWaveform> {
    if cfg.n_neighbors == 0 {
        return Ok(center.clone());
    }
    if !cfg.n_neighbors.is_multiple_of(2) {
        return Err(invalid(format!("n_neighbors must be even, got {}", cfg.n_neighbors)));
    }
    let required = required_wdm_sample_rate(cfg);
    if center.sample_rate < required * (1.0 - 1e-12) {
        return Err(Error::InsufficientSampleRate { required_hz: required, actual_hz: center.sample_rate });
    }
    let baud = cfg.neighbor_baud_gbd * 1e9;
    let sps_f = center.sample_rate / baud;
    let sps = sps_f.round() as usize;
    if (sps_f - sps as f64).abs() > 1e-9 * sps_f {
        return Err(invalid(format!(
            "sample rate {:.4e} is not an integer multiple of the neighbour baud {:.4e}",
            center.sample_rate, baud
        )));
    }
    let n = center.len();
    if !n.is_multiple_of(sps) {
        return Err(invalid("waveform length is not a whole number of neighbour symbols"));
    }
    let n_sym = n / sps;
    let rrc = rrc_design(cfg.neighbor_roll_off, DEFAULT_RRC_SPAN, sps)?;
    let power = cfg.neighbor_power_dbm.unwrap_or(center_power_dbm);
    let df = center.sample_rate / n as f64;

    let mut out = center.clone();
    let half = cfg.n_neighbors / 2;
    let offsets = (1..=half).flat_map(|k| [k as i64, -(k as i64)]);
    for k in offsets {
        let bits = prbs_generate(derive_prbs_seed(rng_seed, &[k as u64]), 4 * n_sym)?;
        let frame = qpsk_map(&bits.bits, baud)?;
        let w = shape_and_upsample(&frame, &rrc, sps, power)?;
        // snap to an FFT bin so the carrier is periodic over the frame
        let f = (k as f64 * cfg.grid_spacing_ghz * 1e9 / df).round() * df;
        for i in 0..n {
            let ph = 2.0 * PI * f * i as f64 / center.sample_rate;
            let rot = Complex64::from_polar(1.0, ph);
            out.x[i] += w.x[i] * rot;
            out.y[i] += w.y[i] * rot;
        }
    }
    log::debug!("wdm comb: {} neighbours at {power:.1} dBm", cfg.n_neighbors);
    Ok(out)
}
