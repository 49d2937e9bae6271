use num_complex::Complex64;

use super::{RrcFilter, SymbolFrame};
use crate::error::{invalid, Result};

/// Dual-polarisation complex baseband field; `|E|^2` is power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sample_rate: f64,
    pub center_frequency_offset: f64,
}

impl SampledWaveform {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid("waveform polarisations must have equal length"));
        }
        Ok(Self { x, y, sample_rate, center_frequency_offset: 0.0 })
    }

    pub fn zeros(n: usize, sample_rate: f64) -> Self {
        Self {
            x: vec![Complex64::default(); n],
            y: vec![Complex64::default(); n],
            sample_rate,
            center_frequency_offset: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Sum of |x|^2 + |y|^2 over all samples.
    pub fn energy(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|c| c.norm_sqr()).sum()
    }

    /// Average total (both polarisations) power in watts.
    pub fn mean_power(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.energy() / self.len() as f64
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.x.iter_mut().chain(self.y.iter_mut()).for_each(|c| *c *= k);
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Zero-stuffed upsampling followed by "same" RRC convolution; symbol `k` peaks at sample `k * sps`.
fn shape_pol(symbols: &[Complex64], taps: &[f64], sps: usize) -> Vec<Complex64> {
    let n_out = symbols.len() * sps;
    let d = (taps.len() - 1) as isize / 2;
    let mut out = vec![Complex64::default(); n_out];
    for (k, &s) in symbols.iter().enumerate() {
        if s == Complex64::default() {
            continue;
        }
        let centre = (k * sps) as isize;
        let lo = (centre - d).max(0);
        let hi = (centre + d).min(n_out as isize - 1);
        for j in lo..=hi {
            out[j as usize] += s * taps[(j - centre + d) as usize];
        }
    }
    out
}

/// Pulse-shapes a symbol frame and scales it to the requested total launch power.
///
/// The scale is analytic: unit-power symbols through a unit-energy filter give `1/sps` per
/// polarisation, so each polarisation is multiplied by `sqrt(P * sps / 2)`.
pub fn shape_and_upsample(
    frame: &SymbolFrame,
    filter: &RrcFilter,
    sps: usize,
    launch_power_dbm: f64,
) -> Result<SampledWaveform> {
    if frame.is_empty() {
        return Err(invalid("cannot shape an empty frame"));
    }
    if sps != filter.samples_per_symbol {
        return Err(invalid(format!(
            "sps {sps} does not match the filter's {}",
            filter.samples_per_symbol
        )));
    }
    let k = (dbm_to_watts(launch_power_dbm) * sps as f64 / 2.0).sqrt();
    let mut w = SampledWaveform::new(
        shape_pol(&frame.x, &filter.taps, sps),
        shape_pol(&frame.y, &filter.taps, sps),
        frame.baud_rate * sps as f64,
    )?;
    w.scale(k);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txdsp::{prbs_generate, qam16_map, rrc_design};

    #[test]
    fn zero_dbm_is_one_milliwatt() {
        let bits = prbs_generate(3, 8 * 8192).unwrap();
        let f = qam16_map(&bits, 34.4e9).unwrap();
        let rrc = rrc_design(0.1, 64, 2).unwrap();
        let w = shape_and_upsample(&f, &rrc, 2, 0.0).unwrap();
        assert!((w.mean_power() / 1e-3 - 1.0).abs() < 0.005, "{}", w.mean_power());
        assert_eq!(w.len(), 2 * 8192);
        assert!((w.sample_rate - 68.8e9).abs() < 1.0);
    }

    #[test]
    fn zero_symbols_zero_waveform() {
        let f = SymbolFrame::new(vec![Complex64::default(); 100], vec![Complex64::default(); 100], 1.0).unwrap();
        let rrc = rrc_design(0.1, 8, 2).unwrap();
        let w = shape_and_upsample(&f, &rrc, 2, 5.0).unwrap();
        assert_eq!(w.energy(), 0.0);
    }

    #[test]
    fn sps_mismatch_rejected() {
        let f = SymbolFrame::new(vec![Complex64::new(1.0, 0.0)], vec![Complex64::new(1.0, 0.0)], 1.0).unwrap();
        let rrc = rrc_design(0.1, 8, 4).unwrap();
        assert!(shape_and_upsample(&f, &rrc, 2, 0.0).is_err());
    }
}
