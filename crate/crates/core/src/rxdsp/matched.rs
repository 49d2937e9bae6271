use crate::error::{invalid, Result};
use crate::txdsp::{RrcFilter, SampledWaveform, SymbolFrame};
use num_complex::Complex64;

fn filter_at_symbols(w: &[Complex64], taps: &[f64], sps: usize, n_sym: usize) -> Vec<Complex64> {
    let d = (taps.len() - 1) as isize / 2;
    let n = w.len() as isize;
    (0..n_sym)
        .map(|k| {
            let c = (k * sps) as isize;
            let lo = (c - d).max(0);
            let hi = (c + d).min(n - 1);
            let mut acc = Complex64::default();
            for j in lo..=hi {
                acc += w[j as usize] * taps[(j - c + d) as usize];
            }
            acc
        })
        .collect()
}

/// RRC matched filter evaluated at the known symbol instants, with the transient window
/// (`filter.span_symbols` symbols) dropped at both edges.
pub fn matched_filter_downsample(
    wave: &SampledWaveform,
    filter: &RrcFilter,
    baud_rate: f64,
) -> Result<SymbolFrame> {
    let sps_f = wave.sample_rate / baud_rate;
    let sps = sps_f.round() as usize;
    if sps == 0 || (sps_f - sps as f64).abs() > 1e-9 * sps_f {
        return Err(invalid(format!(
            "sample rate {:.6e} is not an integer multiple of the baud rate {:.6e}; resample first",
            wave.sample_rate, baud_rate
        )));
    }
    if sps != filter.samples_per_symbol {
        return Err(invalid(format!(
            "waveform has {sps} samples/symbol but the filter was designed for {}",
            filter.samples_per_symbol
        )));
    }
    if !wave.len().is_multiple_of(sps) {
        return Err(invalid("waveform length is not a whole number of symbols"));
    }
    let n_sym = wave.len() / sps;
    let edge = filter.span_symbols;
    if n_sym <= 2 * edge {
        return Err(invalid(format!("{n_sym} symbols leave nothing after dropping {edge} transient symbols per edge")));
    }
    let x = filter_at_symbols(&wave.x, &filter.taps, sps, n_sym);
    let y = filter_at_symbols(&wave.y, &filter.taps, sps, n_sym);
    SymbolFrame::new(x[edge..n_sym - edge].to_vec(), y[edge..n_sym - edge].to_vec(), baud_rate)
}
