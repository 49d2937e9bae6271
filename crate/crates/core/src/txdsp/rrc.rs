use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};

/// Root-raised-cosine FIR, unit energy, `span_symbols * samples_per_symbol + 1` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcFilter {
    pub roll_off: f64,
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
    pub taps: Vec<f64>,
}

impl RrcFilter {
    /// Index of the centre tap.
    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// Continuous RRC impulse response at time `t` in symbol periods (unnormalised).
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    let quarter = 1.0 / (4.0 * beta);
    if t.abs() < 1e-12 {
        1.0 - beta + 4.0 * beta / PI
    } else if (t.abs() - quarter).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        beta / SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
    } else {
        let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
        let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
        num / den
    }
}

pub fn rrc_design(roll_off: f64, span_symbols: usize, sps: usize) -> Result<RrcFilter> {
    if !(roll_off > 0.0 && roll_off <= 1.0) {
        return Err(invalid(format!("RRC roll-off must lie in (0, 1], got {roll_off}")));
    }
    if span_symbols == 0 || !span_symbols.is_multiple_of(2) {
        return Err(invalid(format!("RRC span must be a positive even symbol count, got {span_symbols}")));
    }
    if sps < 2 {
        return Err(invalid(format!("RRC needs at least 2 samples per symbol, got {sps}")));
    }
    let n = span_symbols * sps + 1;
    let c = (n - 1) / 2;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| rrc_impulse((i as f64 - c as f64) / sps as f64, roll_off))
        .collect();
    // mirror so the even symmetry is exact to the bit
    for i in 0..c {
        taps[n - 1 - i] = taps[i];
    }
    let e = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= e);
    Ok(RrcFilter { roll_off, span_symbols, samples_per_symbol: sps, taps })
}
