use super::{matched_filter_downsample, phase_amplitude_align, DbpConfig};
use crate::channel::{step_grid, Direction, LinkConfig, SsfmPropagator};
use crate::error::Result;
use crate::eval::count_frame_errors;
use crate::txdsp::{RrcFilter, SampledWaveform, SymbolFrame};

/// Back-propagates a received waveform through the inverse link: spans in reverse order,
/// `steps_per_span` uniform symmetric steps each, Kerr coefficient scaled by `gamma_scale`
/// and the field power by `power_scale`.
pub fn dbp_compensate(wave: &SampledWaveform, link: &LinkConfig, dbp: &DbpConfig) -> Result<SampledWaveform> {
    dbp.validate()?;
    let fiber = &link.span;
    let steps = step_grid(fiber.length_m(), fiber.length_m() / dbp.steps_per_span as f64)?;
    let amp = dbp.power_scale.sqrt();
    let mut w = wave.clone();
    w.scale(amp);
    let mut prop = SsfmPropagator::new(w.len(), w.sample_rate);
    let undo_gain = 10f64.powf(-link.gain_db() / 20.0);
    let gamma = fiber.gamma_per_w_m() * dbp.gamma_scale;
    for _ in 0..link.n_spans {
        w.scale(undo_gain);
        prop.propagate_span(&mut w, fiber, &steps, gamma, Direction::Inverse);
    }
    w.scale(1.0 / amp);
    Ok(w)
}

/// Outcome of one DBP parameter setting on validation data.
#[derive(Debug, Clone, PartialEq)]
pub struct DbpGridPoint {
    pub gamma_scale: f64,
    pub power_scale: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub evm_db: f64,
}

fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![range[0]];
    }
    (0..n).map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64).collect()
}

/// Grid search of `gamma_scale` x `power_scale` minimising validation bit errors (EVM breaks
/// ties). `wave` must already be at the DBP operating rate; `tx` holds the transmitted
/// symbols that follow the transient window (trailing symbols beyond it are ignored).
pub fn dbp_grid_search(
    wave: &SampledWaveform,
    tx: &SymbolFrame,
    link: &LinkConfig,
    dbp: &DbpConfig,
    filter: &RrcFilter,
) -> Result<DbpGridPoint> {
    let mut best: Option<DbpGridPoint> = None;
    for &g in &linspace(dbp.gamma_grid, dbp.grid_points) {
        for &p in &linspace(dbp.power_grid, dbp.grid_points) {
            let cfg = DbpConfig { gamma_scale: g, power_scale: p, ..dbp.clone() };
            let out = dbp_compensate(wave, link, &cfg)?;
            let rx = matched_filter_downsample(&out, filter, tx.baud_rate)?;
            let rx = match rx.len().checked_sub(tx.len()) {
                Some(extra) => rx.trimmed(0, extra)?,
                None => return Err(crate::error::invalid("DBP output is shorter than the reference frame")),
            };
            let (rx, report) = phase_amplitude_align(&rx, tx)?;
            let (errors, bits) = count_frame_errors(&rx, tx)?;
            let cand = DbpGridPoint { gamma_scale: g, power_scale: p, bit_errors: errors, bits, evm_db: report.residual_evm_db };
            let better = match &best {
                None => true,
                Some(b) => (cand.bit_errors, cand.evm_db) < (b.bit_errors, b.evm_db),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("grid has at least one point"))
}
