use super::{step_grid, wdm_multiplex, Direction, LinkConfig, SsfmConfig, SsfmPropagator, WdmConfig};
use crate::error::{invalid, Result};
use crate::seed::derive;
use crate::txdsp::SampledWaveform;

/// Optional WDM multiplexing, then `n_spans` x (fibre span, EDFA).
///
/// `launch_power_dbm` is the per-channel launch power, used for neighbours whose power is
/// not pinned by `wdm`. Span `i` draws its ASE from `derive(rng_seed, [i])`; the WDM
/// neighbours use a separate stream.
pub fn link_transmit(
    wave: &SampledWaveform,
    link: &LinkConfig,
    ssfm: &SsfmConfig,
    wdm: Option<&WdmConfig>,
    launch_power_dbm: f64,
    rng_seed: u64,
) -> Result<SampledWaveform> {
    if link.n_spans == 0 {
        return Err(invalid("link needs at least one span"));
    }
    if wave.is_empty() {
        return Err(invalid("cannot transmit an empty waveform"));
    }
    link.span.validate()?;
    let mut w = match wdm {
        Some(cfg) => wdm_multiplex(wave, cfg, launch_power_dbm, derive(rng_seed, &[u64::MAX]))?,
        None => wave.clone(),
    };
    let steps = step_grid(link.span.length_m(), ssfm.step_km * 1e3)?;
    let amp = link.amplifier();
    let mut prop = SsfmPropagator::new(w.len(), w.sample_rate);
    for span in 0..link.n_spans {
        prop.propagate_span(&mut w, &link.span, &steps, link.span.gamma_per_w_m(), Direction::Forward);
        amp.amplify(&mut w, derive(rng_seed, &[span as u64]));
    }
    Ok(w)
}
